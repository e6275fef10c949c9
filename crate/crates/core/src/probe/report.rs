//! Tercile summaries and tabular output of probe runs.

use serde::Serialize;

use super::train::BlockResult;
use crate::density::Tercile;
use crate::error::Result;
use crate::ingest::{to_csv, Cell};
use crate::numeric::median;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TercileRow {
    pub tercile: Tercile,
    pub n_blocks: usize,
    pub median_init_mse: Option<f64>,
    pub median_final_mse: Option<f64>,
    pub median_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TercileReport {
    pub terciles: Vec<TercileRow>,
}

impl TercileReport {
    pub fn row(&self, t: Tercile) -> &TercileRow {
        &self.terciles[t.index()]
    }
}

pub fn tercile_report(results: &[BlockResult]) -> TercileReport {
    let terciles = Tercile::ALL
        .iter()
        .map(|&t| {
            let rs: Vec<&BlockResult> = results.iter().filter(|r| r.tercile == t).collect();
            let med = |f: fn(&BlockResult) -> f64| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            TercileRow {
                tercile: t,
                n_blocks: rs.len(),
                median_init_mse: med(|r| r.init_mse),
                median_final_mse: med(|r| r.final_mse),
                median_improvement_pct: med(|r| r.improvement_pct),
            }
        })
        .collect();
    TercileReport { terciles }
}

pub const BLOCK_CSV_HEADER: [&str; 7] = [
    "block_id",
    "tercile",
    "n_train",
    "n_eval",
    "init_mse",
    "final_mse",
    "improvement_pct",
];

pub fn block_results_csv(results: &[BlockResult]) -> Result<String> {
    let rows: Vec<Vec<Cell>> = results
        .iter()
        .map(|r| {
            vec![
                r.block_id.into(),
                r.tercile.label().into(),
                r.n_train.into(),
                r.n_eval.into(),
                r.init_mse.into(),
                r.final_mse.into(),
                r.improvement_pct.into(),
            ]
        })
        .collect();
    to_csv(&BLOCK_CSV_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: usize, t: Tercile, imp: f64) -> BlockResult {
        BlockResult {
            block_id: id,
            tercile: t,
            n_train: 8,
            n_eval: 2,
            init_mse: 1.0,
            final_mse: 1.0 - imp / 100.0,
            improvement_pct: imp,
            loss_trace: vec![],
        }
    }

    #[test]
    fn medians_per_tercile() {
        let rs = [
            result(0, Tercile::Q1, 80.0),
            result(1, Tercile::Q1, 60.0),
            result(2, Tercile::Q1, 70.0),
            result(3, Tercile::Q3, 10.0),
        ];
        let rep = tercile_report(&rs);
        assert_eq!(rep.row(Tercile::Q1).median_improvement_pct, Some(70.0));
        assert_eq!(rep.row(Tercile::Q2).n_blocks, 0);
        assert_eq!(rep.row(Tercile::Q2).median_final_mse, None);
        assert_eq!(rep.row(Tercile::Q3).median_improvement_pct, Some(10.0));
    }

    #[test]
    fn csv_layout() {
        let csv = block_results_csv(&[result(4, Tercile::Q2, 25.0)]).unwrap();
        let mut lines = csv.split("\r\n");
        assert_eq!(lines.next(), Some("block_id,tercile,n_train,n_eval,init_mse,final_mse,improvement_pct"));
        assert_eq!(lines.next(), Some("4,Q2,8,2,1,0.75,25"));
    }
}
