//! Uniform-grid block partition with an exact target block count, and the
//! density tercile split over blocks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{knn_density_with, KdTree, DEFAULT_DENSITY_K};
use crate::error::{Error, Result};
use crate::linalg::{dist2, Vec3};
use crate::numeric::median;
use crate::splat::PointCloud;

/// Finest grid tried before giving up on reaching the target.
pub const MAX_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    fn union(&self, o: &Self) -> Self {
        Self {
            min: [0, 1, 2].map(|a| self.min[a].min(o.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].max(o.max[a])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialBlock {
    pub id: usize,
    pub bounds: Aabb,
    pub point_indices: Vec<usize>,
    pub gaussian_indices: Vec<usize>,
    /// Median kNN density of member points.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOptions {
    pub density_k: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            density_k: DEFAULT_DENSITY_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub blocks: Vec<SpatialBlock>,
    /// Grid resolution per axis.
    pub grid: usize,
    /// Set when the target could not be reached or the box was padded.
    pub warnings: Vec<String>,
    /// Per-point kNN density used for block ρ.
    pub point_density: Vec<f64>,
}

struct Grid {
    lo: Vec3,
    hi: Vec3,
    g: usize,
}

impl Grid {
    fn cell(&self, p: &Vec3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            if !(p[a] >= self.lo[a] && p[a] <= self.hi[a]) {
                return None;
            }
            let f = ((p[a] - self.lo[a]) / (self.hi[a] - self.lo[a]) * self.g as f64).floor();
            idx[a] = (f as usize).min(self.g - 1);
        }
        Some((idx[0] * self.g + idx[1]) * self.g + idx[2])
    }

    fn cell_box(&self, c: usize) -> Aabb {
        let g = self.g;
        let idx = [c / (g * g), (c / g) % g, c % g];
        let w = [0, 1, 2].map(|a| (self.hi[a] - self.lo[a]) / g as f64);
        Aabb {
            min: [0, 1, 2].map(|a| self.lo[a] + w[a] * idx[a] as f64),
            max: [0, 1, 2].map(|a| {
                if idx[a] + 1 == g {
                    self.hi[a]
                } else {
                    self.lo[a] + w[a] * (idx[a] + 1) as f64
                }
            }),
        }
    }
}

struct Proto {
    cells: Vec<usize>,
    members: Vec<usize>,
    sum: Vec3,
}

impl Proto {
    fn centroid(&self) -> Vec3 {
        let n = self.members.len() as f64;
        self.sum.map(|s| s / n)
    }
}

/// Partitions the cloud into exactly `target_blocks` blocks when possible.
///
/// The grid resolution is the smallest `g ≤ 64` with at least
/// `target_blocks` occupied cells. The block with the fewest points is then
/// repeatedly merged into the block with the nearest centroid. Splats are
/// assigned through the grid cell containing them, falling back to the
/// nearest block centroid for positions outside the grid or in empty cells.
pub fn partition_blocks(
    cloud: &PointCloud,
    gaussians: &[Vec3],
    target_blocks: usize,
    opts: &PartitionOptions,
) -> Result<Partition> {
    cloud.validate()?;
    if target_blocks < 3 {
        return Err(Error::InvalidArgument(format!(
            "target_blocks must be at least 3, got {target_blocks}"
        )));
    }
    if opts.density_k == 0 {
        return Err(Error::InvalidArgument("density_k must be at least 1".into()));
    }
    let pts = &cloud.positions;
    let mut warnings = Vec::new();
    let (mut lo, mut hi) = cloud.bounds().expect("validated non-empty");
    let largest = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    for a in 0..3 {
        if hi[a] - lo[a] <= 0.0 {
            let pad = if largest > 0.0 { 1e-6 * largest } else { 1e-6 };
            lo[a] -= pad / 2.0;
            hi[a] += pad / 2.0;
            warnings.push(format!("zero extent on axis {a}; padded by {pad:e}"));
        }
    }

    let mut chosen = None;
    for g in 1..=MAX_GRID {
        let grid = Grid { lo, hi, g };
        let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, p) in pts.iter().enumerate() {
            cells.entry(grid.cell(p).expect("inside bounds")).or_default().push(i);
        }
        let enough = cells.len() >= target_blocks;
        if enough || g == MAX_GRID {
            if !enough {
                warnings.push(format!(
                    "only {} occupied cells at grid {MAX_GRID}; fewer than {target_blocks} blocks",
                    cells.len()
                ));
            }
            chosen = Some((grid, cells));
            break;
        }
    }
    let (grid, cells) = chosen.expect("loop always selects a grid");

    let mut protos: Vec<Proto> = cells
        .into_iter()
        .map(|(c, members)| {
            let mut sum = [0.0; 3];
            for &i in &members {
                for a in 0..3 {
                    sum[a] += pts[i][a];
                }
            }
            Proto {
                cells: vec![c],
                members,
                sum,
            }
        })
        .collect();

    while protos.len() > target_blocks {
        let small = (0..protos.len())
            .min_by_key(|&b| protos[b].members.len())
            .expect("non-empty");
        let c = protos[small].centroid();
        let into = (0..protos.len())
            .filter(|&b| b != small)
            .min_by(|&a, &b| {
                dist2(&c, &protos[a].centroid()).total_cmp(&dist2(&c, &protos[b].centroid()))
            })
            .expect("at least two blocks");
        let taken = protos.remove(small);
        let into = if into > small { into - 1 } else { into };
        let dst = &mut protos[into];
        dst.cells.extend(taken.cells);
        dst.members.extend(taken.members);
        for a in 0..3 {
            dst.sum[a] += taken.sum[a];
        }
    }
    for p in &mut protos {
        p.cells.sort_unstable();
        p.members.sort_unstable();
    }
    protos.sort_by_key(|p| p.cells[0]);

    let tree = KdTree::new(pts);
    let k = opts.density_k.min(pts.len() - 1);
    let point_density = if k == 0 {
        warnings.push("single point; density undefined".into());
        vec![0.0; pts.len()]
    } else {
        if k < opts.density_k {
            warnings.push(format!("density k reduced to {k} for a {}-point cloud", pts.len()));
        }
        knn_density_with(&tree, pts, k)
    };

    let mut cell_owner = HashMap::new();
    for (b, p) in protos.iter().enumerate() {
        for &c in &p.cells {
            cell_owner.insert(c, b);
        }
    }
    let centroids: Vec<Vec3> = protos.iter().map(Proto::centroid).collect();
    let mut gaussian_members = vec![Vec::new(); protos.len()];
    let mut outside = 0usize;
    for (gi, g) in gaussians.iter().enumerate() {
        let cell = grid.cell(g);
        outside += usize::from(cell.is_none());
        let owner = cell.and_then(|c| cell_owner.get(&c).copied()).unwrap_or_else(|| {
            (0..centroids.len())
                .min_by(|&a, &b| dist2(g, &centroids[a]).total_cmp(&dist2(g, &centroids[b])))
                .expect("at least one block")
        });
        gaussian_members[owner].push(gi);
    }
    if outside > 0 {
        warnings.push(format!(
            "{outside} of {} splats lie outside the point-cloud extent",
            gaussians.len()
        ));
    }

    let blocks = protos
        .into_iter()
        .zip(gaussian_members)
        .enumerate()
        .map(|(id, (p, gaussian_indices))| {
            let bounds = p
                .cells
                .iter()
                .map(|&c| grid.cell_box(c))
                .reduce(|a, b| a.union(&b))
                .expect("block owns a cell");
            let rhos: Vec<f64> = p.members.iter().map(|&i| point_density[i]).collect();
            SpatialBlock {
                id,
                bounds,
                rho: median(&rhos).expect("non-empty block"),
                point_indices: p.members,
                gaussian_indices,
            }
        })
        .collect();
    Ok(Partition {
        blocks,
        grid: grid.g,
        warnings,
        point_density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tercile {
    Q1,
    Q2,
    Q3,
}

impl Tercile {
    pub const ALL: [Tercile; 3] = [Tercile::Q1, Tercile::Q2, Tercile::Q3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Tercile::Q1 => "Q1",
            Tercile::Q2 => "Q2",
            Tercile::Q3 => "Q3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratification {
    /// Block id → tercile (Q1 densest).
    pub assignment: BTreeMap<usize, Tercile>,
    pub counts: [usize; 3],
}

impl Stratification {
    pub fn tercile_of(&self, block_id: usize) -> Option<Tercile> {
        self.assignment.get(&block_id).copied()
    }
}

/// Splits blocks into three contiguous groups by descending ρ (ties by id),
/// giving any remainder to the denser groups.
pub fn stratify_terciles(blocks: &[SpatialBlock]) -> Stratification {
    let pairs: Vec<(usize, f64)> = blocks.iter().map(|b| (b.id, b.rho)).collect();
    stratify_pairs(&pairs)
}

/// [`stratify_terciles`] over bare `(id, ρ)` pairs.
pub fn stratify_pairs(pairs: &[(usize, f64)]) -> Stratification {
    let mut order = pairs.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = order.len();
    let counts = [0, 1, 2].map(|i| n / 3 + usize::from(i < n % 3));
    let mut assignment = BTreeMap::new();
    let mut it = order.into_iter();
    for (t, &c) in Tercile::ALL.iter().zip(&counts) {
        for (id, _) in it.by_ref().take(c) {
            assignment.insert(id, *t);
        }
    }
    Stratification { assignment, counts }
}
