//! One module per subcommand. Each returns its artifacts without touching
//! the output directory; `main` commits them only on success.

pub mod probe;
pub mod simulate;
pub mod stats;
pub mod stratify;

use std::path::Path;

use gsanatomy::ingest::parse_gaussian_ply;
use gsanatomy::GaussianPrimitive;
use serde_json::Value;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{read_input, Artifacts, InputDigest};

pub struct Context {
    pub seed: u64,
    pub config: Config,
}

pub struct Outcome {
    pub artifacts: Artifacts,
    pub inputs: Vec<InputDigest>,
    /// Headline numbers for the optional `--json` summary.
    pub summary: Value,
}

pub fn load_splats(path: &Path) -> CliResult<(Vec<GaussianPrimitive>, InputDigest)> {
    let (bytes, digest) = read_input(path)?;
    let ply = parse_gaussian_ply(&bytes).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let fixed = ply.renormalized.iter().filter(|&&r| r).count();
    if fixed > 0 {
        eprintln!("warning: {}: renormalized {fixed} non-unit quaternions", path.display());
    }
    Ok((ply.primitives, digest))
}

pub fn load_cloud(path: &Path) -> CliResult<(gsanatomy::PointCloud, InputDigest)> {
    let (bytes, digest) = read_input(path)?;
    let cloud = gsanatomy::ingest::parse_cloud_auto(&bytes).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    cloud.validate().map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((cloud, digest))
}
