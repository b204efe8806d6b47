use std::path::Path;

use episim_core::mapping::XbarConfig;
use episim_core::network::{NetworkFile, NetworkSpec};
use episim_core::perf::{HardwareProfile, ProfileFile};
use episim_core::search::{CandidateSet, CandidatesFile};

use crate::errors::{CliError, CliResult};

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    // toml errors carry line/column context in their Display output
    toml::from_str(&read_to_string(path)?).map_err(|err| CliError::Parse {
        path: path.to_path_buf(),
        detail: err.to_string(),
    })
}

pub fn network(path: &Path, xbar: &XbarConfig) -> CliResult<NetworkSpec> {
    let file: NetworkFile = parse_toml(path)?;
    Ok(file.resolve(xbar)?)
}

pub fn profile(path: &Path) -> CliResult<HardwareProfile> {
    let file: ProfileFile = parse_toml(path)?;
    Ok(file.resolve()?)
}

pub fn candidates(
    path: &Path,
    network: &NetworkSpec,
    xbar: &XbarConfig,
) -> CliResult<CandidateSet> {
    let file: CandidatesFile = parse_toml(path)?;
    Ok(file.resolve(network, xbar)?)
}
