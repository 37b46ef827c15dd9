//! The fast invariant suite behind `focklab check`.

use anyhow::Result;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::runner::{hex, run, Artifacts};

const SUITE: &[&str] = &[
    "kind = \"berezin-scan\"\ndim = 30\n[operator]\npreset = \"identity\"\n",
    "kind = \"berezin-scan\"\ndim = 30\n[operator]\npreset = \"gaussian\"\n",
    "kind = \"decay-scan\"\ndim = 30\nseed = 1\n[operator]\npreset = \"indicator-ball\"\n",
    "kind = \"essnorm\"\ndim = 40\n[operator]\npreset = \"indicator-ball\"\n[params]\nexpect = \"compact\"\n",
    "kind = \"essnorm\"\ndim = 40\n[operator]\npreset = \"point-mass\"\n[params]\nexpect = \"compact\"\n",
    "kind = \"frame-check\"\ndim = 40\nseed = 2\n[params]\nd = 1.0\nR = 3.0\nsamples = 20\n",
    "kind = \"resolution-check\"\ndim = 20\n",
    "kind = \"heat\"\ndim = 30\n[operator]\npreset = \"indicator-ball\"\n",
    "kind = \"sharp\"\ndim = 40\n",
    "kind = \"sharp\"\ndim = 40\n[weight]\nalpha = 2.0\n[params]\nf = [[2, 1, 1, 0]]\ng = [[1, 3, 0, 1]]\n",
    "kind = \"translation\"\ndim = 40\nseed = 4\n[params]\nradii = [0.5, 1.0]\ndirections = 3\nsamples = 4\n",
    "kind = \"phi-check\"\ndim = 10\n",
    "kind = \"phi-check\"\ndim = 10\n[weight]\nkind = \"fock-sobolev\"\nm = 1\na = 3.0\n",
];

pub struct SuiteResult {
    pub runs: Vec<Artifacts>,
    /// SHA-256 over the concatenated manifests, in suite order.
    pub hash: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(|a| a.manifest.passed)
    }
}

pub fn configs() -> Result<Vec<ExperimentConfig>> {
    SUITE.iter().map(|s| ExperimentConfig::from_toml(s)).collect()
}

/// Runs the suite; experiments are independent and run concurrently, results
/// keep suite order.
pub fn run_suite() -> Result<SuiteResult> {
    let runs = configs()?.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let mut h = Sha256::new();
    for a in &runs {
        h.update(a.manifest_bytes());
    }
    Ok(SuiteResult {
        hash: hex(&h.finalize()),
        runs,
    })
}
