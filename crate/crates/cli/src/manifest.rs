use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct Timing {
    pub operation: String,
    pub seconds: f64,
}

#[derive(Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Record of one run, written as `manifest.json` next to the outputs.
#[derive(Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub command: String,
    /// Hash of the effective configuration, flags merged in.
    pub config_sha256: String,
    pub seed: u64,
    pub tolerance: f64,
    pub threads: Option<usize>,
    pub wall_clock_seconds: f64,
    pub timings: Vec<Timing>,
    pub outputs: Vec<OutputFile>,
    pub status: String,
}
