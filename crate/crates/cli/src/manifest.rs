use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub seeds: Vec<u64>,
    pub duration_secs: f64,
    pub outputs: Vec<OutputDigest>,
}

/// Collects the outputs of one invocation and writes the manifest.
pub struct Run {
    command_line: Vec<String>,
    seeds: Vec<u64>,
    start: Instant,
    outputs: Vec<(PathBuf, String)>,
}

impl Run {
    pub fn new() -> Self {
        Run {
            command_line: std::env::args().collect(),
            seeds: Vec::new(),
            start: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    /// Writes `bytes` to `path`, or to stdout when no path is given.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
        match path {
            Some(p) => {
                fs::write(p, bytes)?;
                self.outputs.push((p.to_path_buf(), hex::encode(Sha256::digest(bytes))));
            }
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
        }
        Ok(())
    }

    /// Writes `<first output>.manifest.json` if anything went to a file.
    pub fn finish(self) -> io::Result<()> {
        let Some((first, _)) = self.outputs.first() else {
            return Ok(());
        };
        let mut target = first.clone().into_os_string();
        target.push(".manifest.json");
        let manifest = RunManifest {
            format_version: FORMAT_VERSION,
            version: env!("CARGO_PKG_VERSION"),
            command_line: self.command_line,
            seeds: self.seeds,
            duration_secs: self.start.elapsed().as_secs_f64(),
            outputs: self
                .outputs
                .iter()
                .map(|(p, d)| OutputDigest {
                    path: p.display().to_string(),
                    sha256: d.clone(),
                })
                .collect(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
        json.push(b'\n');
        fs::write(target, json)
    }
}
