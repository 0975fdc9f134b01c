//! Run-configuration capture: every report names the subcommand, the
//! effective value of each parameter that influences results, and a SHA-256
//! digest of every input file, all condensed into one fingerprint so two
//! reports with equal fingerprints came from equal computations.
//!
//! Presentation choices (`--format`) and destination paths (`--output`,
//! `--out-dir`) are recorded nowhere here: they change where or how results
//! appear, not what they are.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Read an input file, returning its text and content digest.
pub fn read_input(path: &Path) -> Result<(String, String), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::Data(format!("{} is not valid UTF-8", path.display())))?;
    Ok((text, digest))
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    /// Effective parameter values after defaults, keyed by flag name.
    pub flags: BTreeMap<String, String>,
    /// Input files in positional order.
    pub inputs: Vec<InputDigest>,
    /// SHA-256 over the command, the sorted flags, and the input digests.
    pub fingerprint: String,
}

impl RunConfig {
    pub fn new(command: &'static str) -> Self {
        RunConfig {
            command,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            fingerprint: String::new(),
        }
    }

    pub fn flag(mut self, key: &str, value: impl Display) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, path: &Path, sha256: String) -> Self {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        self
    }

    /// Compute the fingerprint; call once after all flags and inputs are set.
    /// Input digests participate in file order and without their paths, so
    /// moving an input does not change the fingerprint but editing it does.
    pub fn seal(mut self) -> Self {
        let mut canonical = format!("leakscope {}\n", self.command);
        for (key, value) in &self.flags {
            canonical.push_str(&format!("flag {key}={value}\n"));
        }
        for input in &self.inputs {
            canonical.push_str(&format!("input sha256={}\n", input.sha256));
        }
        self.fingerprint = sha256_hex(canonical.as_bytes());
        self
    }

    /// The `#` comment block that precedes every TSV header.
    pub fn tsv_comments(&self) -> String {
        let mut out = format!("# leakscope {}\n", self.command);
        for (key, value) in &self.flags {
            out.push_str(&format!("# {key}={value}\n"));
        }
        for input in &self.inputs {
            out.push_str(&format!("# input {} sha256={}\n", input.path, input.sha256));
        }
        out.push_str(&format!("# fingerprint={}\n", self.fingerprint));
        out
    }
}

/// Emit a TSV report: config comments, a header, then the rows.
pub fn print_tsv(config: &RunConfig, header: &[&str], rows: &[Vec<String>]) {
    let mut out = config.tsv_comments();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    print!("{out}");
}

/// Emit a JSON report (pretty-printed, trailing newline).
pub fn print_json(payload: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(payload)
        .map_err(|e| Failure::Data(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    Ok(())
}
