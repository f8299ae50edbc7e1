//! Run artifacts: CSV series, JSON documents, the verdict and the manifest.

use crate::config::{emit_config, Command, RunConfig, RunStamp};
use crate::error::LabResult;
use serde::Serialize;
use serde_json::{Map, Value as Json};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST: &str = "manifest.toml";
pub const VERDICT: &str = "verdict.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Non-finite numbers become `null`.
pub fn num(x: f64) -> Json {
    serde_json::Number::from_f64(x).map(Json::Number).unwrap_or(Json::Null)
}

/// `x` rounded to 12 significant digits, for values whose last few bits are
/// evaluation noise.
pub fn sig12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 { format!("{x:.11e}").parse().unwrap_or(x) } else { x }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub subcommand: String,
    pub status: Status,
    pub metrics: Map<String, Json>,
    pub tolerances: Map<String, Json>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(cmd: Command) -> Self {
        Verdict {
            subcommand: cmd.name().into(),
            status: Status::Pass,
            metrics: Map::new(),
            tolerances: Map::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, x: f64) -> &mut Self {
        self.metrics.insert(key.into(), num(x));
        self
    }

    pub fn metric_json(&mut self, key: &str, v: Json) -> &mut Self {
        self.metrics.insert(key.into(), v);
        self
    }

    pub fn tolerance(&mut self, key: &str, x: f64) -> &mut Self {
        self.tolerances.insert(key.into(), num(x));
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn status(&mut self, s: Status) -> &mut Self {
        self.status = s;
        self
    }

    /// Downgrades to `fail` when `ok` is false.
    pub fn require(&mut self, ok: bool, what: &str) -> &mut Self {
        if !ok {
            if self.status == Status::Pass {
                self.status = Status::Fail;
            }
            self.notes.push(format!("failed: {what}"));
        }
        self
    }
}

/// Files produced by a run, held in memory until the verdict is known.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

fn field(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> LabResult<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r.iter().map(|x| field(*x)))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.files.insert(format!("{name}.csv"), bytes);
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Json) -> LabResult<()> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.files.insert(format!("{name}.json"), bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.keys().map(|s| s.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(|v| v.as_slice())
    }

    /// SHA-256 over every file name and content, in name order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, bytes) in &self.files {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        hex::encode(h.finalize())
    }

    /// Adds the verdict, writes everything under `dir` with a manifest echoing
    /// `cfg`, and returns the content hash.
    pub fn finish(mut self, dir: &Path, cmd: Command, cfg: &RunConfig, verdict: &Verdict) -> LabResult<String> {
        self.json("verdict", &serde_json::to_value(verdict)?)?;
        let hash = self.content_hash();
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let mut stamped = cfg.clone();
        stamped.run = Some(RunStamp {
            subcommand: cmd.name().into(),
            content_hash: hash.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
        });
        std::fs::write(dir.join(MANIFEST), emit_config(&stamped)?)?;
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_sentinels() {
        let mut a = Artifacts::new();
        a.csv("s", &["t", "x"], vec![vec![0.0, f64::INFINITY], vec![0.5, f64::NAN]]).unwrap();
        assert_eq!(std::str::from_utf8(a.get("s.csv").unwrap()).unwrap(), "t,x\n0,inf\n0.5,nan\n");
    }

    #[test]
    fn hash_depends_on_names_and_bytes() {
        let mut a = Artifacts::new();
        a.csv("s", &["t"], vec![vec![1.0]]).unwrap();
        let mut b = Artifacts::new();
        b.csv("r", &["t"], vec![vec![1.0]]).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_eq!(num(f64::INFINITY), Json::Null);
        assert_eq!(sig12(4.4999999999999964), 4.5);
        assert_eq!(sig12(-0.0), -0.0);
    }
}
