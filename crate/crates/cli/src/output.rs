//! Result files and the manifest written next to them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use wonderboom_core::topology::Calibration;

use crate::config::FileConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEME: &str = "bls12-381-min-pk";

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    /// False when the file holds wall-clock measurements.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Host {
    pub available_cores: usize,
    pub os: &'static str,
    pub arch: &'static str,
    pub scheme: &'static str,
    /// Peak resident set in KiB, where the OS reports it.
    pub peak_rss_kib: Option<u64>,
}

impl Host {
    pub fn detect() -> Self {
        Self {
            available_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            scheme: SCHEME,
            peak_rss_kib: peak_rss_kib(),
        }
    }
}

pub fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub artifact_version: &'static str,
    pub seed: u64,
    pub large: bool,
    /// Fully resolved; feeding this file back through `--config` repeats
    /// the run.
    pub config: &'a FileConfig,
    pub host: Host,
    pub outputs: &'a [OutputFile],
}

/// Collects the files a command writes, then the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records a file the caller wrote itself.
    pub fn note_file(&mut self, name: &str, deterministic: bool) {
        self.files.push(OutputFile {
            path: name.to_string(),
            deterministic,
        });
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T, deterministic: bool) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text).with_context(|| format!("writing {name}"))?;
        self.note_file(name, deterministic);
        Ok(())
    }

    /// Writes `rows` under a fixed `header`; each row must match its width.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I, deterministic: bool) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_path(self.path(name)).with_context(|| format!("writing {name}"))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.note_file(name, deterministic);
        Ok(())
    }

    pub fn finish(self, command: &str, config: &FileConfig, large: bool) -> Result<PathBuf> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command,
            artifact_version: env!("CARGO_PKG_VERSION"),
            seed: config.simulation.seed,
            large,
            config,
            host: Host::detect(),
            outputs: &self.files,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).context("writing manifest.json")?;
        Ok(path)
    }
}

/// Fixed-precision float for CSV cells, so reruns diff cleanly.
pub fn f(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn print_warnings(c: &Calibration) {
    for w in &c.warnings {
        eprintln!("warning: {w}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.csv("a.csv", &["x", "y"], [["1", "2"]], true).unwrap();
        out.json("b.json", &[1, 2], false).unwrap();
        let p = out.finish("plan", &FileConfig::default(), false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["command"], "plan");
        assert_eq!(v["outputs"][0]["path"], "a.csv");
        assert_eq!(v["outputs"][1]["deterministic"], false);
        assert_eq!(v["host"]["scheme"], SCHEME);
        assert_eq!(fs::read_to_string(dir.path().join("a.csv")).unwrap(), "x,y\n1,2\n");
    }
}
