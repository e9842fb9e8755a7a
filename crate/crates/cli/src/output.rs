use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    /// Floats carry 17 significant digits in exponent form, which round-trips
    /// every `f64` and does not depend on locale.
    pub fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "NaN".to_string(),
            Cell::Float(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(v) => v as f64,
            Cell::Float(v) => v,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: Table,
    pub summary: Value,
}

/// Everything that identifies how a payload was produced.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub rng: &'static str,
    pub seeds: Option<Vec<u64>>,
    pub version: String,
}

impl Provenance {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            rng: qrf_core::trajectory::RNG_ALGORITHM,
            seeds: cfg.seeds.clone(),
            version: format!("qrf-sim {} (qrf-core {})", env!("CARGO_PKG_VERSION"), qrf_core::VERSION),
        }
    }

    fn seed_list(&self) -> String {
        match &self.seeds {
            Some(s) => s.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            None => "none".to_string(),
        }
    }
}

/// `#`-prefixed provenance header followed by RFC 4180 rows.
pub fn write_csv<W: Write>(out: W, table: &Table, prov: &Provenance) -> CliResult<()> {
    let mut out = out;
    writeln!(out, "# version: {}", prov.version)?;
    writeln!(out, "# config_sha256: {}", prov.config_hash)?;
    writeln!(out, "# rng: {}", prov.rng)?;
    writeln!(out, "# seeds: {}", prov.seed_list())?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.render()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sidecar_json(cfg: &ExperimentConfig, output: &ExperimentOutput, prov: &Provenance) -> Value {
    json!({
        "experiment": cfg.experiment.name(),
        "version": prov.version,
        "config_sha256": prov.config_hash,
        "rng": prov.rng,
        "seeds": prov.seeds,
        "config": cfg,
        "columns": output.table.columns,
        "rows": output.table.rows.len(),
        "summary": output.summary,
    })
}

/// `out.json` next to `out.csv`; a `.json` data path gets `.summary.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut s = out.as_os_str().to_owned();
        s.push(".summary.json");
        PathBuf::from(s)
    } else {
        out.with_extension("json")
    }
}

/// Write the CSV and its JSON sidecar; returns both paths.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    output: &ExperimentOutput,
    out: &Path,
) -> CliResult<(PathBuf, PathBuf)> {
    let prov = Provenance::for_config(cfg);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(out)?;
    write_csv(std::io::BufWriter::new(file), &output.table, &prov)?;
    let side = sidecar_path(out);
    let text = serde_json::to_string_pretty(&sidecar_json(cfg, output, &prov)).expect("sidecar serializes");
    std::fs::write(&side, text + "\n")?;
    Ok((out.to_path_buf(), side))
}
