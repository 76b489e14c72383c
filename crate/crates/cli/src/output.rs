//! Results-file schema shared by `run` and `compare`.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::CSV_VERSION_LINE;

pub const RESULT_COLUMNS: [&str; 7] = [
    "trial",
    "t",
    "n_labels",
    "excess_spo_risk",
    "surrogate_risk",
    "b_t",
    "labeled_flag",
];

/// Second comment line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMeta {
    pub problem: String,
    pub algo: String,
    pub surrogate: String,
    pub n0: usize,
    pub seed: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: u64,
    pub t: usize,
    pub n_labels: usize,
    pub excess_spo_risk: f64,
    pub surrogate_risk: f64,
    pub b_t: f64,
    pub labeled_flag: u8,
}

/// Writes the version line, an optional JSON metadata comment and the rows.
pub fn write_csv<W: Write, R: Serialize>(
    mut out: W,
    meta: Option<&impl Serialize>,
    header: &[&str],
    rows: &[R],
) -> anyhow::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    if let Some(meta) = meta {
        writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> anyhow::Result<(ResultsMeta, Vec<ResultRow>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_VERSION_LINE) {
        bail!("{}: missing `{CSV_VERSION_LINE}` header", path.display());
    }
    let meta: ResultsMeta = match lines.next().and_then(|l| l.strip_prefix("# ")) {
        Some(json) => serde_json::from_str(json).with_context(|| format!("{}: bad metadata line", path.display()))?,
        None => bail!("{}: missing metadata line", path.display()),
    };
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if columns != RESULT_COLUMNS {
        bail!("{}: unexpected columns {columns:?}", path.display());
    }
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .with_context(|| format!("{}: bad row", path.display()))?;
    Ok((meta, rows))
}
