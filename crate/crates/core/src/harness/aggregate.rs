//! Mean and standard error across seeds in long format.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub episode: u64,
    pub series: String,
    pub mean: f64,
    pub stderr: f64,
}

/// A per-seed log: column names (the first is `episode`) and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub series: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Series name of a per-seed file: the file stem without its `_seed<k>` suffix.
pub fn series_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.rfind("_seed") {
        Some(i) if stem[i + 5..].chars().all(|c| c.is_ascii_digit()) && i + 5 < stem.len() => stem[..i].to_string(),
        _ => stem,
    }
}

pub fn read_table(path: &Path) -> Result<SeriesTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("episode") {
        return Err(Error::Schema(format!("{}: first column must be `episode`", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Schema(format!("{}: non-numeric value `{v}`", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(SeriesTable { series: series_name(path), header, rows })
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups tables by series and aggregates every value column per episode.
/// Output series are named `<series>/<column>`.
pub fn aggregate_tables(tables: &[SeriesTable]) -> Result<Vec<PlotRow>> {
    let first = tables.first().ok_or_else(|| Error::Schema("no input files".into()))?;
    if let Some(t) = tables.iter().find(|t| t.header != first.header) {
        return Err(Error::Schema(format!(
            "series `{}` has columns {:?}, expected {:?}",
            t.series, t.header, first.header
        )));
    }
    let mut groups: BTreeMap<&str, Vec<&SeriesTable>> = BTreeMap::new();
    for t in tables {
        groups.entry(t.series.as_str()).or_default().push(t);
    }
    let mut out = Vec::new();
    for (series, members) in groups {
        let len = members[0].rows.len();
        if members.iter().any(|m| m.rows.len() != len) {
            return Err(Error::Schema(format!("series `{series}` mixes logs of different lengths")));
        }
        for (col, name) in first.header.iter().enumerate().skip(1) {
            for r in 0..len {
                let episode = members[0].rows[r][0];
                if members.iter().any(|m| m.rows[r][0] != episode) {
                    return Err(Error::Schema(format!("series `{series}` disagrees on episode numbering")));
                }
                let values: Vec<f64> = members.iter().map(|m| m.rows[r][col]).collect();
                let (mean, stderr) = mean_stderr(&values);
                out.push(PlotRow { episode: episode as u64, series: format!("{series}/{name}"), mean, stderr });
            }
        }
    }
    Ok(out)
}

pub fn write_plot_rows<W: Write>(out: W, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "series", "mean", "stderr"])?;
    for r in rows {
        w.write_record([r.episode.to_string(), r.series.clone(), r.mean.to_string(), r.stderr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads per-seed logs and writes the aggregated long-format CSV to `out`.
pub fn emit_plot_data(inputs: &[PathBuf], out: &Path) -> Result<usize> {
    if inputs.is_empty() {
        return Err(Error::Schema("no input files".into()));
    }
    let tables = inputs.iter().map(|p| read_table(p)).collect::<Result<Vec<_>>>()?;
    let rows = aggregate_tables(&tables)?;
    let mut bytes = Vec::new();
    write_plot_rows(&mut bytes, &rows)?;
    super::io::write_atomic(out, &bytes)?;
    Ok(rows.len())
}
