//! CSV files written by the experiments.
//!
//! Every file opens with one comment line, `# batt-csv v1 <schema>`, followed
//! by an ordinary CSV header. Readers should skip lines starting with `#`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;

pub type CsvWriter = csv::Writer<BufWriter<File>>;

/// Creates `dir/name` with the version line and `header`.
pub fn create(dir: &Path, name: &str, schema: &str, header: &[&str]) -> Result<CsvWriter> {
    std::fs::create_dir_all(dir)?;
    let mut file = BufWriter::new(File::create(dir.join(name))?);
    writeln!(file, "# batt-csv v{FORMAT_VERSION} {schema}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    Ok(w)
}

/// Shortest round-tripping text for a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two
/// values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One `mean, stddev` line of an experiment summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Searcher or policy name.
    pub group: String,
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
}

impl SummaryRow {
    pub fn from_values(group: &str, metric: &str, values: &[f64]) -> Self {
        let (mean, stddev) = mean_std(values);
        Self {
            group: group.into(),
            metric: metric.into(),
            mean,
            stddev,
        }
    }
}

pub fn write_summary(dir: &Path, name: &str, schema: &str, rows: &[SummaryRow]) -> Result<()> {
    let mut w = create(dir, name, schema, &["group", "metric", "mean", "stddev"])?;
    for r in rows {
        w.write_record([&r.group, &r.metric, &num(r.mean), &num(r.stddev)])?;
    }
    w.flush()?;
    Ok(())
}
