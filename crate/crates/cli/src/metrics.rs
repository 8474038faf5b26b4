use std::fs::File;
use std::path::Path;

use anyhow::Result;
use podpo_core::trainer::MetricsRow;

pub const HEADER: [&str; 14] = [
    "iteration",
    "mean_episode_return",
    "frac_positive",
    "loss_drift",
    "loss_value",
    "loss_surrogate",
    "rv_total",
    "ess_ratio_t1",
    "ess_ratio_t2",
    "ess_ratio_t3",
    "max_p_t1",
    "max_p_t2",
    "max_p_t3",
    "wall_ms",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV cells for one row; inapplicable columns are empty.
pub fn record(row: &MetricsRow) -> Vec<String> {
    let mut out = vec![
        row.iteration.to_string(),
        row.mean_episode_return.to_string(),
        row.frac_positive.to_string(),
        cell(row.loss_drift),
        row.loss_value.to_string(),
        cell(row.loss_surrogate),
        cell(row.rv_total),
    ];
    for series in [&row.ess_ratio, &row.max_p] {
        out.extend((0..3).map(|i| cell(series.get(i).copied())));
    }
    out.push(cell(row.wall_ms));
    out
}

/// Append-only metrics file, flushed after every row.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.write_record(record(row))?;
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn podpo_row_leaves_surrogate_empty() {
        let row = MetricsRow {
            iteration: 3,
            mean_episode_return: 0.5,
            frac_positive: 0.25,
            loss_drift: Some(1e-3),
            loss_value: 2.0,
            loss_surrogate: None,
            rv_total: Some(0.75),
            ess_ratio: vec![0.1, 0.5, 0.9],
            max_p: vec![0.9, 0.5, 0.2],
            wall_ms: None,
        };
        assert_eq!(
            record(&row).join(","),
            "3,0.5,0.25,0.001,2,,0.75,0.1,0.5,0.9,0.9,0.5,0.2,"
        );
    }

    #[test]
    fn baseline_row_and_single_temperature() {
        let row = MetricsRow {
            iteration: 0,
            mean_episode_return: -1.5,
            frac_positive: 0.5,
            loss_drift: None,
            loss_value: 0.0,
            loss_surrogate: Some(-0.1),
            rv_total: None,
            ess_ratio: vec![0.3],
            max_p: vec![0.6],
            wall_ms: Some(12.0),
        };
        assert_eq!(record(&row).join(","), "0,-1.5,0.5,,0,-0.1,,0.3,,,0.6,,,12");
    }

    #[test]
    fn header_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        MetricsWriter::create(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(p).unwrap(),
            format!("{}\n", HEADER.join(","))
        );
    }
}
