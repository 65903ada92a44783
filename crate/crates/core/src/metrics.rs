//! Training metrics rows and their CSV file.

use std::fs::OpenOptions;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// Blank for methods without a discriminator.
    pub disc_loss: Option<f64>,
    /// Blank for methods without a critic.
    pub critic_loss: Option<f64>,
    pub policy_loss: f64,
    pub segmentation_accuracy: Option<f64>,
    pub occupancy: Vec<f64>,
}

impl MetricsRow {
    pub fn header(k: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "iteration",
            "mean_return",
            "std_return",
            "disc_loss",
            "critic_loss",
            "policy_loss",
            "segmentation_accuracy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((0..k).map(|c| format!("occupancy_{c}")));
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.iteration.to_string(),
            self.mean_return.to_string(),
            self.std_return.to_string(),
            fmt_opt(self.disc_loss),
            fmt_opt(self.critic_loss),
            self.policy_loss.to_string(),
            fmt_opt(self.segmentation_accuracy),
        ];
        r.extend(self.occupancy.iter().map(|o| o.to_string()));
        r
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Appends rows to a metrics CSV, writing the header when the file is new or
/// empty. Iterations must keep increasing across appends.
pub fn append_csv(path: &Path, rows: &[MetricsRow], k: usize) -> Result<()> {
    let last = last_iteration(path)?;
    if let (Some(last), Some(first)) = (last, rows.first()) {
        if first.iteration <= last {
            return Err(Error::Validation(format!(
                "metrics rows must be appended in increasing iteration order ({} after {last})",
                first.iteration
            )));
        }
    }
    let fresh = last.is_none() && std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(MetricsRow::header(k))?;
    }
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn last_iteration(path: &Path) -> Result<Option<usize>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut last = None;
    for rec in rdr.records() {
        let rec = rec?;
        last = rec.get(0).and_then(|s| s.parse().ok());
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: usize) -> MetricsRow {
        MetricsRow {
            iteration,
            mean_return: 1.5,
            std_return: 0.5,
            disc_loss: Some(1.2),
            critic_loss: Some(-0.1),
            policy_loss: 2.0,
            segmentation_accuracy: None,
            occupancy: vec![0.25, 0.75],
        }
    }

    #[test]
    fn append_only_and_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        append_csv(&path, &[row(100), row(200)], 2).unwrap();
        append_csv(&path, &[row(300)], 2).unwrap();
        assert!(append_csv(&path, &[row(300)], 2).is_err());
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "iteration,mean_return,std_return,disc_loss,critic_loss,policy_loss,segmentation_accuracy,occupancy_0,occupancy_1"
        );
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "300,1.5,0.5,1.2,-0.1,2,,0.25,0.75");
    }
}
