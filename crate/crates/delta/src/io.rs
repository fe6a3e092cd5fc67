use crate::error::{DeltaError, Result};
use crate::report::DeltaReport;
use std::io::Write;
use std::path::Path;

/// Point cloud CSV: one point per row, comma-separated coordinates, no header.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DeltaError::Shape(format!("reading {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            DeltaError::Shape(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if let Some(first) = points.first() {
            let _: &Vec<f64> = first;
            if row.len() != first.len() {
                return Err(DeltaError::Shape(format!(
                    "{}:{}: ragged row ({} vs {})",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        points.push(row);
    }
    Ok(points)
}

pub fn write_points_csv(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| DeltaError::Shape(format!("writing {}: {e}", path.display())))
}

pub fn write_report_json(path: &Path, report: &DeltaReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| DeltaError::Shape(format!("serializing report: {e}")))?;
    std::fs::write(path, json)
        .map_err(|e| DeltaError::Shape(format!("writing {}: {e}", path.display())))
}

/// Histogram CSV rows `bin_left,count` for external plotting.
pub fn write_histogram_csv(path: &Path, hist: &[(f64, usize)]) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| DeltaError::Shape(format!("creating {}: {e}", path.display())))?;
    writeln!(f, "bin_left,count").map_err(|e| DeltaError::Shape(e.to_string()))?;
    for (left, count) in hist {
        writeln!(f, "{left},{count}").map_err(|e| DeltaError::Shape(e.to_string()))?;
    }
    Ok(())
}
