//! Wide-CSV dataset files: header `t,series_0,...,series_{N-1}`, one row per
//! time step, decimal-point reals.
//!
//! Values are written in the shortest decimal form that parses back to the
//! identical bits, so `read(write(x)) == x` exactly.

use std::path::Path;

use probtsf_core::Trajectory;

use crate::error::CliError;

/// Reads a wide CSV into one trajectory per series column.
pub fn read_csv_dataset(path: &Path) -> Result<Vec<Trajectory>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read dataset {}: {e}", path.display())))?;
    parse_csv(&text, &path.display().to_string())
}

pub(crate) fn parse_csv(text: &str, origin: &str) -> Result<Vec<Trajectory>, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::validation(format!("{origin}: empty dataset file")))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 2 {
        return Err(CliError::validation(format!(
            "{origin}: header must be t,series_0,... (got {header:?})"
        )));
    }
    if names[0].trim() != "t" {
        return Err(CliError::validation(format!(
            "{origin}: first header column must be 't', got {:?}",
            names[0]
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (c, name) in names.iter().enumerate().skip(1) {
        let name = name.trim();
        if name.is_empty() {
            return Err(CliError::validation(format!(
                "{origin}: empty header name in column {}",
                c + 1
            )));
        }
        if !seen.insert(name) {
            return Err(CliError::validation(format!(
                "{origin}: duplicate header {name:?}"
            )));
        }
    }
    let n_series = names.len() - 1;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_series];
    let mut n_rows = 0usize;
    for (row, line) in lines.enumerate() {
        let row_no = row + 1; // 1-based data row; header is line 1
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_series + 1 {
            return Err(CliError::validation(format!(
                "{origin}: row {row_no} has {} fields, expected {} (ragged row)",
                fields.len(),
                n_series + 1
            )));
        }
        for (c, field) in fields.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::validation(format!(
                    "{origin}: row {row_no}, column {}: {field:?} is not a number",
                    names[c].trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::validation(format!(
                    "{origin}: row {row_no}, column {}: non-finite value",
                    names[c].trim()
                )));
            }
            columns[c - 1].push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(CliError::validation(format!("{origin}: dataset has no data rows")));
    }
    Ok(columns
        .into_iter()
        .enumerate()
        .map(|(i, values)| Trajectory { id: i as u32, values })
        .collect())
}

/// Writes trajectories as a wide CSV with canonical `series_<i>` names.
pub fn write_csv_dataset(path: &Path, trajectories: &[Trajectory]) -> Result<(), CliError> {
    let text = render_csv(trajectories)?;
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write dataset {}: {e}", path.display())))
}

pub(crate) fn render_csv(trajectories: &[Trajectory]) -> Result<String, CliError> {
    if trajectories.is_empty() {
        return Err(CliError::validation("refusing to write a dataset with no series".to_string()));
    }
    let len = trajectories[0].values.len();
    for t in trajectories {
        if t.values.len() != len {
            return Err(CliError::validation(format!(
                "series {} has length {}, expected {len}",
                t.id,
                t.values.len()
            )));
        }
    }
    let mut out = String::with_capacity(trajectories.len() * len * 8);
    out.push('t');
    for i in 0..trajectories.len() {
        out.push_str(&format!(",series_{i}"));
    }
    out.push('\n');
    for row in 0..len {
        out.push_str(&format!("{}", row + 1));
        for t in trajectories {
            out.push(',');
            out.push_str(&format!("{}", t.values[row]));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let trajs = vec![
            Trajectory { id: 0, values: vec![1.0, -0.12345678912345678, 3e-300] },
            Trajectory { id: 1, values: vec![0.1 + 0.2, f64::MIN_POSITIVE, -0.0] },
        ];
        let text = render_csv(&trajs).unwrap();
        let back = parse_csv(&text, "mem").unwrap();
        assert_eq!(trajs.len(), back.len());
        for (a, b) in trajs.iter().zip(&back) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn two_series_three_steps_schema() {
        let text = "t,series_0,series_1\n1,0.5,1\n2,0.25,2\n3,0.125,3\n";
        let trajs = parse_csv(text, "mem").unwrap();
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[0].values, vec![0.5, 0.25, 0.125]);
        assert_eq!(trajs[1].values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let text = "t,series_0\n1,0.5\n2,0.25\n3,0.125\n4,1.5\n5,oops\n";
        let err = parse_csv(text, "mem").unwrap_err().to_string();
        assert!(err.contains("row 5"), "{err}");
    }

    #[test]
    fn ragged_row_is_rejected_with_location() {
        let text = "t,series_0,series_1\n1,0.5,1\n2,0.25\n";
        let err = parse_csv(text, "mem").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn duplicate_headers_are_rejected() {
        let text = "t,series_0,series_0\n1,0.5,1\n";
        let err = parse_csv(text, "mem").unwrap_err().to_string();
        assert!(err.contains("duplicate header"), "{err}");
    }
}
