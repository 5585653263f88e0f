//! Text report and per-figure CSV emission for a calibration report.

use std::path::{Path, PathBuf};

use probtsf_core::calib::CalibrationReport;
use probtsf_core::Histogram;

use crate::error::CliError;

fn write(path: &Path, text: String) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes `report.txt` plus the figure CSVs into `dir`; returns the paths
/// written, for the manifest.
pub fn write_report_files(dir: &Path, report: &CalibrationReport) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        write(&path, text)?;
        written.push(path);
        Ok(())
    };

    emit("report.txt", render_report(report))?;

    let mut variance = String::from("tau,variance\n");
    for (i, v) in report.variance_per_tau.iter().enumerate() {
        variance.push_str(&format!("{},{v}\n", i + 1));
    }
    emit("variance_per_tau.csv", variance)?;

    let mut kl = String::from("tau,kl\n");
    for (i, v) in report.kl_per_tau.iter().enumerate() {
        kl.push_str(&format!("{},{v}\n", i + 1));
    }
    emit("kl_per_tau.csv", kl)?;

    let mut coverage = String::from("tau,cov_1sigma,cov_2sigma,cov_3sigma\n");
    for tau in 0..report.horizon {
        coverage.push_str(&format!(
            "{},{},{},{}\n",
            tau + 1,
            report.coverage[0].per_tau[tau],
            report.coverage[1].per_tau[tau],
            report.coverage[2].per_tau[tau],
        ));
    }
    emit("coverage.csv", coverage)?;

    emit("hist_tau_first.csv", render_histogram(&report.hist_first))?;
    emit("hist_tau_mid.csv", render_histogram(&report.hist_mid))?;
    emit("hist_tau_last.csv", render_histogram(&report.hist_last))?;
    emit("hist_pooled.csv", render_histogram(&report.hist_pooled))?;

    Ok(written)
}

fn render_histogram(h: &Histogram) -> String {
    let mut out = String::from("bin_left,bin_right,count,density\n");
    for (bin, &count) in h.counts.iter().enumerate() {
        let left = h.lo + bin as f64 * h.bin_width;
        let right = left + h.bin_width;
        out.push_str(&format!("{left},{right},{count},{}\n", h.density(bin)));
    }
    out
}

/// Human-readable summary as flat `key = value` lines.
pub fn render_report(report: &CalibrationReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("n_test", report.n_test.to_string());
    kv("horizon", report.horizon.to_string());
    kv("pooled_mean", format!("{}", report.pooled_mean));
    kv("pooled_variance", format!("{}", report.pooled_variance));
    kv("pooled_kl", format!("{}", report.pooled_kl));
    if let Some(b) = report.pooled_kl_binned {
        kv("pooled_kl_binned", format!("{b}"));
    }
    let (vmin, vmax) = report
        .variance_per_tau
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    kv("variance_per_tau_min", format!("{vmin}"));
    kv("variance_per_tau_max", format!("{vmax}"));
    let klmax = report.kl_per_tau.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    kv("kl_per_tau_max", format!("{klmax}"));
    for c in &report.coverage {
        kv(&format!("coverage_{}sigma", c.k as u32), format!("{}", c.overall));
    }
    kv("mae", format!("{}", report.mae));
    if let Some(d) = report.mae_deterministic {
        kv("mae_deterministic", format!("{d}"));
    }
    kv(
        "hist_taus",
        format!("{} {} {}", report.hist_taus[0], report.hist_taus[1], report.hist_taus[2]),
    );
    out
}

/// Parses a `key = value` report back into pairs (used by tests and by the
/// comparison tooling).
pub fn parse_report(text: &str) -> std::collections::BTreeMap<String, String> {
    let mut map = std::collections::BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            map.insert(k.to_string(), v.to_string());
        }
    }
    map
}
