//! CSV and JSON writers for the estimator and profile tables.
//!
//! Floats use Rust's shortest round-trip formatting, so identical values
//! always produce identical bytes. Missing values are empty CSV fields and
//! JSON `null`.

use std::{fmt::Write as _, path::Path};

use crate::{
    config::Format,
    error::{CliError, Result},
    runner::{EstimateRow, ProfileRow},
};

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn estimates_csv(rows: &[EstimateRow]) -> String {
    let mut s = String::from("time,site_or_bond,quantity,mean,variance,stderr,n_samples\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.time,
            opt(r.site_or_bond),
            r.quantity,
            r.mean,
            opt(r.variance),
            opt(r.stderr),
            r.n_samples
        );
    }
    s
}

pub fn profiles_csv(rows: &[ProfileRow]) -> String {
    let mut s = String::from("time,bond,entropy_pre,entropy_post,chi_pre\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.time, r.bond, r.entropy_pre, opt(r.entropy_post), r.chi_pre);
    }
    s
}

fn render<T: serde::Serialize>(rows: &[T], format: Format, csv: impl Fn(&[T]) -> String) -> Result<String> {
    match format {
        Format::Csv => Ok(csv(rows)),
        Format::Json => serde_json::to_string_pretty(rows)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Config(format!("cannot serialize output: {e}"))),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_estimates(path: &Path, format: Format, rows: &[EstimateRow]) -> Result<()> {
    write(path, &render(rows, format, estimates_csv)?)
}

pub fn write_profiles(path: &Path, format: Format, rows: &[ProfileRow]) -> Result<()> {
    write(path, &render(rows, format, profiles_csv)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = [EstimateRow {
            time: 2.0,
            site_or_bond: None,
            quantity: "peak_chi".into(),
            mean: 4.5,
            variance: None,
            stderr: None,
            n_samples: 1,
        }];
        assert_eq!(estimates_csv(&rows), "time,site_or_bond,quantity,mean,variance,stderr,n_samples\n2,,peak_chi,4.5,,,1\n");
        let json = render(&rows, Format::Json, estimates_csv).unwrap();
        assert!(json.contains("\"variance\": null"));
    }
}
