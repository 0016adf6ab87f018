//! Trajectories of cumulant reports and their CSV form.
//!
//! Columns, in order: `time`; per component `c`: `mean_c`, `var_c`,
//! `k3_c`..`k6_c`, `kurt_c`; for two components the joint cumulants
//! `k_i_j` (`i, j >= 1`, `i + j <= 6`); `eps_mean_c`, `eps_var_c` when a
//! reference is attached; `gram_condition` when recorded. Numbers carry 17
//! significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::driver::DgpcRun;
use crate::error::{DgpcError, Result};
use crate::oracles::McTrajectory;
use crate::stats::{relative_errors, summarize_errors, CumulantReport, ErrorSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub reports: Vec<CumulantReport>,
    pub gram_condition: Option<Vec<f64>>,
    /// `ε_mean`, `ε_var` per component and time.
    pub errors: Option<Errors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Errors {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

/// Joint-cumulant columns for a pair, by total order then descending `i`.
pub fn cross_indices() -> Vec<(usize, usize)> {
    (2..=6).flat_map(|t| (1..t).rev().map(move |i| (i, t - i))).collect()
}

impl Trajectory {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            reports: Vec::new(),
            gram_condition: None,
            errors: None,
        }
    }

    pub fn from_run(run: &DgpcRun) -> Self {
        Self {
            names: run.names.clone(),
            reports: run.trajectory.iter().map(|p| p.cumulants.clone()).collect(),
            gram_condition: Some(run.trajectory.iter().map(|p| p.gram_condition).collect()),
            errors: None,
        }
    }

    pub fn from_mc(mc: &McTrajectory) -> Self {
        Self {
            names: mc.names.clone(),
            reports: mc.points.iter().map(|p| p.cumulants.clone()).collect(),
            gram_condition: None,
            errors: None,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.time).collect()
    }

    pub fn means(&self, i: usize) -> Vec<f64> {
        self.reports.iter().map(|r| r.mean(i)).collect()
    }

    pub fn variances(&self, i: usize) -> Vec<f64> {
        self.reports.iter().map(|r| r.variance(i)).collect()
    }

    /// Attach ε columns against `(mean, var)` per time and component.
    pub fn attach_reference(&mut self, reference: &[Vec<(f64, f64)>]) -> Result<()> {
        if reference.len() != self.reports.len() {
            return Err(DgpcError::InvalidArgument(format!(
                "reference has {} rows, trajectory {}",
                reference.len(),
                self.reports.len()
            )));
        }
        let d = self.names.len();
        let column = |i: usize, pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
            reference.iter().map(|row| row.get(i).map_or(f64::NAN, pick)).collect()
        };
        self.errors = Some(Errors {
            mean: (0..d).map(|i| relative_errors(&self.means(i), &column(i, |p| p.0))).collect(),
            var: (0..d).map(|i| relative_errors(&self.variances(i), &column(i, |p| p.1))).collect(),
        });
        Ok(())
    }

    /// Attach ε columns against another trajectory sampled at the same times.
    pub fn compare_with(&mut self, reference: &Trajectory) -> Result<()> {
        if reference.names != self.names {
            return Err(DgpcError::InvalidArgument(format!(
                "components differ: {:?} vs {:?}",
                self.names, reference.names
            )));
        }
        let aligned = self.times().len() == reference.reports.len()
            && self
                .reports
                .iter()
                .zip(&reference.reports)
                .all(|(a, b)| (a.time - b.time).abs() <= 1e-9 * a.time.abs().max(1.0));
        if !aligned {
            return Err(DgpcError::InvalidArgument("trajectories are not on a common time grid".into()));
        }
        let rows: Vec<Vec<(f64, f64)>> = reference
            .reports
            .iter()
            .map(|r| (0..self.names.len()).map(|i| (r.mean(i), r.variance(i))).collect())
            .collect();
        self.attach_reference(&rows)
    }

    /// Summary of `ε_var` of component `i`, NaN-flagged points excluded.
    pub fn var_error_summary(&self, i: usize) -> Option<ErrorSummary> {
        self.errors.as_ref().map(|e| summarize_errors(&e.var[i]))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        for c in &self.names {
            h.push(format!("mean_{c}"));
            h.push(format!("var_{c}"));
            for n in 3..=6 {
                h.push(format!("k{n}_{c}"));
            }
            h.push(format!("kurt_{c}"));
        }
        if self.names.len() == 2 {
            h.extend(cross_indices().into_iter().map(|(i, j)| format!("k_{i}_{j}")));
        }
        if self.errors.is_some() {
            for c in &self.names {
                h.push(format!("eps_mean_{c}"));
                h.push(format!("eps_var_{c}"));
            }
        }
        if self.gram_condition.is_some() {
            h.push("gram_condition".into());
        }
        h
    }

    fn row(&self, t: usize) -> Vec<f64> {
        let r = &self.reports[t];
        let mut row = vec![r.time];
        for i in 0..self.names.len() {
            row.push(r.mean(i));
            row.push(r.variance(i));
            row.extend((3..=6).map(|n| r.kappa(i, n)));
            row.push(r.kurtosis_excess(i));
        }
        if self.names.len() == 2 {
            row.extend(
                cross_indices()
                    .into_iter()
                    .map(|(i, j)| r.cross.as_ref().and_then(|c| c.get(i, j)).unwrap_or(f64::NAN)),
            );
        }
        if let Some(e) = &self.errors {
            for i in 0..self.names.len() {
                row.push(e.mean[i][t]);
                row.push(e.var[i][t]);
            }
        }
        if let Some(g) = &self.gram_condition {
            row.push(g[t]);
        }
        row
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        for t in 0..self.reports.len() {
            let cells: Vec<String> = self.row(t).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Write a trajectory to `path`, creating parent directories.
pub fn emit_csv(trajectory: &Trajectory, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    trajectory.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(time: f64, var: f64) -> CumulantReport {
        CumulantReport {
            time,
            univariate: vec![vec![1.0, var, 0.0, 0.0, 0.0, 0.0]],
            cross: None,
        }
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let t = Trajectory::new(vec!["v".into()]);
        assert_eq!(t.to_csv_string(), "time,mean_v,var_v,k3_v,k4_v,k5_v,k6_v,kurt_v\n");
    }

    #[test]
    fn pair_has_cross_columns() {
        let t = Trajectory::new(vec!["u".into(), "v".into()]);
        let h = t.header();
        assert_eq!(h.len(), 1 + 2 * 7 + 15);
        assert_eq!(h[15], "k_1_1");
        assert_eq!(h.last().unwrap(), "k_1_5");
    }

    #[test]
    fn error_columns_are_relative() {
        let mut t = Trajectory::new(vec!["v".into()]);
        t.reports = vec![report(0.0, 0.5), report(1.0, 0.55)];
        t.attach_reference(&[vec![(1.0, 0.5)], vec![(1.01, 0.5)]]).unwrap();
        let e = t.errors.as_ref().unwrap();
        assert_eq!(e.var[0][0], 0.0);
        assert!((e.var[0][1] - 0.1).abs() < 1e-12);
        assert!((e.mean[0][1] - 0.01 / 1.01).abs() < 1e-12);
        let csv = t.to_csv_string();
        assert!(csv.lines().next().unwrap().ends_with("eps_mean_v,eps_var_v"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn seventeen_significant_digits() {
        let mut t = Trajectory::new(vec!["v".into()]);
        t.reports = vec![report(0.1, 1.0 / 3.0)];
        let csv = t.to_csv_string();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[2], "3.3333333333333331e-1");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn misaligned_reference_is_rejected() {
        let mut a = Trajectory::new(vec!["v".into()]);
        a.reports = vec![report(0.0, 1.0)];
        let mut b = a.clone();
        b.reports[0].time = 0.5;
        assert!(a.compare_with(&b).is_err());
    }
}
