//! Central finite-difference verification of analytic gradients.

use std::fmt;

use crate::param::{Module, Parameter};
use crate::rng::SplitMix64;

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-5;

/// Gradient entries smaller than this are compared in absolute terms.
pub const DEFAULT_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub step: f64,
    pub tol: f64,
    pub floor: f64,
    /// Check at most this many coordinates, chosen with `seed`.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: DEFAULT_STEP,
            tol: DEFAULT_TOL,
            floor: DEFAULT_FLOOR,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    /// Set when a non-finite value was produced.
    pub failure: Option<String>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.max_rel_error <= self.tol
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<28} coords={:<5} max_rel_err={:.3e} (tol {:.0e})",
            self.name, self.checked, self.max_rel_error, self.tol
        )?;
        if let Some(msg) = &self.failure {
            write!(f, " [{msg}]")?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

impl GradCheck {
    /// Compares `analytic` (the gradient of `f` at `x0`) with
    /// `(f(x+h) - f(x-h)) / 2h` coordinate by coordinate.
    pub fn run(
        &self,
        name: &str,
        x0: &[f64],
        analytic: &[f64],
        f: impl FnMut(&[f64]) -> f64,
    ) -> GradCheckReport {
        self.run_range(name, x0, analytic, 0..x0.len(), f)
    }

    /// Like [`GradCheck::run`], restricted to coordinates in `range`.
    pub fn run_range(
        &self,
        name: &str,
        x0: &[f64],
        analytic: &[f64],
        range: std::ops::Range<usize>,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> GradCheckReport {
        assert_eq!(x0.len(), analytic.len(), "gradient length");
        assert!(range.end <= x0.len(), "coordinate range");
        let mut report = GradCheckReport {
            name: name.to_string(),
            checked: 0,
            max_rel_error: 0.0,
            worst: None,
            failure: None,
            tol: self.tol,
        };
        let mut coords: Vec<usize> = range.collect();
        if let Some(limit) = self.max_coords {
            if limit < coords.len() {
                let mut rng = SplitMix64::new(self.seed);
                rng.shuffle(&mut coords);
                coords.truncate(limit);
                coords.sort_unstable();
            }
        }
        let mut x = x0.to_vec();
        for &i in &coords {
            if !analytic[i].is_finite() {
                report.failure = Some(format!("non-finite analytic gradient at coordinate {i}"));
                return report;
            }
            let orig = x[i];
            x[i] = orig + self.step;
            let fp = f(&x);
            x[i] = orig - self.step;
            let fm = f(&x);
            x[i] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                report.failure = Some(format!("non-finite loss perturbing coordinate {i}"));
                return report;
            }
            let numeric = (fp - fm) / (2.0 * self.step);
            let err = relative_error(analytic[i], numeric, self.floor);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some(i);
            }
        }
        report
    }
}

/// All parameter values of `m`, in visit order.
pub fn flatten_values<M: Module + ?Sized>(m: &M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit(&mut |p: &Parameter| out.extend_from_slice(p.value.data()));
    out
}

pub fn flatten_grads<M: Module + ?Sized>(m: &M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit(&mut |p: &Parameter| out.extend_from_slice(p.grad.data()));
    out
}

/// Overwrites all parameter values of `m` from `flat` (visit order).
pub fn load_values<M: Module + ?Sized>(m: &mut M, flat: &[f64]) {
    let mut offset = 0;
    m.visit_mut(&mut |p: &mut Parameter| {
        let n = p.value.len();
        p.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    });
    assert_eq!(offset, flat.len(), "flat parameter length");
}
