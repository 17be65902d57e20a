//! Plot-data emission: plain CSV series consumable by any plotting tool.
//! Headers are always written, so an empty ensemble produces headers-only
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::estimators::Estimate;
use crate::Real;

use super::ensemble::EnsembleReport;

/// Writes space_structure.csv, time_structure.csv, boundary_decay.csv and
/// exponent_hist.csv into `out`.
pub fn emit_plot_data(report: &EnsembleReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;

    let mut space = String::from("path_index,lag,value\n");
    let mut time = String::from("path_index,lag,value\n");
    for p in &report.paths {
        for (h, v) in &p.space_curve {
            let _ = writeln!(space, "{},{h},{v}", p.path_index);
        }
        for (h, v) in &p.time_curve {
            let _ = writeln!(time, "{},{h},{v}", p.path_index);
        }
    }
    fs::write(out.join("space_structure.csv"), space)?;
    fs::write(out.join("time_structure.csv"), time)?;

    let mut boundary = String::from("path_index,side,rho,sup_abs_u\n");
    for p in &report.paths {
        for (rho, m) in &p.boundary_left {
            let _ = writeln!(boundary, "{},left,{rho},{m}", p.path_index);
        }
        for (rho, m) in &p.boundary_right {
            let _ = writeln!(boundary, "{},right,{rho},{m}", p.path_index);
        }
    }
    fs::write(out.join("boundary_decay.csv"), boundary)?;

    let mut hist = String::from("quantity,bin_lo,bin_hi,count\n");
    for (name, pick) in [
        (
            "space_exponent",
            Box::new(|r: &crate::estimators::HolderReport<Real>| r.space_exponent)
                as Box<dyn Fn(&crate::estimators::HolderReport<Real>) -> Option<Estimate<Real>>>,
        ),
        ("time_exponent", Box::new(|r| r.time_exponent)),
        ("boundary_slope", Box::new(|r| r.boundary_slope)),
    ] {
        let values: Vec<Real> = report
            .paths
            .iter()
            .filter(|p| !p.diverged)
            .filter_map(|p| p.report.as_ref())
            .filter_map(|r| pick(r).map(|e| e.value))
            .collect();
        for (lo, hi, count) in histogram(&values, 16) {
            let _ = writeln!(hist, "{name},{lo},{hi},{count}");
        }
    }
    fs::write(out.join("exponent_hist.csv"), hist)?;
    Ok(())
}

fn histogram(values: &[Real], bins: usize) -> Vec<(Real, Real, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(Real::INFINITY, Real::min);
    let hi = values.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Vec::new();
    }
    let span = (hi - lo).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let mut b = ((v - lo) / span * bins as Real) as usize;
        if b >= bins {
            b = bins - 1;
        }
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            (
                lo + span * i as Real / bins as Real,
                lo + span * (i + 1) as Real / bins as Real,
                c,
            )
        })
        .collect()
}
