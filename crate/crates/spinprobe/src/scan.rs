//! Parameter-space scanning: grids of sensitivities over the field and
//! temperature plane, location of the sensitivity maxima along the
//! constant-total-energy axis against the inflection structure of the
//! endoergic fraction, and grouping of bath conditions into total-energy
//! bands.

use rayon::prelude::*;
use serde::Serialize;

use crate::endo::{fraction_derivatives, fraction_of_ratio, refined_argmax};
use crate::error::{Error, Result};
use crate::sensitivity::{sensitivity_at, Axis, ProbeModel, SensitivityResult, Side};
use crate::units::BTPoint;

/// Fields below 10 mG are outside experimental control in this apparatus;
/// maxima found there are reported but flagged.
pub const EXPERIMENTAL_B_MIN_GAUSS: f64 = 0.010;

/// Default relative width of a total-energy band.
pub const DEFAULT_BAND_TOLERANCE: f64 = 0.25;

/// One cell of a field-temperature scan: the four axis sensitivities, or a
/// per-axis failure note. A failing cell never aborts the scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanCell {
    pub b_field: f64,
    pub temperature: f64,
    pub axis: Axis,
    pub result: std::result::Result<SensitivityResult, String>,
}

/// Evaluates all four axes on the grid product `b_grid` x `t_grid`
/// (each at least 10 points; duplicates are removed). Cells are evaluated
/// in parallel; output order is row-major in (B, T, axis).
pub fn scan_bt_grid(
    model: &ProbeModel,
    b_grid: &[f64],
    t_grid: &[f64],
    delta_rel: f64,
    at_time: Option<f64>,
) -> Result<Vec<ScanCell>> {
    if b_grid.len() < 10 || t_grid.len() < 10 {
        return Err(Error::Domain(format!(
            "scan grids need at least 10 points each, got {} x {}",
            b_grid.len(),
            t_grid.len()
        )));
    }
    let b_grid = dedup_sorted(b_grid);
    let t_grid = dedup_sorted(t_grid);
    let mut tasks = Vec::with_capacity(b_grid.len() * t_grid.len() * 4);
    for &b in &b_grid {
        for &t in &t_grid {
            for axis in Axis::ALL {
                tasks.push((b, t, axis));
            }
        }
    }
    Ok(tasks
        .into_par_iter()
        .map(|(b, t, axis)| {
            let result = sensitivity_at(model, BTPoint::new(b, t), axis, delta_rel, at_time)
                .map_err(|e| e.to_string().replace(',', ";"));
            ScanCell {
                b_field: b,
                temperature: t,
                axis,
                result,
            }
        })
        .collect())
}

fn dedup_sorted(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Positions of the one-sided sensitivity maxima along the
/// constant-total-energy axis, compared against the maxima of the first and
/// second derivatives of the endoergic fraction over the same ratio grid.
#[derive(Debug, Clone, Serialize)]
pub struct MaximaReport {
    /// Total energy of the scanned axis (kelvin equivalents).
    pub e_tot: f64,
    /// Energy ratio at the left-side and right-side sensitivity maxima.
    pub ratio_at_left_max: f64,
    pub ratio_at_right_max: f64,
    /// Energy ratio at the maxima of the fraction's first and second
    /// derivatives.
    pub ratio_at_d1_max: f64,
    pub ratio_at_d2_max: f64,
    /// Endoergic fraction at the sensitivity maxima.
    pub fraction_at_left_max: f64,
    pub fraction_at_right_max: f64,
    /// |ratio_at_left_max - ratio_at_d1_max| and
    /// |ratio_at_right_max - ratio_at_d2_max|.
    pub deviation_left: f64,
    pub deviation_right: f64,
    /// False when the corresponding maximum sits on a grid boundary.
    pub left_interior: bool,
    pub right_interior: bool,
}

/// Scans the constant-total-energy axis over `ratio_grid` (at least 200
/// points spanning [0.1, 2.0]) and reports where each side's sqrt(Fisher)
/// peaks, refined by a three-point parabola.
pub fn locate_maxima(
    model: &ProbeModel,
    e_tot: f64,
    ratio_grid: &[f64],
    delta_rel: f64,
    at_time: Option<f64>,
) -> Result<MaximaReport> {
    if ratio_grid.len() < 200 {
        return Err(Error::Domain(format!(
            "ratio grid needs at least 200 points, got {}",
            ratio_grid.len()
        )));
    }
    if ratio_grid[0] > 0.1 + 1e-12 || ratio_grid[ratio_grid.len() - 1] < 2.0 - 1e-12 {
        return Err(Error::Domain(format!(
            "ratio grid must span at least [0.1, 2.0], got [{}, {}]",
            ratio_grid[0],
            ratio_grid[ratio_grid.len() - 1]
        )));
    }
    let profile = crate::sensitivity::sensitivity_profile(
        model,
        Axis::ConstEtotVaryRatio,
        e_tot,
        ratio_grid,
        delta_rel,
        at_time,
    )?;
    let left: Vec<f64> = profile.iter().map(|p| p.sqrt_fisher_left).collect();
    let right: Vec<f64> = profile.iter().map(|p| p.sqrt_fisher_right).collect();
    let (ratio_at_left_max, left_interior) = grid_maximum(ratio_grid, &left);
    let (ratio_at_right_max, right_interior) = grid_maximum(ratio_grid, &right);

    let derivs = fraction_derivatives(ratio_grid)?;

    Ok(MaximaReport {
        e_tot,
        ratio_at_left_max,
        ratio_at_right_max,
        ratio_at_d1_max: derivs.argmax_first,
        ratio_at_d2_max: derivs.argmax_second,
        fraction_at_left_max: fraction_of_ratio(ratio_at_left_max)?,
        fraction_at_right_max: fraction_of_ratio(ratio_at_right_max)?,
        deviation_left: (ratio_at_left_max - derivs.argmax_first).abs(),
        deviation_right: (ratio_at_right_max - derivs.argmax_second).abs(),
        left_interior,
        right_interior,
    })
}

fn grid_maximum(grid: &[f64], values: &[f64]) -> (f64, bool) {
    let i = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let interior = i > 0 && i + 1 < grid.len();
    (refined_argmax(grid, values), interior)
}

/// The maximum of a one-sided profile, flagged when it falls at a field
/// below experimental control on the fixed-temperature axis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileMaximum {
    pub theta: f64,
    pub value: f64,
    pub interior: bool,
    pub outside_experimental_control: bool,
}

/// Finds the maximum of one side of an axis profile already evaluated on
/// `theta_grid`.
pub fn locate_profile_maximum(
    axis: Axis,
    theta_grid: &[f64],
    profile: &[crate::sensitivity::ProfilePoint],
    side: Side,
) -> ProfileMaximum {
    let values: Vec<f64> = profile
        .iter()
        .map(|p| match side {
            Side::Left => p.sqrt_fisher_left,
            Side::Right => p.sqrt_fisher_right,
        })
        .collect();
    let (theta, interior) = grid_maximum(theta_grid, &values);
    let value = values.iter().copied().fold(0.0, f64::max);
    ProfileMaximum {
        theta,
        value,
        interior,
        outside_experimental_control: axis == Axis::ConstTVaryB && theta < EXPERIMENTAL_B_MIN_GAUSS,
    }
}

/// Assignment of bath conditions to pre-defined total-energy bands.
/// A point belongs to every band whose center lies within the relative
/// `tolerance`, so a point may sit in zero, one, or several bands.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyBandGrouping {
    /// Band centers (kelvin equivalents).
    pub band_centers: Vec<f64>,
    /// Band indices per input point, in input order.
    pub assignments: Vec<Vec<usize>>,
    pub tolerance: f64,
    /// Mean of |E - center| / center over all (point, band) assignments;
    /// absent when nothing was assigned.
    pub average_relative_deviation: Option<f64>,
}

pub fn group_by_total_energy(
    model: &ProbeModel,
    points: &[BTPoint],
    band_centers: &[f64],
    tolerance: f64,
) -> Result<EnergyBandGrouping> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::Domain(format!(
            "band tolerance must lie in (0, 1), got {tolerance}"
        )));
    }
    if band_centers.iter().any(|&c| !c.is_finite() || c <= 0.0) {
        return Err(Error::Domain("band centers must be > 0".into()));
    }
    let mut assignments = Vec::with_capacity(points.len());
    let mut deviations = Vec::new();
    for point in points {
        let e_tot = model.constants.to_energy_point(*point)?.e_total;
        let mut bands = Vec::new();
        for (i, &center) in band_centers.iter().enumerate() {
            let rel = (e_tot - center).abs() / center;
            if rel < tolerance {
                bands.push(i);
                deviations.push(rel);
            }
        }
        assignments.push(bands);
    }
    let average_relative_deviation = if deviations.is_empty() {
        None
    } else {
        Some(deviations.iter().sum::<f64>() / deviations.len() as f64)
    };
    Ok(EnergyBandGrouping {
        band_centers: band_centers.to_vec(),
        assignments,
        tolerance,
        average_relative_deviation,
    })
}
