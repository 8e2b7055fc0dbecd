//! Bures distance between probe states, one-sided statistical speeds, the
//! Fisher information they imply, and sensitivity profiles along the four
//! axes of the parameter plane.

use std::f64::consts::SQRT_2;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_generator, evolve, steady_state, SpinDistribution, N_STATES};
use crate::error::{Error, Result};
use crate::rates::{
    compute_rates, default_cross_sections, CloudGeometry, CrossSectionTable, TransitionRates,
    DEFAULT_SIGMA_M2,
};
use crate::units::{BTPoint, EnergyPoint, PhysicalConstants};

/// Populations below this are treated as exactly empty inside the Bures
/// sum, so roundoff dust cannot leak negative values under the square root.
const POPULATION_FLOOR: f64 = 1e-15;

/// Default relative parameter step for speed estimates.
pub const DEFAULT_DELTA_REL: f64 = 1e-3;

/// Everything needed to evaluate the probe at a bath condition: constants,
/// cross sections, cloud geometry, and the prepared state used for
/// finite-time probing.
#[derive(Debug, Clone)]
pub struct ProbeModel {
    pub constants: PhysicalConstants,
    pub cross_sections: CrossSectionTable,
    pub cloud: CloudGeometry,
    pub initial_state: SpinDistribution,
}

impl Default for ProbeModel {
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::default(),
            cross_sections: default_cross_sections(DEFAULT_SIGMA_M2)
                .expect("default scale is positive"),
            cloud: CloudGeometry::default(),
            initial_state: SpinDistribution::initial_probe_state(),
        }
    }
}

impl ProbeModel {
    pub fn rates_at(&self, point: BTPoint) -> Result<TransitionRates> {
        compute_rates(&self.constants, &self.cross_sections, point, &self.cloud)
    }

    /// Probe state at a bath condition: the stationary distribution, or the
    /// state reached from `initial_state` after `at_time` seconds.
    pub fn state_at(&self, point: BTPoint, at_time: Option<f64>) -> Result<SpinDistribution> {
        let rates = self.rates_at(point)?;
        match at_time {
            None => steady_state(&rates),
            Some(t) => {
                let g = build_generator(&rates)?;
                Ok(evolve(&self.initial_state, &g, t)?.distribution)
            }
        }
    }
}

/// One scan direction in the parameter plane: each axis holds one member of
/// its coordinate pair fixed and varies the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Fixed temperature, field varies (magnetometry).
    ConstTVaryB,
    /// Fixed field, temperature varies (thermometry).
    ConstBVaryT,
    /// Fixed energy ratio, total energy varies (calorimetry).
    ConstRatioVaryEtot,
    /// Fixed total energy, energy ratio varies (energy balance).
    ConstEtotVaryRatio,
}

impl Axis {
    pub const ALL: [Axis; 4] = [
        Axis::ConstTVaryB,
        Axis::ConstBVaryT,
        Axis::ConstRatioVaryEtot,
        Axis::ConstEtotVaryRatio,
    ];

    /// The scanned parameter's value at a reference condition.
    pub fn theta_ref(&self, c: &PhysicalConstants, point: BTPoint) -> Result<f64> {
        Ok(match self {
            Axis::ConstTVaryB => point.b_field,
            Axis::ConstBVaryT => point.temperature,
            Axis::ConstRatioVaryEtot => c.to_energy_point(point)?.e_total,
            Axis::ConstEtotVaryRatio => c.to_energy_point(point)?.e_ratio,
        })
    }

    /// The bath condition reached by changing the scanned parameter by the
    /// signed relative amount `rel`, holding the axis partner fixed.
    pub fn stepped(&self, c: &PhysicalConstants, point: BTPoint, rel: f64) -> Result<BTPoint> {
        let factor = 1.0 + rel;
        let stepped = match self {
            Axis::ConstTVaryB => BTPoint::new(point.b_field * factor, point.temperature),
            Axis::ConstBVaryT => BTPoint::new(point.b_field, point.temperature * factor),
            Axis::ConstRatioVaryEtot => {
                let e = c.to_energy_point(point)?;
                c.from_energy_point(EnergyPoint::new(e.e_total * factor, e.e_ratio))?
            }
            Axis::ConstEtotVaryRatio => {
                let e = c.to_energy_point(point)?;
                c.from_energy_point(EnergyPoint::new(e.e_total, e.e_ratio * factor))?
            }
        };
        if stepped.b_field <= 0.0 || stepped.temperature <= 0.0 {
            return Err(Error::Domain(format!(
                "step leaves the valid domain: B = {} gauss, T = {} K",
                stepped.b_field, stepped.temperature
            )));
        }
        Ok(stepped)
    }

    /// The bath condition at `theta` along this axis with the partner
    /// coordinate held at `fixed`.
    pub fn point_at(&self, c: &PhysicalConstants, fixed: f64, theta: f64) -> Result<BTPoint> {
        match self {
            Axis::ConstTVaryB => Ok(BTPoint::new(theta, fixed)),
            Axis::ConstBVaryT => Ok(BTPoint::new(fixed, theta)),
            Axis::ConstRatioVaryEtot => c.from_energy_point(EnergyPoint::new(theta, fixed)),
            Axis::ConstEtotVaryRatio => c.from_energy_point(EnergyPoint::new(fixed, theta)),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axis::ConstTVaryB => "const_t_vary_b",
            Axis::ConstBVaryT => "const_b_vary_t",
            Axis::ConstRatioVaryEtot => "const_ratio_vary_etot",
            Axis::ConstEtotVaryRatio => "const_etot_vary_ratio",
        };
        write!(f, "{name}")
    }
}

/// Which side of the reference the comparison state is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Negative parameter change.
    Left,
    /// Positive parameter change.
    Right,
}

impl Side {
    fn sign(&self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// Distance between two probe populations,
/// d^2 = 2 - 2 sum_m sqrt(P_m Q_m), ranging from 0 (equal) to sqrt(2)
/// (disjoint support). Inputs must be normalized to 1e-6.
///
/// Evaluated as sum_m (sqrt(P_m) - sqrt(Q_m))^2, which is the same quantity
/// without the cancellation the subtracted form suffers for nearby states.
pub fn bures_distance(p: &SpinDistribution, q: &SpinDistribution) -> Result<f64> {
    for d in [p, q] {
        let sum: f64 = d.probabilities().iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized {
                deviation: (sum - 1.0).abs(),
            });
        }
    }
    let mut dist_sq = 0.0;
    for (a, b) in p.probabilities().iter().zip(q.probabilities()) {
        let a = if *a < POPULATION_FLOOR { 0.0 } else { *a };
        let b = if *b < POPULATION_FLOOR { 0.0 } else { *b };
        let diff = a.sqrt() - b.sqrt();
        dist_sq += diff * diff;
    }
    Ok(dist_sq.sqrt())
}

/// Statistical speed from a finite parameter step: the Bures distance per
/// unit step, scaled by 1/sqrt(2) so that eight times its square is the
/// classical Fisher information sum (dP)^2 / P. With this normalization a
/// Bernoulli family at theta = 1/2 has speed 1/sqrt(2) and Fisher
/// information 4 per unit absolute theta.
pub fn speed_from_distance(distance: f64, delta: f64) -> f64 {
    distance / (SQRT_2 * delta)
}

/// One-sided sensitivity entry at a reference condition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SideSpeed {
    pub speed: f64,
    pub fisher: f64,
}

/// Both one-sided speeds along an axis, in relative parameterization:
/// speeds are per unit delta-theta / theta_ref, so values are dimensionless
/// and comparable across axes. `fisher_* = 8 speed_*^2` identically.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SensitivityResult {
    pub axis: Axis,
    pub theta_ref: f64,
    pub speed_left: f64,
    pub speed_right: f64,
    pub fisher_left: f64,
    pub fisher_right: f64,
    pub delta_used: f64,
}

impl SensitivityResult {
    pub fn sqrt_fisher(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.fisher_left.sqrt(),
            Side::Right => self.fisher_right.sqrt(),
        }
    }
}

/// The statistical speed on one side of a reference condition, per unit
/// relative change of the axis parameter. `at_time` selects finite-time
/// probing instead of the steady state.
pub fn statistical_speed(
    model: &ProbeModel,
    reference: BTPoint,
    axis: Axis,
    side: Side,
    delta_rel: f64,
    at_time: Option<f64>,
) -> Result<f64> {
    check_delta(delta_rel)?;
    let p_ref = model.state_at(reference, at_time)?;
    let stepped = axis.stepped(&model.constants, reference, side.sign() * delta_rel)?;
    let p_step = model.state_at(stepped, at_time)?;
    let d = bures_distance(&p_ref, &p_step)?;
    Ok(speed_from_distance(d, delta_rel))
}

/// Both sides at once, sharing the reference-state computation.
pub fn sensitivity_at(
    model: &ProbeModel,
    reference: BTPoint,
    axis: Axis,
    delta_rel: f64,
    at_time: Option<f64>,
) -> Result<SensitivityResult> {
    check_delta(delta_rel)?;
    let theta_ref = axis.theta_ref(&model.constants, reference)?;
    let p_ref = model.state_at(reference, at_time)?;
    let mut speeds = [0.0; 2];
    for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let stepped = axis.stepped(&model.constants, reference, side.sign() * delta_rel)?;
        let p_step = model.state_at(stepped, at_time)?;
        speeds[i] = speed_from_distance(bures_distance(&p_ref, &p_step)?, delta_rel);
    }
    Ok(SensitivityResult {
        axis,
        theta_ref,
        speed_left: speeds[0],
        speed_right: speeds[1],
        fisher_left: 8.0 * speeds[0] * speeds[0],
        fisher_right: 8.0 * speeds[1] * speeds[1],
        delta_used: delta_rel,
    })
}

fn check_delta(delta_rel: f64) -> Result<()> {
    if !delta_rel.is_finite() || delta_rel <= 0.0 || delta_rel > 0.1 {
        return Err(Error::Domain(format!(
            "delta_rel must lie in (0, 0.1], got {delta_rel}"
        )));
    }
    Ok(())
}

/// Classical Fisher information from a population derivative:
/// sum_m (dp_m)^2 / p_m. The derivative must sum to zero and may only be
/// nonzero where the population is.
pub fn fisher_direct(p: &SpinDistribution, dp: &[f64; N_STATES]) -> Result<f64> {
    let scale: f64 = dp.iter().map(|v| v.abs()).sum();
    let balance: f64 = dp.iter().sum();
    if balance.abs() > 1e-9 * scale.max(1e-300) {
        return Err(Error::Domain(format!(
            "population derivative must sum to zero, got {balance:.3e}"
        )));
    }
    let mut f = 0.0;
    for (pm, dm) in p.probabilities().iter().zip(dp) {
        if *dm == 0.0 {
            continue;
        }
        if *pm <= 0.0 {
            return Err(Error::Domain(
                "nonzero derivative on an empty sub-state".into(),
            ));
        }
        f += dm * dm / pm;
    }
    Ok(f)
}

/// One grid point of a sensitivity profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfilePoint {
    pub theta: f64,
    pub sqrt_fisher_left: f64,
    pub sqrt_fisher_right: f64,
}

/// sqrt(Fisher) for both sides along one axis, with the partner coordinate
/// pinned at `fixed` and the scanned parameter running over `theta_grid`.
/// Grid points are evaluated in parallel; the output order follows the
/// grid.
pub fn sensitivity_profile(
    model: &ProbeModel,
    axis: Axis,
    fixed: f64,
    theta_grid: &[f64],
    delta_rel: f64,
    at_time: Option<f64>,
) -> Result<Vec<ProfilePoint>> {
    check_delta(delta_rel)?;
    theta_grid
        .par_iter()
        .map(|&theta| {
            let point = axis.point_at(&model.constants, fixed, theta)?;
            let r = sensitivity_at(model, point, axis, delta_rel, at_time)?;
            Ok(ProfilePoint {
                theta,
                sqrt_fisher_left: r.fisher_left.sqrt(),
                sqrt_fisher_right: r.fisher_right.sqrt(),
            })
        })
        .collect()
}
