//! Fraction of thermal collisions energetic enough to drive an endoergic
//! spin flip, in closed form and as a quadrature cross-check, together with
//! its derivatives along the energy-ratio axis and a four-parameter fit of
//! the same curve.

use std::f64::consts::FRAC_2_SQRT_PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::quad;
use crate::units::PhysicalConstants;

/// Relative step for the central differences behind [`fraction_derivatives`].
const DERIVATIVE_STEP: f64 = 1e-5;

/// Collision-energy integrals are truncated this many thermal units past the
/// threshold; the Boltzmann factor leaves a tail below 1e-18 relative.
const THERMAL_CUTOFF: f64 = 45.0;

/// Fraction of collisions with kinetic energy above a threshold of `a`
/// thermal units: erfc(sqrt(a)) + (2/sqrt(pi)) sqrt(a) exp(-a).
pub(crate) fn fraction_above_threshold(a: f64) -> f64 {
    let s = a.sqrt();
    libm::erfc(s) + FRAC_2_SQRT_PI * s * (-a).exp()
}

/// Fraction of collisions able to pay the Zeeman cost at field `b_gauss`
/// and temperature `t`. Decreasing in B, increasing in T; equals 1 at zero
/// field.
pub fn endo_fraction(c: &PhysicalConstants, b_gauss: f64, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {t}")));
    }
    let threshold = c.zeeman_gap_kelvin(b_gauss)?;
    Ok(fraction_above_threshold(threshold / t))
}

/// Same quantity by adaptive quadrature of the Maxwell-Boltzmann density of
/// collision energies above the Zeeman threshold (absolute tolerance 1e-12).
/// Serves as the independent check on [`endo_fraction`]; the closed form is
/// never consulted here.
pub fn endo_fraction_quadrature(c: &PhysicalConstants, b_gauss: f64, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {t}")));
    }
    let a = c.zeeman_gap_kelvin(b_gauss)? / t;
    // In thermal units x = E/(k_B T) the density is (2/sqrt(pi)) sqrt(x) e^-x.
    let density = |x: f64| FRAC_2_SQRT_PI * x.sqrt() * (-x).exp();
    Ok(quad::integrate(&density, a, a + THERMAL_CUTOFF, 1e-12))
}

/// The fraction as a function of the thermal-to-Zeeman energy ratio alone.
/// Equal to [`endo_fraction`] at any bath condition with that ratio.
pub fn fraction_of_ratio(e_ratio: f64) -> Result<f64> {
    if !e_ratio.is_finite() || e_ratio <= 0.0 {
        return Err(Error::Domain(format!(
            "energy ratio must be > 0, got {e_ratio}"
        )));
    }
    Ok(fraction_above_threshold(1.0 / e_ratio))
}

/// Inverts [`fraction_of_ratio`] by bisection to 1e-10 in the ratio.
/// The initial bracket [1e-4, 1e4] is widened geometrically if needed.
pub fn ratio_of_fraction(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::Domain(format!(
            "fraction must lie strictly inside (0, 1), got {p}"
        )));
    }
    let mut lo = 1e-4;
    let mut hi = 1e4;
    let mut guard = 0;
    while fraction_of_ratio(lo)? > p {
        lo *= 0.1;
        guard += 1;
        if guard > 300 {
            return Err(Error::Domain(format!("no ratio bracket found for p = {p}")));
        }
    }
    while fraction_of_ratio(hi)? < p {
        hi *= 10.0;
        guard += 1;
        if guard > 300 {
            return Err(Error::Domain(format!("no ratio bracket found for p = {p}")));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if fraction_of_ratio(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The fraction sampled on an ascending ratio grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionCurve {
    pub e_ratio_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl FractionCurve {
    /// Evaluates the curve on `grid`, which must be strictly ascending and
    /// positive. The resulting values are nondecreasing and inside [0, 1].
    pub fn evaluate(grid: &[f64]) -> Result<Self> {
        check_grid(grid, 2)?;
        let values = grid
            .iter()
            .map(|&r| fraction_of_ratio(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            e_ratio_grid: grid.to_vec(),
            values,
        })
    }
}

/// First and second derivatives of the fraction along the ratio axis,
/// evaluated by central differences on the exact curve, plus the locations
/// of their maxima (grid argmax refined by a three-point parabola).
#[derive(Debug, Clone, Serialize)]
pub struct FractionDerivatives {
    pub grid: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub argmax_first: f64,
    pub argmax_second: f64,
}

pub fn fraction_derivatives(grid: &[f64]) -> Result<FractionDerivatives> {
    check_grid(grid, 100)?;
    let mut first = Vec::with_capacity(grid.len());
    let mut second = Vec::with_capacity(grid.len());
    for &r in grid {
        let h = r * DERIVATIVE_STEP;
        let up = fraction_of_ratio(r + h)?;
        let mid = fraction_of_ratio(r)?;
        let dn = fraction_of_ratio(r - h)?;
        first.push((up - dn) / (2.0 * h));
        second.push((up - 2.0 * mid + dn) / (h * h));
    }
    let argmax_first = refined_argmax(grid, &first);
    let argmax_second = refined_argmax(grid, &second);
    Ok(FractionDerivatives {
        grid: grid.to_vec(),
        first,
        second,
        argmax_first,
        argmax_second,
    })
}

/// Grid argmax refined by fitting a parabola through the maximum and its
/// two neighbors. Falls back to the raw grid point on boundaries or
/// degenerate curvature.
pub(crate) fn refined_argmax(grid: &[f64], values: &[f64]) -> f64 {
    let i = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if i == 0 || i + 1 >= grid.len() {
        return grid[i];
    }
    parabola_vertex(
        grid[i - 1],
        values[i - 1],
        grid[i],
        values[i],
        grid[i + 1],
        values[i + 1],
    )
    .unwrap_or(grid[i])
}

/// Vertex abscissa of the parabola through three points, if it is a maximum
/// lying within the outer abscissas.
pub(crate) fn parabola_vertex(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> Option<f64> {
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if !(curv.is_finite() && curv < 0.0) {
        return None;
    }
    let vertex = 0.5 * (x0 + x1) - 0.5 * d0 / curv;
    (vertex >= x0 && vertex <= x2).then_some(vertex)
}

fn check_grid(grid: &[f64], min_points: usize) -> Result<()> {
    if grid.len() < min_points {
        return Err(Error::Domain(format!(
            "grid too coarse: {} points, need at least {min_points}",
            grid.len()
        )));
    }
    if grid[0] <= 0.0 {
        return Err(Error::Domain("grid values must be > 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Parameters of the curve a / (1 - b exp(c x^d)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FitParams {
    /// The standard initial guess for fitting the fraction curve.
    pub fn default_guess() -> Self {
        Self {
            a: -1.29,
            b: 2.29,
            c: 0.35,
            d: -1.43,
        }
    }

    /// Evaluates the curve at `x > 0`. Returns an error if the denominator
    /// vanishes there.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!("fit argument must be > 0, got {x}")));
        }
        let denom = 1.0 - self.b * (self.c * x.powf(self.d)).exp();
        if denom.abs() < 1e-12 {
            return Err(Error::Domain(format!(
                "fit denominator vanishes at x = {x}"
            )));
        }
        Ok(self.a / denom)
    }
}

/// A fitted curve together with its residual RMS against the exact fraction.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: FitParams,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Fits the four-parameter curve to the exact fraction on `grid` by damped
/// Gauss-Newton least squares, starting from [`FitParams::default_guess`].
/// The grid must span at least [0.1, 2.5]. Non-convergence within
/// `max_iterations` reports the best parameters found and their residual.
pub fn fit_fraction(grid: &[f64], max_iterations: usize) -> Result<FitResult> {
    check_grid(grid, 10)?;
    if grid[0] > 0.1 + 1e-12 || grid[grid.len() - 1] < 2.5 - 1e-12 {
        return Err(Error::Domain(format!(
            "fit grid must span at least [0.1, 2.5], got [{}, {}]",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    let targets = grid
        .iter()
        .map(|&r| fraction_of_ratio(r))
        .collect::<Result<Vec<_>>>()?;
    let guess = FitParams::default_guess();
    let residuals = |prm: &[f64], out: &mut [f64]| {
        let p = FitParams {
            a: prm[0],
            b: prm[1],
            c: prm[2],
            d: prm[3],
        };
        for (i, (&x, &y)) in grid.iter().zip(&targets).enumerate() {
            out[i] = match p.evaluate(x) {
                Ok(v) => v - y,
                Err(_) => 1e6,
            };
        }
    };
    let outcome = fit::levenberg_marquardt(
        &residuals,
        &[guess.a, guess.b, guess.c, guess.d],
        grid.len(),
        max_iterations,
    );
    let params = FitParams {
        a: outcome.params[0],
        b: outcome.params[1],
        c: outcome.params[2],
        d: outcome.params[3],
    };
    let rms = outcome.rms;
    if !outcome.converged {
        return Err(Error::FitDidNotConverge {
            iterations: outcome.iterations,
            params: outcome.params,
            rms,
        });
    }
    Ok(FitResult {
        params,
        residual_rms: rms,
        iterations: outcome.iterations,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle values keep their full digits
mod tests {
    use super::*;
    use crate::units::REFERENCE_POINT;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn zero_field_gives_unity() {
        assert_eq!(endo_fraction(&c(), 0.0, 4e-7).unwrap(), 1.0);
        assert_abs_diff_eq!(
            endo_fraction_quadrature(&c(), 0.0, 4e-7).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn reference_point_value() {
        let p = endo_fraction(&c(), REFERENCE_POINT.b_field, REFERENCE_POINT.temperature).unwrap();
        assert_relative_eq!(p, 0.34487356377835136, max_relative = 1e-13);
    }

    #[test]
    fn frozen_bath_limit() {
        // below 5 nK at 43 mG the fraction is numerically zero
        let p = endo_fraction(&c(), 0.043, 4.9e-9).unwrap();
        assert!(p < 1e-12, "p = {p}");
        assert!(endo_fraction(&c(), 0.043, 0.0).is_err());
        assert!(endo_fraction(&c(), -0.043, 1e-7).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let cases = [(0.043, 435e-9), (0.080, 200e-9)];
        for (b, t) in cases {
            let exact = endo_fraction(&c(), b, t).unwrap();
            let quad = endo_fraction_quadrature(&c(), b, t).unwrap();
            assert_abs_diff_eq!(exact, quad, epsilon = 1e-8);
        }
        // frozen oracle point, deep in the suppressed regime
        assert_relative_eq!(
            endo_fraction_quadrature(&c(), 0.080, 200e-9).unwrap(),
            0.0037856657587713021,
            max_relative = 1e-8
        );
    }

    #[test]
    fn monotone_in_both_arguments() {
        let konst = c();
        let mut prev = f64::INFINITY;
        for i in 1..=30 {
            let p = endo_fraction(&konst, 4e-3 * i as f64, 435e-9).unwrap();
            assert!(p < prev);
            prev = p;
        }
        let mut prev = 0.0;
        for i in 1..=30 {
            let p = endo_fraction(&konst, 0.043, 5e-8 * i as f64).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn depends_only_on_ratio() {
        let konst = c();
        let base = endo_fraction(&konst, 0.043, 435e-9).unwrap();
        for scale in [0.1, 0.37, 2.9, 10.0] {
            let p = endo_fraction(&konst, 0.043 * scale, 435e-9 * scale).unwrap();
            assert_abs_diff_eq!(p, base, epsilon = 1e-12);
        }
    }

    #[test]
    fn ratio_parameterization_values() {
        assert_relative_eq!(
            fraction_of_ratio(1.0).unwrap(),
            0.57240670447087983,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            fraction_of_ratio(0.6).unwrap(),
            0.34303014613824372,
            max_relative = 1e-13
        );
        // matches the closed form at any condition with that ratio
        let konst = c();
        let e = konst.to_energy_point(REFERENCE_POINT).unwrap();
        assert_abs_diff_eq!(
            fraction_of_ratio(e.e_ratio).unwrap(),
            endo_fraction(&konst, REFERENCE_POINT.b_field, REFERENCE_POINT.temperature).unwrap(),
            epsilon = 1e-14
        );
        assert!((fraction_of_ratio(1e8).unwrap() - 1.0).abs() < 1e-11);
        assert!(fraction_of_ratio(0.0).is_err());
        assert!(fraction_of_ratio(-1.0).is_err());
    }

    #[test]
    fn strictly_increasing_with_limits() {
        let mut prev = 0.0;
        for i in 1..=400 {
            let r = 0.01 * i as f64;
            let p = fraction_of_ratio(r).unwrap();
            assert!(p > prev);
            prev = p;
        }
        assert!(fraction_of_ratio(1e-3).unwrap() < 1e-100);
        assert!(fraction_of_ratio(1e6).unwrap() > 0.999);
    }

    #[test]
    fn inverse_recovers_known_ratios() {
        assert_abs_diff_eq!(
            ratio_of_fraction(0.57240670447087983).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            ratio_of_fraction(0.15).unwrap(),
            0.37614858116626806,
            max_relative = 1e-7
        );
        assert_relative_eq!(
            ratio_of_fraction(0.03).unwrap(),
            0.22353143343728231,
            max_relative = 1e-7
        );
        for bad in [0.0, 1.0, -0.2, 1.7] {
            assert!(ratio_of_fraction(bad).is_err());
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        for i in 1..19 {
            let p = 0.05 * i as f64;
            let r = ratio_of_fraction(p).unwrap();
            assert_abs_diff_eq!(fraction_of_ratio(r).unwrap(), p, epsilon = 1e-8);
        }
    }

    #[test]
    fn derivative_shapes() {
        let grid = linspace(0.1, 3.0, 600);
        let d = fraction_derivatives(&grid).unwrap();
        // monotone curve: first derivative positive everywhere
        assert!(d.first.iter().all(|&v| v > 0.0));
        // the slope peaks where the fraction is 0.15..0.20
        let p_at_argmax = fraction_of_ratio(d.argmax_first).unwrap();
        assert!(
            (0.15..=0.20).contains(&p_at_argmax),
            "p at first-derivative argmax = {p_at_argmax}"
        );
        assert_abs_diff_eq!(d.argmax_first, 0.4, epsilon = 2e-3);
        assert_abs_diff_eq!(d.argmax_second, 0.18619100647006049, epsilon = 2e-3);
        // curvature changes sign exactly once on [0.1, 3]
        let sign_changes = d
            .second
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count();
        assert_eq!(sign_changes, 1);
        // coarse grids rejected
        assert!(fraction_derivatives(&linspace(0.1, 3.0, 50)).is_err());
    }

    #[test]
    fn curve_invariants() {
        let grid = linspace(0.05, 4.0, 300);
        let curve = FractionCurve::evaluate(&grid).unwrap();
        assert!(curve.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(curve.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn default_guess_tracks_exact_curve() {
        let guess = FitParams::default_guess();
        assert_abs_diff_eq!(guess.evaluate(0.6).unwrap(), 0.345, epsilon = 5e-4);
        assert_abs_diff_eq!(guess.evaluate(1.0).unwrap(), 0.573, epsilon = 5e-4);
        assert_abs_diff_eq!(
            guess.evaluate(1.0).unwrap(),
            fraction_of_ratio(1.0).unwrap(),
            epsilon = 0.01
        );
    }

    #[test]
    fn fit_converges_below_millirms() {
        let grid = linspace(0.1, 2.5, 241);
        let fitted = fit_fraction(&grid, 200).unwrap();
        assert!(fitted.residual_rms < 1e-3, "rms = {}", fitted.residual_rms);
        // and the fitted curve still matches the spot values
        assert_abs_diff_eq!(
            fitted.params.evaluate(0.6).unwrap(),
            fraction_of_ratio(0.6).unwrap(),
            epsilon = 5e-3
        );
    }

    #[test]
    fn fit_requires_covering_grid() {
        assert!(fit_fraction(&linspace(0.3, 2.5, 100), 200).is_err());
        assert!(fit_fraction(&linspace(0.1, 2.0, 100), 200).is_err());
    }

    #[test]
    fn fit_reports_nonconvergence() {
        let grid = linspace(0.1, 2.5, 241);
        match fit_fraction(&grid, 1) {
            Err(Error::FitDidNotConverge { rms, params, .. }) => {
                assert!(rms.is_finite());
                assert_eq!(params.len(), 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
