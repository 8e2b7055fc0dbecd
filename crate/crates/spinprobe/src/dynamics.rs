//! The seven-level rate equation of the probe spin: generator construction,
//! fixed-step time evolution, and the stationary distribution by two
//! independent routes (detailed-balance product form and a dense null-space
//! solve).

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::TransitionRates;

/// Number of magnetic sub-states, m = -3..=+3.
pub const N_STATES: usize = 7;

/// Rate spreads past this make the fixed-step integrator useless.
const MAX_RATE_SPREAD: f64 = 1e12;

/// Populations of the seven magnetic sub-states. Index 0 is m = -3,
/// index 6 is m = +3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinDistribution {
    probabilities: [f64; N_STATES],
}

impl SpinDistribution {
    /// Validates entries in [0, 1] (tiny negative dust down to -1e-12 is
    /// clipped to zero) and total probability within 1e-9 of one.
    pub fn from_probabilities(probabilities: [f64; N_STATES]) -> Result<Self> {
        let mut p = probabilities;
        for v in &mut p {
            if !v.is_finite() || *v < -1e-12 || *v > 1.0 + 1e-9 {
                return Err(Error::Domain(format!("population {v} outside [0, 1]")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized {
                deviation: (sum - 1.0).abs(),
            });
        }
        Ok(Self { probabilities: p })
    }

    /// All population on a single sub-state.
    pub fn unit(m: i32) -> Result<Self> {
        if !(-3..=3).contains(&m) {
            return Err(Error::Domain(format!("m must lie in -3..=3, got {m}")));
        }
        let mut p = [0.0; N_STATES];
        p[(m + 3) as usize] = 1.0;
        Ok(Self { probabilities: p })
    }

    /// The prepared probe state: all population in m = +2.
    pub fn initial_probe_state() -> Self {
        Self::unit(2).expect("m = 2 is in range")
    }

    /// Bypasses validation; only for exercising guards in tests.
    #[cfg(test)]
    pub(crate) fn raw(probabilities: [f64; N_STATES]) -> Self {
        Self { probabilities }
    }

    pub fn uniform() -> Self {
        Self {
            probabilities: [1.0 / N_STATES as f64; N_STATES],
        }
    }

    pub fn probabilities(&self) -> &[f64; N_STATES] {
        &self.probabilities
    }

    /// Population of sub-state `m` in -3..=3.
    pub fn probability(&self, m: i32) -> f64 {
        self.probabilities[(m + 3) as usize]
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Generator of the rate equation dP/dt = G P: nonnegative rates on the two
/// adjacent-m bands, diagonal set to the negated out-rate sums so that every
/// column sums to zero and total probability is conserved exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGenerator {
    matrix: [[f64; N_STATES]; N_STATES],
}

impl RateGenerator {
    pub fn matrix(&self) -> &[[f64; N_STATES]; N_STATES] {
        &self.matrix
    }

    /// Largest total departure rate over states, max_j |G_jj|.
    pub fn max_out_rate(&self) -> f64 {
        (0..N_STATES)
            .map(|j| self.matrix[j][j].abs())
            .fold(0.0, f64::max)
    }

    /// Ratio of the largest to the smallest strictly positive transition
    /// rate. 1.0 when no rates are positive.
    pub fn rate_spread(&self) -> f64 {
        let mut min = f64::INFINITY;
        let mut max: f64 = 0.0;
        for j in 0..N_STATES {
            for i in 0..N_STATES {
                if i != j && self.matrix[i][j] > 0.0 {
                    min = min.min(self.matrix[i][j]);
                    max = max.max(self.matrix[i][j]);
                }
            }
        }
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }

    fn apply(&self, p: &[f64; N_STATES], out: &mut [f64; N_STATES]) {
        for (o, row) in out.iter_mut().zip(&self.matrix) {
            *o = row.iter().zip(p).map(|(m, pv)| m * pv).sum();
        }
    }
}

/// Builds the tridiagonal generator from the twelve transition rates.
/// Negative rates are rejected.
pub fn build_generator(rates: &TransitionRates) -> Result<RateGenerator> {
    if rates.all().any(|r| !r.is_finite() || r < 0.0) {
        return Err(Error::Domain(
            "transition rates must be finite and >= 0".into(),
        ));
    }
    let mut m = [[0.0; N_STATES]; N_STATES];
    // endo[i]: (i-3) -> (i-2) is index i -> i+1; exo[i]: (i-2) -> (i-3) is
    // index i+1 -> i
    for i in 0..6 {
        m[i + 1][i] += rates.endo[i];
        m[i][i + 1] += rates.exo[i];
    }
    for j in 0..N_STATES {
        let mut out = 0.0;
        for (i, row) in m.iter().enumerate() {
            if i != j {
                out += row[j];
            }
        }
        m[j][j] = -out;
    }
    Ok(RateGenerator { matrix: m })
}

/// A time-evolved distribution together with the largest deviation of its
/// total probability from one seen anywhere along the trajectory. The
/// deviation is reported, never repaired.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub distribution: SpinDistribution,
    pub norm_drift: f64,
}

/// Propagates `p0` for a duration `t` with classical fourth-order
/// Runge-Kutta at fixed step min(0.01 / max_out_rate, t / 100).
pub fn evolve(p0: &SpinDistribution, g: &RateGenerator, t: f64) -> Result<Evolved> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("duration must be >= 0, got {t}")));
    }
    let spread = g.rate_spread();
    if spread > MAX_RATE_SPREAD {
        return Err(Error::StiffGenerator { spread });
    }
    if t == 0.0 {
        return Ok(Evolved {
            distribution: *p0,
            norm_drift: 0.0,
        });
    }
    let max_out = g.max_out_rate();
    let h_target = if max_out > 0.0 {
        (0.01 / max_out).min(t / 100.0)
    } else {
        t / 100.0
    };
    let n_steps = (t / h_target).ceil().max(1.0) as u64;
    let h = t / n_steps as f64;

    let mut p = *p0.probabilities();
    let mut drift: f64 = 0.0;
    let (mut k1, mut k2, mut k3, mut k4) = (
        [0.0; N_STATES],
        [0.0; N_STATES],
        [0.0; N_STATES],
        [0.0; N_STATES],
    );
    let mut tmp = [0.0; N_STATES];
    for _ in 0..n_steps {
        g.apply(&p, &mut k1);
        for i in 0..N_STATES {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        g.apply(&tmp, &mut k2);
        for i in 0..N_STATES {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        g.apply(&tmp, &mut k3);
        for i in 0..N_STATES {
            tmp[i] = p[i] + h * k3[i];
        }
        g.apply(&tmp, &mut k4);
        for i in 0..N_STATES {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let sum: f64 = p.iter().sum();
        drift = drift.max((sum - 1.0).abs());
    }
    Ok(Evolved {
        distribution: SpinDistribution::from_probabilities(p)?,
        norm_drift: drift,
    })
}

/// Stationary distribution of the birth-death chain by the detailed-balance
/// product form pi_{k+1} / pi_k = up_k / down_{k+1}.
///
/// A vanishing up-rate truncates the chain: no stationary mass sits above
/// it. A vanishing down-rate with a positive up-rate across the same link
/// drains everything below it. A link dead in both directions disconnects
/// the chain, which has no unique stationary state.
pub fn steady_state(rates: &TransitionRates) -> Result<SpinDistribution> {
    if rates.all().any(|r| !r.is_finite() || r < 0.0) {
        return Err(Error::Domain(
            "transition rates must be finite and >= 0".into(),
        ));
    }
    if rates.all().all(|r| r == 0.0) {
        return Err(Error::NoSteadyState("all transition rates are zero".into()));
    }
    let mut w = [0.0; N_STATES];
    w[0] = 1.0;
    let mut saw_down_only = false;
    for k in 0..6 {
        // link k <-> k+1: up = endo[k] (m = k-3 rising), down = exo[k]
        // (m = k-2 falling)
        let up = rates.endo[k];
        let down = rates.exo[k];
        match (up > 0.0, down > 0.0) {
            (true, true) => w[k + 1] = w[k] * (up / down),
            (false, true) => {
                // chain truncated: no stationary mass above this link
                saw_down_only = true;
                w[k + 1] = 0.0;
            }
            (true, false) => {
                if saw_down_only {
                    // an absorbing region already exists below; a second one
                    // above makes the stationary state initial-condition
                    // dependent
                    return Err(Error::NoSteadyState(format!(
                        "two disjoint absorbing regions around m = {}",
                        k as i32 - 3
                    )));
                }
                // irreversible upward flow: nothing stays at or below k
                for wv in w.iter_mut().take(k + 1) {
                    *wv = 0.0;
                }
                w[k + 1] = 1.0;
            }
            (false, false) => {
                return Err(Error::NoSteadyState(format!(
                    "chain disconnected between m = {} and m = {}",
                    k as i32 - 3,
                    k as i32 - 2
                )));
            }
        }
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::NoSteadyState("stationary weights degenerate".into()));
    }
    let mut p = [0.0; N_STATES];
    for (pi, wi) in p.iter_mut().zip(&w) {
        *pi = wi / total;
    }
    SpinDistribution::from_probabilities(p)
}

/// Stationary distribution as the null vector of the generator, solved
/// densely with one row replaced by the normalization constraint. This is
/// the independent cross-check on [`steady_state`].
pub fn steady_state_nullspace(g: &RateGenerator) -> Result<SpinDistribution> {
    let mut a = SMatrix::<f64, N_STATES, N_STATES>::zeros();
    for i in 0..N_STATES {
        for j in 0..N_STATES {
            a[(i, j)] = g.matrix[i][j];
        }
    }
    // scale so the normalization row is commensurate with the rate rows
    let scale = g.max_out_rate().max(1.0);
    let mut rhs = SVector::<f64, N_STATES>::zeros();
    for j in 0..N_STATES {
        a[(N_STATES - 1, j)] = scale;
    }
    rhs[N_STATES - 1] = scale;
    let lu = a.lu();
    let Some(pi) = lu.solve(&rhs) else {
        return Err(Error::SingularSystem(
            "generator has no unique stationary vector".into(),
        ));
    };
    // residual against the full generator confirms a genuine null vector
    let mut residual: f64 = 0.0;
    for i in 0..N_STATES {
        let mut acc = 0.0;
        for j in 0..N_STATES {
            acc += g.matrix[i][j] * pi[j];
        }
        residual = residual.max(acc.abs());
    }
    if residual > 1e-7 * scale {
        return Err(Error::SingularSystem(format!(
            "stationary residual {residual:.3e} too large; generator is defective"
        )));
    }
    let mut p = [0.0; N_STATES];
    for (dst, src) in p.iter_mut().zip(pi.iter()) {
        if *src < -1e-9 {
            return Err(Error::SingularSystem(format!(
                "stationary solve produced negative population {src:.3e}"
            )));
        }
        *dst = src.max(0.0);
    }
    SpinDistribution::from_probabilities(p)
}
