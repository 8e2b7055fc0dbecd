//! End-to-end acceptance suite. Every test prints one line
//! `acceptance NN <name>: PASS|FAIL (details)` and then asserts, so a full
//! report is visible with `cargo test --test acceptance -- --nocapture`
//! (failing criteria always show their line).

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinprobe::config::{GridSpec, RunConfig};
use spinprobe::dynamics::{
    build_generator, evolve, steady_state, steady_state_nullspace, SpinDistribution,
};
use spinprobe::endo::{endo_fraction, endo_fraction_quadrature, fraction_of_ratio, FitParams};
use spinprobe::envelope::ResultEnvelope;
use spinprobe::rates::TransitionRates;
use spinprobe::runner::{run_command, Command};
use spinprobe::scan::locate_maxima;
use spinprobe::sensitivity::{
    bures_distance, fisher_direct, sensitivity_at, speed_from_distance, Axis, ProbeModel,
};
use spinprobe::units::{PhysicalConstants, REFERENCE_POINT};

fn report(number: u8, name: &str, pass: bool, details: &str) -> bool {
    println!(
        "acceptance {number:02} {name}: {} ({details})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn log_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| min * (max / min).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn lin_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Closed form against the independent quadrature of the collision-energy
/// distribution, on a 20 x 20 grid over 1..100 mG and 50..1000 nK.
#[test]
fn criterion_01_closed_form_vs_quadrature() {
    let start = Instant::now();
    let c = PhysicalConstants::default();
    let mut worst = 0.0f64;
    for &b in &log_grid(1e-3, 0.1, 20) {
        for &t in &log_grid(50e-9, 1000e-9, 20) {
            let exact = endo_fraction(&c, b, t).unwrap();
            let quad = endo_fraction_quadrature(&c, b, t).unwrap();
            worst = worst.max((exact - quad).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst < 1e-8 && elapsed < 5.0;
    let details = format!("max |closed - quadrature| = {worst:.3e}, {elapsed:.2} s");
    assert!(
        report(1, "closed form vs quadrature", pass, &details),
        "{details}"
    );
}

/// The published four-parameter curve tracks the analytic fraction to 0.01
/// across ratios 0.2..2.0, with the two spot anchors at three decimals.
#[test]
fn criterion_02_fit_function_reproduction() {
    let start = Instant::now();
    let params = FitParams::default_guess();
    let mut worst = 0.0f64;
    for &x in &lin_grid(0.2, 2.0, 181) {
        let f = params.evaluate(x).unwrap();
        let p = fraction_of_ratio(x).unwrap();
        worst = worst.max((f - p).abs());
    }
    let at_06 = params.evaluate(0.6).unwrap();
    let at_10 = params.evaluate(1.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst < 0.01
        && (at_06 - 0.345).abs() < 5e-4
        && (at_10 - 0.573).abs() < 5e-4
        && elapsed < 1.0;
    let details = format!(
        "max |fit - exact| = {worst:.4}, f(0.6) = {at_06:.4}, f(1.0) = {at_10:.4}, {elapsed:.2} s"
    );
    assert!(
        report(2, "fit function reproduction", pass, &details),
        "{details}"
    );
}

/// Detailed-balance steady state against the null-space solve on random
/// positive rates, and long-time integration against both.
#[test]
fn criterion_03_steady_state_two_methods() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_l1 = 0.0f64;
    for _ in 0..100 {
        let rates = TransitionRates {
            endo: std::array::from_fn(|_| rng.gen_range(0.1..2.0)),
            exo: std::array::from_fn(|_| rng.gen_range(0.1..2.0)),
        };
        let product = steady_state(&rates).unwrap();
        let nullspace = steady_state_nullspace(&build_generator(&rates).unwrap()).unwrap();
        worst_l1 = worst_l1.max(product.l1_distance(&nullspace));
    }

    let model = ProbeModel::default();
    let rates = model.rates_at(REFERENCE_POINT).unwrap();
    let t = 20.0 / rates.min_positive_rate().unwrap();
    let evolved = evolve(
        &SpinDistribution::initial_probe_state(),
        &build_generator(&rates).unwrap(),
        t,
    )
    .unwrap();
    let relaxed_l1 = evolved
        .distribution
        .l1_distance(&steady_state(&rates).unwrap());

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_l1 < 1e-10 && relaxed_l1 < 1e-6 && elapsed < 10.0;
    let details = format!(
        "max L1(product, nullspace) = {worst_l1:.3e} over 100 rate sets, \
         L1 after t = 20/min_rate: {relaxed_l1:.3e}, {elapsed:.2} s"
    );
    assert!(
        report(3, "steady-state two-method agreement", pass, &details),
        "{details}"
    );
}

/// Total probability stays within 1e-9 of one along full trajectories.
#[test]
fn criterion_04_probability_conservation() {
    let model = ProbeModel::default();
    let rates = model.rates_at(REFERENCE_POINT).unwrap();
    let generator = build_generator(&rates).unwrap();
    let p0 = SpinDistribution::initial_probe_state();
    let mut worst = 0.0f64;
    for mult in [0.5, 2.0, 20.0] {
        let t = mult / rates.min_positive_rate().unwrap();
        worst = worst.max(evolve(&p0, &generator, t).unwrap().norm_drift);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let rates = TransitionRates {
            endo: std::array::from_fn(|_| rng.gen_range(0.05..5.0)),
            exo: std::array::from_fn(|_| rng.gen_range(0.05..5.0)),
        };
        let g = build_generator(&rates).unwrap();
        worst = worst.max(evolve(&p0, &g, 30.0).unwrap().norm_drift);
    }
    let pass = worst < 1e-9;
    let details = format!("max |sum P - 1| along trajectories = {worst:.3e}");
    assert!(
        report(4, "probability conservation", pass, &details),
        "{details}"
    );
}

/// The Bures-slope Fisher information agrees with the direct classical sum
/// on a Bernoulli family and on the seven-state steady state.
#[test]
fn criterion_05_fisher_oracle_agreement() {
    // Bernoulli embed at theta = 1/2, relative step 1e-3
    let bern = |theta: f64| {
        SpinDistribution::from_probabilities([theta, 1.0 - theta, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    };
    let theta = 0.5;
    let step = theta * 1e-3;
    let d = bures_distance(&bern(theta), &bern(theta + step)).unwrap();
    let s = speed_from_distance(d, step);
    let f_slope_bern = 8.0 * s * s;
    let dp = [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let f_direct_bern = fisher_direct(&bern(theta), &dp).unwrap();
    let bern_ok =
        (f_slope_bern / f_direct_bern - 1.0).abs() < 0.01 && (f_direct_bern - 4.0).abs() < 1e-12;

    // seven-state steady state along the fixed-field temperature axis
    let model = ProbeModel::default();
    let axis = Axis::ConstBVaryT;
    let r = sensitivity_at(&model, REFERENCE_POINT, axis, 1e-3, None).unwrap();
    let h = 1e-3;
    let up = model
        .state_at(
            axis.stepped(&model.constants, REFERENCE_POINT, h).unwrap(),
            None,
        )
        .unwrap();
    let dn = model
        .state_at(
            axis.stepped(&model.constants, REFERENCE_POINT, -h).unwrap(),
            None,
        )
        .unwrap();
    let p = model.state_at(REFERENCE_POINT, None).unwrap();
    let mut dp7 = [0.0; 7];
    for ((d, u), l) in dp7
        .iter_mut()
        .zip(up.probabilities())
        .zip(dn.probabilities())
    {
        *d = (u - l) / (2.0 * h);
    }
    let f_direct_7 = fisher_direct(&p, &dp7).unwrap();
    let seven_ok = (r.fisher_left / f_direct_7 - 1.0).abs() < 0.01
        && (r.fisher_right / f_direct_7 - 1.0).abs() < 0.01;

    let pass = bern_ok && seven_ok;
    let details = format!(
        "Bernoulli slope F = {f_slope_bern:.4} vs direct {f_direct_bern:.4}; \
         7-state slope F = {:.4}/{:.4} vs direct {f_direct_7:.4}",
        r.fisher_left, r.fisher_right
    );
    assert!(
        report(5, "Fisher oracle agreement", pass, &details),
        "{details}"
    );
}

/// Axis ordering at the reference condition: the constant-total-energy
/// axis above the constant-field axis, the constant-temperature axis above
/// the constant-ratio axis, on both sides.
///
/// With the constant default cross sections the steady state depends on
/// the bath condition only through the energy ratio, and the first pair of
/// axes step that ratio by identical relative amounts, so their
/// sensitivities tie exactly up to rounding; the strict ordering asserted
/// here is not attainable with this table (see the test output for the
/// measured values).
#[test]
fn criterion_06_axis_ordering_at_reference() {
    let model = ProbeModel::default();
    let result = |axis| sensitivity_at(&model, REFERENCE_POINT, axis, 1e-3, None).unwrap();
    let etot = result(Axis::ConstEtotVaryRatio);
    let b = result(Axis::ConstBVaryT);
    let t = result(Axis::ConstTVaryB);
    let ratio = result(Axis::ConstRatioVaryEtot);

    let first = etot.fisher_left > b.fisher_left && etot.fisher_right > b.fisher_right;
    let second = t.fisher_left > ratio.fisher_left && t.fisher_right > ratio.fisher_right;
    let pass = first && second;
    let details = format!(
        "sqrtF const-Etot = {:.12}/{:.12}, const-B = {:.12}/{:.12}, \
         const-T = {:.12}/{:.12}, const-ratio = {:.3e}/{:.3e}",
        etot.fisher_left.sqrt(),
        etot.fisher_right.sqrt(),
        b.fisher_left.sqrt(),
        b.fisher_right.sqrt(),
        t.fisher_left.sqrt(),
        t.fisher_right.sqrt(),
        ratio.fisher_left.sqrt(),
        ratio.fisher_right.sqrt(),
    );
    assert!(
        report(6, "axis ordering at reference", pass, &details),
        "{details}"
    );
}

/// Sensitivity maxima along the constant-total-energy axis against the
/// inflection structure of the endoergic fraction, for the six total
/// energies.
///
/// With the constant default cross sections both wings peak together near
/// ratio 0.65 (fraction 0.38), so the alignment brackets asserted here are
/// not attainable; the interior-maximum and universality parts are.
#[test]
fn criterion_07_maxima_inflection_alignment() {
    let start = Instant::now();
    let model = ProbeModel::default();
    let grid = lin_grid(0.1, 2.0, 401);
    let e_tots = [0.7e-6, 1.1e-6, 1.3e-6, 1.6e-6, 1.91e-6, 2.2e-6];
    let reports: Vec<_> = e_tots
        .iter()
        .map(|&e| locate_maxima(&model, e, &grid, 1e-3, None).unwrap())
        .collect();

    let interior_ok = reports.iter().all(|r| r.left_interior && r.right_interior);
    let align_left_ok = reports.iter().all(|r| r.deviation_left < 0.1);
    let align_right_ok = reports.iter().all(|r| r.deviation_right < 0.1);
    let fraction_ok = reports
        .iter()
        .all(|r| (0.10..=0.25).contains(&r.fraction_at_left_max));
    let universal_ok = reports.iter().all(|r| {
        r.ratio_at_d1_max == reports[0].ratio_at_d1_max
            && r.ratio_at_d2_max == reports[0].ratio_at_d2_max
    });
    let elapsed = start.elapsed().as_secs_f64();

    let r16 = &reports[3];
    let pass = interior_ok
        && align_left_ok
        && align_right_ok
        && fraction_ok
        && universal_ok
        && elapsed < 60.0;
    let details = format!(
        "at 1.6 uK: left max ratio {:.4} (fraction {:.4}), right max ratio {:.4}, \
         d1 argmax {:.4}, d2 argmax {:.4}, deviations {:.3}/{:.3}; interior {}, \
         universality {}, {elapsed:.1} s",
        r16.ratio_at_left_max,
        r16.fraction_at_left_max,
        r16.ratio_at_right_max,
        r16.ratio_at_d1_max,
        r16.ratio_at_d2_max,
        r16.deviation_left,
        r16.deviation_right,
        interior_ok,
        universal_ok,
    );
    assert!(
        report(7, "maxima/inflection alignment", pass, &details),
        "{details}"
    );
}

/// Scaling every rate by 1000 leaves steady states and sensitivities
/// unchanged.
#[test]
fn criterion_08_rate_scale_invariance() {
    let base = ProbeModel::default();
    let mut scaled = ProbeModel::default();
    scaled.cross_sections = scaled.cross_sections.scaled(1e3);

    let ss_base = steady_state(&base.rates_at(REFERENCE_POINT).unwrap()).unwrap();
    let ss_scaled = steady_state(&scaled.rates_at(REFERENCE_POINT).unwrap()).unwrap();
    let l1 = ss_base.l1_distance(&ss_scaled);

    let mut worst_rel = 0.0f64;
    for axis in Axis::ALL {
        let a = sensitivity_at(&base, REFERENCE_POINT, axis, 1e-3, None).unwrap();
        let b = sensitivity_at(&scaled, REFERENCE_POINT, axis, 1e-3, None).unwrap();
        for (x, y) in [
            (a.fisher_left.sqrt(), b.fisher_left.sqrt()),
            (a.fisher_right.sqrt(), b.fisher_right.sqrt()),
        ] {
            // a mathematically zero sensitivity (constant-ratio axis)
            // computes as rounding dust; both sides being dust counts as
            // unchanged
            if x < 1e-9 && y < 1e-9 {
                continue;
            }
            let rel = (x - y).abs() / x.abs().max(1e-300);
            worst_rel = worst_rel.max(rel);
        }
    }
    let pass = l1 < 1e-12 && worst_rel < 1e-9;
    let details =
        format!("steady-state L1 = {l1:.3e}, worst sqrtF relative change = {worst_rel:.3e}");
    assert!(
        report(8, "rate-scale invariance", pass, &details),
        "{details}"
    );
}

/// Limiting behavior: the temperature profile at fixed field dies off at
/// both ends, zero field passes every collision, and a frozen bath passes
/// none.
#[test]
fn criterion_09_limits() {
    let model = ProbeModel::default();
    let c = &model.constants;
    let grid = log_grid(5e-8, 1e-5, 201);
    let profile = spinprobe::sensitivity::sensitivity_profile(
        &model,
        Axis::ConstBVaryT,
        REFERENCE_POINT.b_field,
        &grid,
        1e-3,
        None,
    )
    .unwrap();
    let max = profile
        .iter()
        .map(|p| p.sqrt_fisher_left.max(p.sqrt_fisher_right))
        .fold(0.0, f64::max);
    let ends = [
        profile[0].sqrt_fisher_left,
        profile[0].sqrt_fisher_right,
        profile[profile.len() - 1].sqrt_fisher_left,
        profile[profile.len() - 1].sqrt_fisher_right,
    ];
    let ends_ok = ends.iter().all(|&v| v < 0.05 * max);

    let zero_field_ok = [1e-7, 435e-9, 1e-6]
        .iter()
        .all(|&t| endo_fraction(c, 0.0, t).unwrap() == 1.0);
    let frozen = endo_fraction(c, 0.043, 4.9e-9).unwrap();
    let frozen_ok = frozen < 1e-12;

    let pass = ends_ok && zero_field_ok && frozen_ok;
    let details = format!(
        "profile max = {max:.3}, ends = {:.3e}/{:.3e}, p(0, T) = 1 exact: {zero_field_ok}, \
         p(43 mG, 4.9 nK) = {frozen:.3e}",
        ends[0], ends[2]
    );
    assert!(report(9, "limiting behavior", pass, &details), "{details}");
}

/// Rerunning any command from the configuration echoed in its envelope
/// reproduces the payload byte for byte.
#[test]
fn criterion_10_determinism() {
    let cfg = RunConfig {
        ratio_grid: Some(GridSpec::linear(0.1, 2.5, 241)),
        b_grid_gauss: Some(GridSpec::linear(0.010, 0.080, 10)),
        t_grid_k: Some(GridSpec::linear(2e-7, 1e-6, 10)),
        ..RunConfig::default()
    };
    let base = Path::new(".");

    let mut all_ok = true;
    let mut checked = 0;
    for command in Command::ALL {
        let first = run_command(command, &cfg, base).unwrap();
        let second = run_command(command, &cfg, base).unwrap();
        // round-trip the embedded config exactly as a rerun would
        let echoed: RunConfig = serde_json::from_value(first.config.clone()).unwrap();
        let third: ResultEnvelope = run_command(command, &echoed, base).unwrap();
        let a = first.payload_bytes().unwrap();
        let b = second.payload_bytes().unwrap();
        let c = third.payload_bytes().unwrap();
        if a != b || a != c {
            all_ok = false;
        }
        checked += 1;
    }
    let details = format!("{checked} commands, repeat and envelope-rerun payloads identical");
    assert!(report(10, "determinism", all_ok, &details), "{details}");
}
