use std::sync::{Arc, OnceLock};

use blowup_core::model::{ode_hat, ode_hat_singularity, Params};
use blowup_core::regions::*;
use blowup_core::solver::*;
use blowup_core::Error;
use proptest::prelude::*;

fn unit() -> Params {
    Params::new(1.0, 1.0, 1.0).unwrap()
}

#[test]
fn solve_tx_closed_form_point() {
    let rp = solve_tx((-0.5f64).exp(), 4.0, 2.0).unwrap();
    assert!((rp.sigma - (-1.0f64).exp()).abs() < 1e-14);
    assert!((rp.t_of_x - (2.0 - rp.sigma)).abs() < 1e-15);
    let neg = solve_tx(-(-0.5f64).exp(), 4.0, 2.0).unwrap();
    assert_eq!(neg.sigma, rp.sigma);
}

#[test]
fn solve_tx_round_trip() {
    for k0 in [0.5, 1.0, 2.0, 4.0] {
        let top = 0.25 * k0 * (-0.5f64).exp();
        for k in 0..100 {
            let x = top * 10f64.powf(-12.0 * k as f64 / 99.0);
            let rp = solve_tx(x, k0, 1.0).unwrap();
            assert!(rp.sigma > 0.0 && rp.sigma <= (-1.0f64).exp() * (1.0 + 1e-12));
            assert!(rp.residual() < 1e-10, "x={x} k0={k0}: {}", rp.residual());
        }
    }
}

#[test]
fn solve_tx_small_x_asymptotics() {
    let k0 = 2.0;
    let mut last = f64::INFINITY;
    for x in [1e-5, 1e-20, 1e-50, 1e-100, 1e-150] {
        let rp = solve_tx(x, k0, 0.0).unwrap();
        let ratio = rp.sigma * 2.0 * x.ln().abs() / (x * x) / (16.0 / (k0 * k0));
        let err = (ratio - 1.0).abs();
        assert!(err < last, "x={x}: {ratio}");
        last = err;
    }
    assert!(last < 0.02);
}

#[test]
fn solve_tx_rejects_large_x() {
    assert!(matches!(solve_tx(0.2, 1.0, 1.0), Err(Error::Domain { .. })));
    assert!(solve_tx(0.0, 1.0, 1.0).is_err());
}

/// `u(x, t) = U(t)` with U the exact flat solution blowing up at `t_blowup`.
fn flat_trajectory(pr: Params, t_blowup: f64) -> PhysicalTrajectory {
    let g = Arc::new(PhysGrid::uniform(0.5, 65).unwrap());
    let times: Vec<f64> = (0..400).map(|k| t_blowup - 0.5 * 0.97f64.powi(k)).collect();
    let u = times.iter().map(|t| vec![-(pr.p * (t_blowup - t)).ln() / pr.q; 65]).collect();
    let v = times.iter().map(|t| vec![-(pr.q * (t_blowup - t)).ln() / pr.p; 65]).collect();
    PhysicalTrajectory { params: pr, grid: g, times, u, v, stop: StopReason::Level, steps: 0 }
}

#[test]
fn shift_identity_on_flat_trajectory() {
    let pr = Params::new(1.4, 0.8, 2.0).unwrap();
    let tr = flat_trajectory(pr, 1.0);
    let rp = solve_tx(0.05, 1.0, 1.0).unwrap();
    for &tau in &[0.0, 0.3, 0.7, 0.9] {
        for &xi in &[-0.1, 0.0, 0.2] {
            let (ut, vt) = extract_rescaled(&tr, xi, tau, &rp).unwrap();
            let (u, v) = tr.sample(0.05 + xi * rp.sigma.sqrt(), rp.t_of_x + tau * rp.sigma).unwrap();
            assert!((ut - (rp.sigma.ln() / pr.q + u)).abs() < 1e-12);
            assert!((vt - (rp.sigma.ln() / pr.p + v)).abs() < 1e-12);
            // the flat solution rescales to the ODE pair with singularity at tau = 1
            assert!((ut + (pr.p * (1.0 - tau)).ln() / pr.q).abs() < 1e-3, "tau={tau}: {ut}");
            let (gu, gv) = extract_rescaled_dxi(&tr, xi, tau, &rp).unwrap();
            assert!(gu.abs() < 1e-9 && gv.abs() < 1e-9);
        }
    }
    assert!(matches!(extract_rescaled(&tr, 0.0, 1.5, &rp), Err(Error::Coverage { .. })));
}

/// `e^{q u} = 1 / (p (T - t + c sigma(x)))` with `c` the offset of the ODE singularity,
/// so that `u~(0, tau)` is exactly the flat ODE solution.
fn ode_exact_trajectory(pr: Params, k0: f64) -> PhysicalTrajectory {
    let t_blowup = 1.0;
    let c = ode_hat_singularity(k0, &pr) - 1.0;
    let top = (-1.0f64).exp();
    let g = Arc::new(PhysGrid::stretched(0.5, 4001, 1e-7).unwrap());
    let sig: Vec<f64> =
        g.x.iter().map(|&x| if x == 0.0 { 0.0 } else { solve_tx(x, k0, 0.0).map_or(top, |r| r.sigma) }).collect();
    let times: Vec<f64> = (0..880).map(|k| t_blowup - 0.5 * 0.98f64.powi(k)).collect();
    let field =
        |a: f64, b: f64, t: f64| -> Vec<f64> { sig.iter().map(|s| -(a * (t_blowup - t + c * s)).ln() / b).collect() };
    let u = times.iter().map(|&t| field(pr.p, pr.q, t)).collect();
    let v = times.iter().map(|&t| field(pr.q, pr.p, t)).collect();
    PhysicalTrajectory { params: pr, grid: g, times, u, v, stop: StopReason::Level, steps: 0 }
}

fn synthetic() -> &'static PhysicalTrajectory {
    static TR: OnceLock<PhysicalTrajectory> = OnceLock::new();
    TR.get_or_init(|| ode_exact_trajectory(unit(), 1.0))
}

fn thresholds(k0: f64) -> RegionThresholds {
    RegionThresholds {
        delta0: RegionThresholds::default_delta0(k0, &unit()).unwrap(),
        c0: 16.0,
        eta0: 1.0,
        eps0: 0.1,
        alpha0: k0 / 16.0,
        k0,
    }
}

#[test]
fn ode_exact_trajectory_tracks_the_ode_pair() {
    let tr = synthetic();
    let pr = unit();
    for &x in &[5e-4, 3e-3, 0.05] {
        let rp = solve_tx(x, 1.0, 1.0).unwrap();
        for &tau in &[0.0, 0.5, 0.9] {
            let (ut, vt) = extract_rescaled(tr, 0.0, tau, &rp).unwrap();
            let (uh, vh) = ode_hat(tau, 1.0, &pr).unwrap();
            assert!((ut - uh).abs() < 1e-4 && (vt - vh).abs() < 1e-4, "x={x} tau={tau}: {ut} vs {uh}");
        }
    }
}

#[test]
fn ode_exact_trajectory_passes() {
    let tr = synthetic();
    let th = thresholds(1.0);
    let rep = verify_regions(tr, 1.0, tr.t_last(), &th, 1e-4).unwrap();
    assert_eq!(rep.rows.len(), X_SAMPLES);
    assert!(rep.pass_intermediate_point && rep.pass_intermediate_sup);
    for r in &rep.rows {
        assert!(r.tau_lo == 0.0 && r.tau_check < 1.0);
        // off xi = 0 the offset c sigma(x + xi sqrt(sigma)) no longer matches, most visibly as tau -> 1
        assert!(r.dev_u_sup < 0.5 * th.delta0 && r.dev_v_sup < 0.5 * th.delta0, "{r:?}");
    }
    let sens = rep.t_sensitivity.unwrap();
    // dT = 5e-5 dwarfs sigma at the inner edge, so only the bookkeeping is checked here
    assert!((sens.dt - 5e-5).abs() < 1e-18 && sens.max_change > 0.0);
}

#[test]
fn alpha0_must_stay_below_quarter_k0() {
    let tr = synthetic();
    let th = RegionThresholds { alpha0: 0.25, ..thresholds(1.0) };
    assert!(matches!(verify_regions(tr, 1.0, tr.t_last(), &th, 0.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn x_sample_spans_the_intermediate_region() {
    let th = thresholds(1.0);
    let xs = x_sample(1.0, 1.0 - 1e-6, &th).unwrap();
    assert_eq!(xs.len(), X_SAMPLES);
    assert!((xs[0] / (0.25 * (1e-6 * 1e-6f64.ln().abs()).sqrt()) - 1.0).abs() < 1e-9);
    assert!((xs[X_SAMPLES - 1] - 0.1).abs() < 1e-15);
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
    assert!(x_sample(1.0, 1.0, &th).is_err());
    assert!(x_sample(1.0, 0.9, &th).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn loosening_thresholds_never_fails_a_pass(
        delta0 in 1e-4f64..0.05, c0 in 0.01f64..2.0, eta0 in 0.1f64..20.0,
        a in 1.0f64..10.0, b in 1.0f64..10.0, c in 1.0f64..10.0,
    ) {
        let tr = synthetic();
        let tight = RegionThresholds { delta0, c0, eta0, ..thresholds(1.0) };
        let loose = RegionThresholds { delta0: a * delta0, c0: b * c0, eta0: c * eta0, ..tight };
        let l = verify_regions(tr, 1.0, tr.t_last(), &tight, 0.0).unwrap();
        let r = verify_regions(tr, 1.0, tr.t_last(), &loose, 0.0).unwrap();
        prop_assert!(!l.pass || r.pass);
        prop_assert!(!l.pass_intermediate_point || r.pass_intermediate_point);
        prop_assert!(!l.pass_intermediate_sup || r.pass_intermediate_sup);
        prop_assert!(!l.pass_regular || r.pass_regular);
        for (x, y) in l.rows.iter().zip(&r.rows) {
            prop_assert!(!x.pass_point || y.pass_point);
            prop_assert!(!x.pass_sup || y.pass_sup);
        }
    }
}

fn physical_run() -> &'static (PhysicalTrajectory, f64) {
    static RUN: OnceLock<(PhysicalTrajectory, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let pr = unit();
        let spec = InitialDataSpec { d0: 0.0, d1: 0.0, amp: 4.0, s0: 5.0, k0: 1.0, eps0: 0.1, a: 1.0, bump_width: 1.0 };
        let g = Arc::new(PhysGrid::stretched(0.9, 2001, 5e-6).unwrap());
        let (u0, v0) = initial_physical(&spec, &pr, &g).unwrap();
        let opts = PhysicalOptions { stop_level: 1e9, ..Default::default() };
        let tr = run_physical(&pr, g, u0, v0, 0.0, &opts).unwrap();
        let t_blowup = estimate_blowup_time(&tr, 20).unwrap().t_blowup;
        (tr, t_blowup)
    })
}

#[test]
fn physical_rescaled_pair_solves_its_equation() {
    // u~_tau - u~_xixi - e^{p v~} = sigma (u_t - u_xx - e^{p v}); compared relative to the reaction
    let (tr, _) = physical_run();
    let x = &tr.grid.x;
    let c = tr.grid.center();
    let mut worst = 0.0f64;
    for k in (tr.times.len() / 4..tr.times.len() - 1).step_by(17) {
        let (t0, t1, t2) = (tr.times[k - 1], tr.times[k], tr.times[k + 1]);
        for i in (c + 1..c + 400).step_by(13) {
            let f = |j: usize| tr.u[j][i];
            let (h0, h1) = (t1 - t0, t2 - t1);
            let ut =
                (-h1 / (h0 * (h0 + h1))) * f(k - 1) + (h1 - h0) / (h0 * h1) * f(k) + h0 / (h1 * (h0 + h1)) * f(k + 1);
            let (a, b) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let row = &tr.u[k];
            let uxx = 2.0 * (row[i - 1] / (a * (a + b)) - row[i] / (a * b) + row[i + 1] / (b * (a + b)));
            let react = (tr.params.p * tr.v[k][i]).exp();
            worst = worst.max((ut - uxx - react).abs() / react);
        }
    }
    assert!(worst < 1e-2, "relative residual {worst}");
}

#[test]
fn physical_run_starts_near_the_ode_pair() {
    let (tr, t_blowup) = physical_run();
    let th = thresholds(1.0);
    let pr = unit();
    let (u0, _) = ode_hat(0.0, 1.0, &pr).unwrap();
    let mut checked = 0;
    for x in x_sample(*t_blowup, tr.t_last(), &th).unwrap() {
        let rp = solve_tx(x, 1.0, *t_blowup).unwrap();
        if rp.t_of_x < tr.times[0] {
            continue;
        }
        let (ut, _) = extract_rescaled(tr, 0.0, 0.0, &rp).unwrap();
        assert!((ut - u0).abs() < th.delta0, "x={x}: {ut} vs {u0}");
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn fitted_gradient_constant_is_window_stable() {
    let (tr, t_blowup) = physical_run();
    let fit = |eps0: f64| {
        let th = RegionThresholds { eps0, ..thresholds(1.0) };
        let rep = verify_regions(tr, *t_blowup, tr.t_last(), &th, 0.0).unwrap();
        rep.rows.iter().map(|r| r.grad_sup).fold(0.0, f64::max)
    };
    let (wide, narrow) = (fit(0.1), fit(0.05));
    assert!(wide > 0.0 && (wide - narrow).abs() < 0.3 * wide, "{wide} vs {narrow}");
    assert!(wide < thresholds(1.0).c0);
}
