use std::sync::Arc;

use blowup_core::model::Params;
use blowup_core::modes::*;
use blowup_core::solver::{profile_state, Grid, GridKind, SimilarityState};
use blowup_core::spectral::poly;
use blowup_core::Error;
use proptest::prelude::*;

fn cfg() -> ShrinkingSetConfig {
    ShrinkingSetConfig { amp: 4.0, k0: 2.0, m: 14 }
}

fn grid() -> Arc<Grid> {
    Arc::new(Grid::new(GridKind::ScaledZ, 8.0, 1025).unwrap())
}

/// The approximate profile plus `eps` times mode n (dual pair if `!stable`).
fn with_mode(tr: &Tracker, s: f64, n: usize, stable: bool, eps: f64) -> SimilarityState {
    let mut st = profile_state(&tr.params, grid(), s).unwrap();
    let (f, g) = tr.sys.pair_monomial(n, stable);
    for (i, y) in st.ys().into_iter().enumerate() {
        st.phi[i] += eps * poly::eval(&f, y);
        st.psi[i] += eps * poly::eval(&g, y);
    }
    st
}

#[test]
fn profile_state_has_no_modes() {
    for pr in [Params::new(1.0, 1.0, 1.0).unwrap(), Params::new(1.6, 0.7, 2.1).unwrap()] {
        let tr = Tracker::new(&pr, cfg(), 30).unwrap();
        for s in [20.0, 45.0] {
            let rec = tr.track(&profile_state(&pr, grid(), s).unwrap()).unwrap();
            assert!(rec.theta.iter().chain(&rec.theta_tilde).all(|t| t.abs() < 1e-8));
            assert!(rec.remainder_norm < 1e-8 && rec.outer_norm < 1e-8);
            assert!(rec.in_set && rec.first_violation.is_none());
        }
    }
}

#[test]
fn single_mode_is_recovered() {
    let pr = Params::new(1.3, 0.9, 1.7).unwrap();
    let tr = Tracker::new(&pr, cfg(), 30).unwrap();
    let eps = 1e-3;
    for (n, stable) in [(2, true), (0, true), (1, true), (3, true), (2, false)] {
        let rec = tr.track(&with_mode(&tr, 20.0, n, stable, eps)).unwrap();
        for j in 0..=14 {
            let want = if j == n && stable { eps } else { 0.0 };
            let want_t = if j == n && !stable { eps } else { 0.0 };
            assert!((rec.theta[j] - want).abs() < 1e-8, "n={n} j={j}: {}", rec.theta[j]);
            assert!((rec.theta_tilde[j] - want_t).abs() < 1e-8, "n={n} j={j}: {}", rec.theta_tilde[j]);
        }
        assert!(rec.remainder_norm < 1e-8);
    }
}

#[test]
fn uncovered_nodes_are_an_error() {
    let pr = Params::new(1.0, 1.0, 1.0).unwrap();
    let tr = Tracker::new(&pr, cfg(), 30).unwrap();
    let g = Arc::new(Grid::new(GridKind::FixedY, 2.0, 257).unwrap());
    let st = profile_state(&pr, g, 20.0).unwrap();
    assert!(matches!(tr.track(&st), Err(Error::Coverage { .. })));
}

#[test]
fn config_validation() {
    assert!(ShrinkingSetConfig { amp: 0.5, ..cfg() }.validate().is_err());
    assert!(ShrinkingSetConfig { m: 13, ..cfg() }.validate().is_err());
    assert!(cfg().bounds(2.0).is_err());
    let b = cfg().bounds(20.0).unwrap();
    assert_eq!(b.theta[0], 4.0 / 400.0);
    assert_eq!(b.theta_tilde[2], 16.0 / 400.0);
    assert!((b.theta[2] - 256.0 * 20f64.ln() / 400.0).abs() < 1e-15);
    assert!((b.theta[5] - 4f64.powi(5) * 20f64.powf(-3.0)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn thresholds_are_positive_and_decreasing(
        amp in 1.0f64..20.0, m in 2usize..10, s in 3.0f64..500.0, ds in 0.01f64..100.0
    ) {
        let c = ShrinkingSetConfig { amp, k0: 1.0, m: 2 * m };
        let (a, b) = (c.bounds(s).unwrap(), c.bounds(s + ds).unwrap());
        let lists = |x: &Bounds| {
            let mut v = x.theta.clone();
            v.extend(&x.theta_tilde);
            v.extend([x.remainder, x.gradient_remainder, x.outer]);
            v
        };
        for (l, r) in lists(&a).iter().zip(lists(&b)) {
            prop_assert!(*l > 0.0 && r > 0.0 && r < *l);
        }
    }
}

fn synthetic(s: &[f64], t0: impl Fn(f64) -> f64, t1: impl Fn(f64) -> f64, t2: impl Fn(f64) -> f64) -> Vec<ModeRecord> {
    s.iter()
        .map(|&s| ModeRecord {
            s,
            theta: vec![t0(s), t1(s), t2(s)],
            theta_tilde: vec![0.0; 3],
            theta_bar: vec![0.0; 3],
            remainder_norm: 0.0,
            gradient_remainder_norm: 0.0,
            outer_norm: 0.0,
            in_set: true,
            first_violation: None,
            violations: vec![],
        })
        .collect()
}

#[test]
fn residuals_vanish_on_exact_mode_solutions() {
    let s: Vec<f64> = (0..21).map(|k| 20.0 + 0.05 * k as f64).collect();
    let recs = synthetic(&s, |s| 1e-2 * (s - 20.0).exp(), |s| 1e-2 * (0.5 * (s - 20.0)).exp(), |s| -3.0 / (s * s));
    let rep = ode_residuals(&recs).unwrap();
    assert_eq!(rep.s.len(), 19);
    // five-point slopes away from the ends
    for k in 1..rep.s.len() - 1 {
        let s2 = rep.s[k] * rep.s[k];
        assert!(rep.growth0[k] / s2 < 1e-8, "{}", rep.growth0[k] / s2);
        assert!(rep.growth1[k] / s2 < 1e-8);
        assert!(rep.null[k] < 1e-6);
    }
}

#[test]
fn null_residual_detects_slow_decay() {
    let s: Vec<f64> = (0..41).map(|k| 20.0 + 0.05 * k as f64).collect();
    let recs = synthetic(&s, |_| 0.0, |_| 0.0, |s| -1.0 / (4.0 * s));
    let rep = ode_residuals(&recs).unwrap();
    // theta_2' + 2 theta_2 / s = -1/(4 s^2), so s^3 |.| = s / 4
    for (s, r) in rep.s.iter().zip(&rep.null).skip(1).take(rep.s.len() - 2) {
        assert!((r - s / 4.0).abs() < 1e-6 * s);
    }
}

#[test]
fn uneven_spacing_is_rejected() {
    let s = [20.0, 20.05, 20.10, 20.16, 20.21];
    let recs = synthetic(&s, |_| 0.0, |_| 0.0, |_| 0.0);
    assert!(matches!(ode_residuals(&recs), Err(Error::Spacing(_))));
    assert!(ode_residuals(&recs[..2]).is_err());
}

#[test]
fn constructed_theta0_crossing_is_detected() {
    let pr = Params::new(1.0, 1.0, 1.0).unwrap();
    let tr = Tracker::new(&pr, cfg(), 30).unwrap();
    // theta_0 = -(A / 2 s1^2) e^{s - s1} crosses -A/s^2 shortly before s1 + ln 2
    let s1 = 20.0;
    let recs: Vec<ModeRecord> = (0..30)
        .map(|k| {
            let s = s1 + 0.05 * k as f64;
            let eps = -(4.0 / (2.0 * s1 * s1)) * (s - s1).exp();
            tr.track(&with_mode(&tr, s, 0, true, eps)).unwrap()
        })
        .collect();
    let ex = check_exit(&recs).unwrap();
    assert_eq!(ex.coord, Coord::Theta(0));
    assert_eq!(ex.sign, -1);
    let crossing = recs.iter().find(|r| r.theta[0].abs() > 4.0 / (r.s * r.s)).unwrap().s;
    assert_eq!(ex.s, crossing);
    assert!(ex.s > s1 + 0.5 && ex.s <= s1 + 2f64.ln());
    assert!(check_exit(&recs[..10]).is_none());

    let mut det = ExitDetector::default();
    let mut streamed = None;
    for r in &recs {
        streamed = det.push(r);
    }
    assert_eq!(streamed, Some(ex));
    assert_eq!(det.exit(), Some(ex));
}

#[test]
fn coordinates_display_and_classify() {
    assert_eq!(Coord::Theta(0).to_string(), "theta_0");
    assert_eq!(Coord::ThetaTilde(2).to_string(), "theta_tilde_2");
    assert!(Coord::Theta(1).is_unstable());
    assert!(!Coord::Theta(2).is_unstable() && !Coord::Outer.is_unstable());
}
