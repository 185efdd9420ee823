use std::fs;
use std::path::Path;

use blowup_core::io::config::SweepPoint;
use blowup_core::io::schema::{check_dir, read_table, render_table, schemas, Cell, Format};
use blowup_core::io::{emit_outputs, replay, run_pipeline, InitialKind, Manifest, Mode, RunConfig, MANIFEST};
use blowup_core::Error;
use proptest::prelude::*;

fn profile_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.simulate.initial = InitialKind::Profile;
    c.simulate.s_end = c.funnel.s0 + 0.5;
    c.outputs.snapshot_every = 0.25;
    c
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

#[test]
fn default_config_round_trips() {
    let c = RunConfig::default();
    let back = RunConfig::from_toml(&c.canonical().unwrap()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash().unwrap(), c.hash().unwrap());
}

#[test]
fn edited_config_round_trips() {
    let mut c = profile_config();
    c.params.mu = 1.7;
    c.funnel.delta0 = Some(0.3);
    c.sweep.points = vec![SweepPoint { p: 1.0, q: 2.0, mu: 0.5 }, SweepPoint { p: 0.1, q: 3.0, mu: 1.0 / 3.0 }];
    c.workers = 3;
    let back = RunConfig::from_toml(&c.canonical().unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn canonical_form_has_sorted_keys() {
    let text = profile_config().canonical().unwrap();
    let mut keys: Vec<Vec<String>> = vec![vec![]];
    for line in text.lines() {
        if line.starts_with('[') {
            keys.push(vec![]);
        } else if let Some((k, _)) = line.split_once(" = ") {
            keys.last_mut().unwrap().push(k.to_string());
        }
    }
    for section in keys {
        let mut sorted = section.clone();
        sorted.sort();
        assert_eq!(section, sorted);
    }
}

#[test]
fn hash_ignores_key_order_and_sees_values() {
    let a = RunConfig::from_toml("workers = 2\n[params]\nmu = 2.0\nq = 1.0\np = 1.0\ndim = 1\n").unwrap();
    let b = RunConfig::from_toml("[params]\ndim = 1\np = 1.0\nq = 1.0\nmu = 2.0\n[outputs]\n").unwrap();
    let mut b = b;
    b.workers = 2;
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    let h = a.hash().unwrap();
    assert_eq!(h.len(), 64);
    assert!(h.bytes().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    b.params.mu = 2.0000000000000004;
    assert_ne!(a.hash().unwrap(), b.hash().unwrap());
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        "nonsense = 1\n",
        "[funnel]\nA = 4.0\nbogus = 1\n",
        "workers = 0\n",
        "[funnel]\nK0 = 2.0\nalpha0 = 0.5\n",
        "[sweep]\nmode = \"sweep\"\n",
        "[sweep]\nmode = \"fly\"\n",
        "[outputs]\ncadence = -1.0\n",
        "[[sweep.points]]\np = -1.0\nq = 1.0\nmu = 1.0\n",
    ] {
        assert!(
            matches!(RunConfig::from_toml(text), Err(Error::Config(_)) | Err(Error::InvalidParameter(_))),
            "{text}"
        );
    }
}

#[test]
fn mode_names_round_trip() {
    for m in Mode::ALL {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert!(matches!("simulation".parse::<Mode>(), Err(Error::Config(_))));
}

#[test]
fn bundled_schemas_are_consistent() {
    let all = schemas();
    assert_eq!(all.len(), 16);
    for s in all {
        match s.format {
            Format::Tsv => assert!(!s.columns.is_empty() && s.required.is_empty(), "{}", s.name),
            Format::Toml => assert!(s.columns.is_empty() && !s.required.is_empty(), "{}", s.name),
        }
        let mut names: Vec<_> = s.columns.iter().map(|c| &c.name).collect();
        names.dedup();
        assert_eq!(names.len(), s.columns.len());
    }
}

#[test]
fn tables_reject_misfit_cells() {
    let ok = vec![Cell::F(1.0), Cell::I(2), Cell::F(0.0), Cell::F(0.0), Cell::F(0.0)];
    assert!(render_table("modes", vec![ok.clone()]).is_ok());
    let mut nan = ok.clone();
    nan[0] = Cell::F(f64::NAN);
    assert!(render_table("modes", vec![nan]).is_err());
    let mut wrong = ok.clone();
    wrong[1] = Cell::F(2.0);
    assert!(render_table("modes", vec![wrong]).is_err());
    let mut missing = ok;
    missing[2] = Cell::None;
    assert!(render_table("modes", vec![missing]).is_err());
    assert!(render_table("no_such_table", Vec::<Vec<Cell>>::new()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn floats_survive_a_table_round_trip(xs in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..20)) {
        let rows = xs.iter().enumerate().map(|(k, &x)| vec![Cell::F(x), Cell::I(k as i64), Cell::F(-x), Cell::F(x / 3.0), Cell::F(x)]);
        let text = render_table("modes", rows).unwrap();
        let (sc, back) = read_table(&text).unwrap();
        prop_assert_eq!(&sc.name, "modes");
        let s = back.floats("s").unwrap();
        let tt = back.floats("theta_tilde").unwrap();
        for (k, &x) in xs.iter().enumerate() {
            prop_assert_eq!(s[k].to_bits(), x.to_bits());
            prop_assert_eq!(tt[k].to_bits(), (x / 3.0).to_bits());
        }
    }
}

#[test]
fn spectral_verify_run_is_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sv");
    let o = run_pipeline(&RunConfig::default(), Mode::SpectralVerify, &dir).unwrap();
    assert_eq!(o.failures, 0);
    assert_eq!(o.summary["ok"].as_bool(), Some(true));
    let checked = check_dir(&dir).unwrap();
    assert_eq!(checked.len(), 4);
    for (p, r) in checked {
        assert!(r.is_ok(), "{}: {r:?}", p.display());
    }
    assert!(!dir.join(".lock").exists());
}

#[test]
fn simulate_from_the_profile_starts_at_zero_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_pipeline(&profile_config(), Mode::Simulate, tmp.path()).unwrap();
    assert!(o.summary["max_abs_theta_at_s0"].as_float().unwrap() < 1e-6);
    let (_, modes) = read_table(&fs::read_to_string(tmp.path().join("modes.tsv")).unwrap()).unwrap();
    let s0 = profile_config().funnel.s0;
    let (s, th) = (modes.floats("s").unwrap(), modes.floats("theta").unwrap());
    let first: Vec<f64> = s.iter().zip(&th).filter(|(s, _)| **s == s0).map(|(_, t)| t.abs()).collect();
    assert!(!first.is_empty() && first.iter().all(|t| *t < 1e-6));
    let snaps = fs::read_dir(tmp.path().join("snapshots")).unwrap().count();
    assert_eq!(snaps, 3);
    for (p, r) in check_dir(tmp.path()).unwrap() {
        assert!(r.is_ok(), "{}: {r:?}", p.display());
    }
}

#[test]
fn emit_is_idempotent_and_needs_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&profile_config(), Mode::Simulate, tmp.path()).unwrap();
    let before = read_dir_bytes(tmp.path());
    let files = emit_outputs(tmp.path()).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(read_dir_bytes(tmp.path()), before);

    fs::remove_file(tmp.path().join(MANIFEST)).unwrap();
    assert!(matches!(emit_outputs(tmp.path()), Err(Error::Io(_))));
}

#[test]
fn replaying_a_manifest_reproduces_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&profile_config(), Mode::Simulate, &a).unwrap();
    replay(&a.join(MANIFEST), None, &b).unwrap();
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn tampered_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&RunConfig::default(), Mode::SpectralVerify, tmp.path()).unwrap();
    let p = tmp.path().join(MANIFEST);
    let text = fs::read_to_string(&p).unwrap().replace("quad_order = 30", "quad_order = 31");
    fs::write(&p, text).unwrap();
    assert!(matches!(Manifest::load(&p), Err(Error::Config(_))));
}

#[test]
fn stages_compose_under_one_config_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = profile_config();
    run_pipeline(&cfg, Mode::SpectralVerify, tmp.path()).unwrap();
    run_pipeline(&cfg, Mode::Simulate, tmp.path()).unwrap();
    assert!(tmp.path().join("manifest.spectral-verify.toml").exists());
    assert!(tmp.path().join("summary.spectral-verify.toml").exists());
    assert_eq!(Manifest::load(&tmp.path().join(MANIFEST)).unwrap().mode, Mode::Simulate);

    let mut other = cfg.clone();
    other.params.mu = 2.0;
    assert!(matches!(run_pipeline(&other, Mode::Simulate, tmp.path()), Err(Error::Config(_))));
    for (p, r) in check_dir(tmp.path()).unwrap() {
        assert!(r.is_ok(), "{}: {r:?}", p.display());
    }
}

#[test]
fn a_locked_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(".lock"), "").unwrap();
    assert!(matches!(run_pipeline(&RunConfig::default(), Mode::SpectralVerify, tmp.path()), Err(Error::Io(_))));
}

#[test]
fn stage_failure_leaves_an_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("stages.tsv"), "# schema: stages v1\nnot a table\n").unwrap();
    assert!(run_pipeline(&RunConfig::default(), Mode::VerifyRegions, tmp.path()).is_err());
    let rec: toml::Table = toml::from_str(&fs::read_to_string(tmp.path().join("error.toml")).unwrap()).unwrap();
    assert_eq!(rec["schema"].as_str(), Some("error"));
    assert_eq!(rec["mode"].as_str(), Some("verify-regions"));
    assert_eq!(rec["kind"].as_str(), Some("io"));
    assert!(!tmp.path().join("summary.toml").exists());
}

#[test]
fn sweep_merges_per_task_results() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.workers = 2;
    cfg.spectral.m = 8;
    cfg.sweep.points = vec![
        SweepPoint { p: 1.0, q: 1.0, mu: 1.0 },
        SweepPoint { p: 0.7, q: 2.3, mu: 1.9 },
        SweepPoint { p: 2.9, q: 0.6, mu: 0.55 },
    ];
    let o = run_pipeline(&cfg, Mode::Sweep, tmp.path()).unwrap();
    assert_eq!(o.failures, 0);
    let (_, rows) = read_table(&fs::read_to_string(tmp.path().join("sweep.tsv")).unwrap()).unwrap();
    let ok = rows.col("ok").unwrap();
    let flags: Vec<&str> = rows.rows.iter().map(|r| r[ok].as_str()).collect();
    assert_eq!(flags, ["true"; 3]);
    assert!(tmp.path().join("task-001/spectral_checks.tsv").exists());
    for (p, r) in check_dir(tmp.path()).unwrap() {
        assert!(r.is_ok(), "{}: {r:?}", p.display());
    }
}
