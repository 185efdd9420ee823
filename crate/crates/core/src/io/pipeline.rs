//! Stages, run directories and the derived plot files.
//!
//! A run directory holds `manifest.toml` (written first), the stage's tables,
//! `summary.toml` on completion or `error.toml` on failure, and the `plot_*`
//! files written by [`emit_outputs`]. Nothing written depends on wall-clock
//! time, so equal manifests give byte-identical directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{InitialKind, Mode, RunConfig};
use super::schema::{read_table, write_table, Cell};
use crate::error::{Error, Result};
use crate::model::{final_profile, final_profile_matched, profile_star, Params};
use crate::modes::{profile_deviation, ExitDetector, ModeRecord};
use crate::regions::verify_regions;
use crate::shooting::funnel_map;
use crate::solver::{
    build_initial_data, estimate_blowup_time, initial_physical, profile_state, run, run_physical, Control, PhysGrid,
    SimilarityState,
};
use crate::spectral::build_eigensystem_exact;
use crate::spectral::tables::dump_tables;
use crate::spectral::verify::spectral_checks;

pub const MANIFEST: &str = "manifest.toml";
const LOCK: &str = ".lock";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub mode: Mode,
    pub config_hash: String,
    pub code_version: String,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, mode: Mode) -> Result<Self> {
        Ok(Manifest {
            schema: "manifest".into(),
            schema_version: 1,
            mode,
            config_hash: config.hash()?,
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        let v = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        toml::to_string(&v).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a manifest and checks the recorded hash against its config.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        let h = m.config.hash()?;
        if h != m.config_hash {
            return Err(Error::Config(format!("manifest hash {} does not match its config ({h})", m.config_hash)));
        }
        Ok(m)
    }
}

/// Result of a completed stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub dir: PathBuf,
    /// Failed checks; nonzero only for verification stages.
    pub failures: usize,
    pub summary: toml::Table,
}

struct DirLock(PathBuf);

impl DirLock {
    fn take(dir: &Path) -> Result<Self> {
        let p = dir.join(LOCK);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&p)
            .map_err(|e| Error::Io(format!("cannot lock {}: {e}", dir.display())))?;
        Ok(DirLock(p))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

struct StageResult {
    summary: toml::Table,
    failures: usize,
}

fn table(pairs: Vec<(&str, toml::Value)>) -> toml::Table {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn header(mode: Mode, name: &str) -> toml::Table {
    table(vec![("schema", name.into()), ("schema_version", 1i64.into()), ("mode", mode.as_str().into())])
}

fn write_toml(path: &Path, t: &toml::Table) -> Result<()> {
    fs::write(path, toml::to_string(t).map_err(|e| Error::Io(e.to_string()))?)?;
    Ok(())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid-parameter",
        Error::Domain { .. } => "domain",
        Error::Resonance { .. } => "resonance",
        Error::NonFinite(_) => "non-finite",
        Error::LogArgument { .. } => "log-argument",
        Error::Coverage { .. } => "coverage",
        Error::Ceiling { .. } => "ceiling",
        Error::Overflow { .. } => "overflow",
        Error::Spacing(_) => "spacing",
        Error::NoBlowup(_) => "no-blowup",
        Error::DegreeZero => "degree-zero",
        Error::Shot { .. } => "shot",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

/// Runs one stage into `dir`: manifest, stage tables, summary (or error
/// record), then the derived plot files.
pub fn run_pipeline(cfg: &RunConfig, mode: Mode, dir: &Path) -> Result<Outcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let _lock = DirLock::take(dir)?;
    let manifest = Manifest::new(cfg, mode)?;
    let mpath = dir.join(MANIFEST);
    if mpath.exists() {
        // stages compose in one directory, but only under a single config
        let prev = Manifest::load(&mpath)?;
        if prev.config_hash != manifest.config_hash {
            return Err(Error::Config(format!(
                "{} holds a run with config {}; this config is {}",
                dir.display(),
                prev.config_hash,
                manifest.config_hash
            )));
        }
        if prev.mode != mode {
            fs::rename(&mpath, dir.join(format!("manifest.{}.toml", prev.mode)))?;
            let sum = dir.join("summary.toml");
            if sum.exists() {
                fs::rename(sum, dir.join(format!("summary.{}.toml", prev.mode)))?;
            }
        }
    }
    for stale in ["summary.toml", "error.toml"] {
        let _ = fs::remove_file(dir.join(stale));
    }
    fs::write(&mpath, manifest.to_toml()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let res = pool.install(|| match mode {
        Mode::SpectralVerify => spectral_verify(cfg, dir),
        Mode::Simulate => simulate(cfg, dir),
        Mode::Shoot => shoot(cfg, dir),
        Mode::VerifyRegions => regions(cfg, dir),
        Mode::Sweep => sweep(cfg, dir),
    });
    match res {
        Ok(st) => {
            let mut summary = header(mode, "summary");
            summary.insert("ok".into(), (st.failures == 0).into());
            summary.insert("failures".into(), (st.failures as i64).into());
            summary.extend(st.summary);
            write_toml(&dir.join("summary.toml"), &summary)?;
            emit_outputs(dir)?;
            Ok(Outcome { dir: dir.to_path_buf(), failures: st.failures, summary })
        }
        Err(e) => {
            let mut rec = header(mode, "error");
            rec.insert("kind".into(), error_kind(&e).into());
            rec.insert("message".into(), e.to_string().into());
            write_toml(&dir.join("error.toml"), &rec)?;
            Err(e)
        }
    }
}

/// Re-runs the stage of a manifest (or `mode`, when given) into `dir`.
pub fn replay(manifest: &Path, mode: Option<Mode>, dir: &Path) -> Result<Outcome> {
    let m = Manifest::load(manifest)?;
    run_pipeline(&m.config, mode.unwrap_or(m.mode), dir)
}

fn spectral_verify(cfg: &RunConfig, dir: &Path) -> Result<StageResult> {
    let checks = spectral_checks(&cfg.params, cfg.spectral.m, cfg.spectral.quad_order)?;
    let failures = checks.iter().filter(|c| c.pass() == Some(false)).count();
    write_table(
        &dir.join("spectral_checks.tsv"),
        "spectral_checks",
        checks.iter().map(|c| {
            let kind = if c.tolerance.is_some() { "check" } else { "info" };
            vec![c.name.as_str().into(), kind.into(), c.value.into(), c.tolerance.into(), c.pass().into()]
        }),
    )?;
    let ex = build_eigensystem_exact(&cfg.params, cfg.spectral.m)?;
    fs::write(dir.join("eigensystem_tables.txt"), dump_tables(&ex, true))?;
    let summary = table(vec![("checks", (checks.len() as i64).into())]);
    Ok(StageResult { summary, failures })
}

fn on_lattice(s: f64, s0: f64, every: f64) -> bool {
    let k = ((s - s0) / every).round();
    (s - s0 - k * every).abs() < 1e-9 * every.max(1.0)
}

fn snapshot_rows(st: &SimilarityState) -> Vec<Vec<Cell>> {
    let root = st.s.sqrt();
    st.ys()
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let star = profile_star(y / root, &st.params);
            vec![y.into(), (y / root).into(), st.phi[i].into(), st.psi[i].into(), star.phi.into(), star.psi.into()]
        })
        .collect()
}

fn write_snapshots(dir: &Path, snaps: &[(f64, Vec<Vec<Cell>>)]) -> Result<()> {
    let sub = dir.join("snapshots");
    fs::create_dir_all(&sub)?;
    for (s, rows) in snaps {
        write_table(&sub.join(format!("profile_s{s:09.4}.tsv")), "snapshot", rows.clone())?;
    }
    Ok(())
}

fn write_series(dir: &Path, records: &[ModeRecord], devs: &[f64]) -> Result<()> {
    write_table(
        &dir.join("modes.tsv"),
        "modes",
        records.iter().flat_map(|r| {
            (0..r.theta.len()).map(move |n| {
                vec![r.s.into(), n.into(), r.theta[n].into(), r.theta_tilde[n].into(), r.theta_bar[n].into()]
            })
        }),
    )?;
    write_table(
        &dir.join("norms.tsv"),
        "norms",
        records.iter().zip(devs).map(|(r, &d)| {
            vec![
                r.s.into(),
                r.remainder_norm.into(),
                r.gradient_remainder_norm.into(),
                r.outer_norm.into(),
                r.in_set.into(),
                r.first_violation.map(|v| v.coord.to_string()).into(),
                r.first_violation.map(|v| v.margin).into(),
                d.into(),
                (r.s.sqrt() * d).into(),
            ]
        }),
    )
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<StageResult> {
    let sim = &cfg.simulate;
    let tracker = cfg.tracker()?;
    let grid = Arc::new(cfg.grid()?);
    let st0 = match sim.initial {
        InitialKind::Prepared => build_initial_data(&cfg.spec(sim.d0, sim.d1), &cfg.params, grid)?,
        InitialKind::Profile => profile_state(&cfg.params, grid, cfg.funnel.s0)?,
    };
    let s0 = st0.s;
    let every = cfg.outputs.snapshot_every;
    let mut records = Vec::new();
    let mut devs = Vec::new();
    let mut snaps = Vec::new();
    let mut det = ExitDetector::default();
    let mut last: Option<SimilarityState> = None;
    let res = run(st0, sim.s_end, &cfg.run_options(), |st| {
        let rec = tracker.track(st)?;
        det.push(&rec);
        devs.push(profile_deviation(st, cfg.funnel.k0));
        records.push(rec);
        if on_lattice(st.s, s0, every) {
            snaps.push((st.s, snapshot_rows(st)));
        }
        last = Some(st.clone());
        Ok(Control::Continue)
    });
    let stop = match res {
        Ok(_) => "s_end",
        Err(Error::Ceiling { .. }) => "ceiling",
        Err(e) => return Err(e),
    };
    if let Some(st) = &last {
        if snaps.last().map(|(s, _)| *s) != Some(st.s) {
            snaps.push((st.s, snapshot_rows(st)));
        }
    }
    write_series(dir, &records, &devs)?;
    write_snapshots(dir, &snaps)?;
    let first = &records[0];
    let max0 = first.theta.iter().chain(&first.theta_tilde).fold(0.0f64, |m, t| m.max(t.abs()));
    let mut summary = table(vec![
        ("stop", stop.into()),
        ("records", (records.len() as i64).into()),
        ("s_reached", records.last().map_or(s0, |r| r.s).into()),
        ("max_abs_theta_at_s0", max0.into()),
    ]);
    if let Some(e) = det.exit() {
        summary.insert("exit_s".into(), e.s.into());
        summary.insert("exit_coord".into(), e.coord.to_string().into());
        summary.insert("exit_sign".into(), (e.sign as i64).into());
    }
    Ok(StageResult { summary, failures: 0 })
}

fn shoot(cfg: &RunConfig, dir: &Path) -> Result<StageResult> {
    let pb = cfg.shooting_problem()?;
    let sh = &cfg.shooting;
    let s0 = cfg.funnel.s0;
    let every = cfg.outputs.snapshot_every;
    let (f, extra) = funnel_map(&pb, sh.s_target, sh.margin, sh.max_stages, |st, _| {
        let snap = on_lattice(st.s, s0, every).then(|| (st.s, snapshot_rows(st)));
        (profile_deviation(st, cfg.funnel.k0), snap)
    })?;
    let devs: Vec<f64> = extra.iter().map(|e| e.0).collect();
    let mut snaps: Vec<(f64, Vec<Vec<Cell>>)> = extra.into_iter().filter_map(|e| e.1).collect();
    if snaps.last().map(|(s, _)| *s) != Some(f.final_state.s) {
        snaps.push((f.final_state.s, snapshot_rows(&f.final_state)));
    }
    write_series(dir, &f.records, &devs)?;
    write_snapshots(dir, &snaps)?;
    write_table(
        &dir.join("stages.tsv"),
        "stages",
        f.stages.iter().enumerate().map(|(k, st)| {
            vec![
                k.into(),
                st.s_start.into(),
                st.d0.into(),
                st.d1.into(),
                st.survival.into(),
                st.depth_reached.into(),
                st.stalled.into(),
                st.calls.into(),
                st.other_exits.into(),
            ]
        }),
    )?;
    write_table(
        &dir.join("search_log.tsv"),
        "search_log",
        f.log.iter().enumerate().map(|(k, r)| {
            vec![
                k.into(),
                r.d0.into(),
                r.d1.into(),
                r.s_exit.into(),
                r.exit_coord.map(|c| c.to_string()).into(),
                (r.exit_sign as i64).into(),
                r.theta0.into(),
                r.theta1.into(),
                r.s_reached.into(),
            ]
        }),
    )?;
    let out_of_set = f.records.iter().filter(|r| !r.in_set).count();
    let other: usize = f.stages.iter().map(|s| s.other_exits).sum();
    let stalled = f.stages.iter().filter(|s| s.stalled).count();
    let summary = table(vec![
        ("stages", (f.stages.len() as i64).into()),
        ("s_reached", f.final_state.s.into()),
        ("classify_calls", (f.log.len() as i64).into()),
        ("other_exits", (other as i64).into()),
        ("stalled_stages", (stalled as i64).into()),
        ("retained_out_of_set", (out_of_set as i64).into()),
        ("accepted", (out_of_set == 0 && stalled == 0 && f.final_state.s >= sh.s_target - 1e-9).into()),
    ]);
    Ok(StageResult { summary, failures: 0 })
}

/// `(d0, d1)` of the first shooting stage in `dir`, if a shoot ran there
/// from the same `s0` (a pair selected at another `s0` means nothing here).
fn shot_parameters(dir: &Path, s0: f64) -> Result<Option<(f64, f64)>> {
    let p = dir.join("stages.tsv");
    if !p.exists() {
        return Ok(None);
    }
    let (_, rows) = read_table(&fs::read_to_string(p)?)?;
    let (start, d0, d1) = (rows.floats("s_start")?, rows.floats("d0")?, rows.floats("d1")?);
    Ok(match start.first() {
        Some(&s) if s == s0 => Some((d0[0], d1[0])),
        _ => None,
    })
}

fn regions(cfg: &RunConfig, dir: &Path) -> Result<StageResult> {
    let ph = &cfg.physical;
    let shot = shot_parameters(dir, ph.s0)?;
    let (d0, d1) = shot.unwrap_or((cfg.simulate.d0, cfg.simulate.d1));
    let spec = cfg.physical_spec(d0, d1);
    spec.validate()?;
    let pr = cfg.params;
    let g = Arc::new(PhysGrid::stretched(ph.half_width, ph.points, ph.h_min)?);
    let (u0, v0) = initial_physical(&spec, &pr, &g)?;
    let traj = run_physical(&pr, g.clone(), u0, v0, 0.0, &cfg.physical_options())?;
    let fit = estimate_blowup_time(&traj, ph.window)?;
    let th = cfg.thresholds()?;
    let rep = verify_regions(&traj, fit.t_blowup, traj.t_last(), &th, ph.rel_dt)?;
    let c = g.center();
    write_table(
        &dir.join("physical.tsv"),
        "physical",
        traj.times.iter().enumerate().map(|(k, &t)| {
            let rem = fit.t_blowup - t;
            let gap = traj.u[k].iter().zip(&traj.v[k]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            vec![
                t.into(),
                rem.into(),
                traj.u[k][c].into(),
                traj.v[k][c].into(),
                (rem.ln() + pr.q * traj.u[k][c]).exp().into(),
                (rem.ln() + pr.p * traj.v[k][c]).exp().into(),
                gap.into(),
            ]
        }),
    )?;
    write_table(
        &dir.join("region_rows.tsv"),
        "region_rows",
        rep.rows.iter().map(|r| {
            vec![
                r.x.into(),
                r.sigma.into(),
                r.tau_lo.into(),
                r.tau_check.into(),
                r.dev_u_point.into(),
                r.dev_v_point.into(),
                r.dev_u_sup.into(),
                r.dev_v_sup.into(),
                r.grad_point.into(),
                r.grad_sup.into(),
                r.pass_point.into(),
                r.pass_sup.into(),
            ]
        }),
    )?;
    let last = traj.times.len() - 1;
    write_table(
        &dir.join("final_state.tsv"),
        "final_state",
        (c..g.len()).map(|i| vec![g.x[i].into(), traj.u[last][i].into(), traj.v[last][i].into()]),
    )?;
    let mut summary = table(vec![
        ("d0", d0.into()),
        ("d1", d1.into()),
        ("d_source", if shot.is_some() { "shoot" } else { "simulate" }.into()),
        ("t_blowup", fit.t_blowup.into()),
        ("fit_residual", fit.residual.into()),
        ("t_last", traj.t_last().into()),
        ("steps", (traj.steps as i64).into()),
        ("delta0", th.delta0.into()),
        ("C0", th.c0.into()),
        ("eta0", th.eta0.into()),
        ("max_dev_point", rep.rows.iter().map(|r| r.dev_u_point.max(r.dev_v_point)).fold(0.0, f64::max).into()),
        ("max_grad_point", rep.rows.iter().map(|r| r.grad_point).fold(0.0, f64::max).into()),
        ("drift", rep.drift.into()),
        ("drift_dx", rep.drift_dx.into()),
        ("pass_intermediate_point", rep.pass_intermediate_point.into()),
        ("pass_intermediate_sup", rep.pass_intermediate_sup.into()),
        ("pass_regular", rep.pass_regular.into()),
        ("pass", rep.pass.into()),
    ]);
    if let Some(s) = rep.t_sensitivity {
        summary.insert("sensitivity_dt".into(), s.dt.into());
        summary.insert("sensitivity_max_change".into(), s.max_change.into());
    }
    let failures =
        [rep.pass_intermediate_point, rep.pass_intermediate_sup, rep.pass_regular].iter().filter(|p| !**p).count();
    Ok(StageResult { summary, failures })
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn sweep(cfg: &RunConfig, dir: &Path) -> Result<StageResult> {
    let mode = cfg.sweep.mode;
    let tasks: Vec<(usize, RunConfig)> = cfg
        .sweep
        .points
        .iter()
        .enumerate()
        .map(|(k, pt)| {
            let mut c = cfg.clone();
            c.params = Params { p: pt.p, q: pt.q, mu: pt.mu, dim: 1 };
            c.sweep.points.clear();
            c.workers = 1;
            (k, c)
        })
        .collect();
    // each task owns its subdirectory; the merge below is sequential
    let results: Vec<Result<Outcome>> =
        tasks.par_iter().map(|(k, c)| run_pipeline(c, mode, &dir.join(format!("task-{k:03}")))).collect();
    let mut failures = 0;
    write_table(
        &dir.join("sweep.tsv"),
        "sweep",
        tasks.iter().zip(&results).map(|((k, c), r)| {
            let (ok, fails, err) = match r {
                Ok(o) => (o.failures == 0, Some(o.failures), None),
                Err(e) => (false, None, Some(one_line(&e.to_string()))),
            };
            failures += usize::from(!ok);
            vec![
                (*k).into(),
                c.params.p.into(),
                c.params.q.into(),
                c.params.mu.into(),
                mode.as_str().into(),
                ok.into(),
                fails.into(),
                err.into(),
            ]
        }),
    )?;
    let summary = table(vec![("tasks", (tasks.len() as i64).into())]);
    Ok(StageResult { summary, failures })
}

/// Writes the plot files derivable from the stage tables in `dir`. Aborts
/// when the manifest is missing (a partial or foreign directory). Returns the
/// files written; rerunning on an unchanged directory rewrites identical bytes.
pub fn emit_outputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mpath = dir.join(MANIFEST);
    if !mpath.exists() {
        return Err(Error::Io(format!("{}: no manifest; not a completed run directory", dir.display())));
    }
    let m = Manifest::load(&mpath)?;
    let mut out = Vec::new();
    let read = |name: &str| -> Result<Option<super::schema::Rows>> {
        let p = dir.join(name);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(read_table(&fs::read_to_string(p)?)?.1))
    };
    if let Some(rows) = read("modes.tsv")? {
        let (s, n) = (rows.floats("s")?, rows.floats("n")?);
        let (th, tb) = (rows.floats("theta")?, rows.floats("theta_bar")?);
        let p = dir.join("plot_s_theta2.tsv");
        write_table(
            &p,
            "plot_s_theta2",
            (0..s.len())
                .filter(|&k| n[k] == 2.0)
                .map(|k| vec![s[k].into(), th[k].into(), tb[k].into(), (s[k] * th[k]).into(), (s[k] * tb[k]).into()]),
        )?;
        out.push(p);
    }
    if let Some(rows) = read("norms.tsv")? {
        let (s, d) = (rows.floats("s")?, rows.floats("profile_deviation")?);
        let p = dir.join("plot_deviation.tsv");
        write_table(
            &p,
            "plot_deviation",
            s.iter().zip(&d).map(|(s, d)| vec![(*s).into(), (*d).into(), (s.sqrt() * d).into()]),
        )?;
        out.push(p);
    }
    if let Some(rows) = read("final_state.tsv")? {
        let (x, u) = (rows.floats("x")?, rows.floats("u")?);
        let pr = m.config.params;
        let mut body = Vec::new();
        for (x, u) in x.into_iter().zip(u) {
            if !(x > 0.0 && x <= 0.1) {
                continue;
            }
            let (a, _) = final_profile(x, &pr)?;
            let (b, _) = final_profile_matched(x, &pr)?;
            body.push(vec![
                x.into(),
                u.into(),
                a.into(),
                ((u - a).abs() / a.abs()).into(),
                b.into(),
                ((u - b).abs() / b.abs()).into(),
            ]);
        }
        let p = dir.join("plot_final_profile.tsv");
        write_table(&p, "plot_final_profile", body)?;
        out.push(p);
    }
    Ok(out)
}
