//! Search for the shooting pair `(d0, d1)` whose trajectory stays in the
//! shrinking set longest.
//!
//! Each trial is labelled by the angle of `(theta_0, theta_1)` at its exit,
//! a point on the boundary of the unstable square. A rectangle brackets a root
//! when its boundary labels wind once around the origin; edges are sampled
//! finer wherever the label turns quickly. Rectangles are split on a 3x3
//! lattice and a bracketing child is kept.
//! The split sits slightly off the midpoint so that lattice lines never land on
//! `d1 = 0`, where even data puts the root and theta_1 is pure rounding noise.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{Coord, ExitDetector, ModeRecord, Tracker};
use crate::solver::{build_initial_data, perturb, run, Control, Grid, InitialDataSpec, RunOptions, SimilarityState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub d0: f64,
    pub d1: f64,
    /// `None` when the trial survived to `s_max`.
    pub s_exit: Option<f64>,
    pub exit_coord: Option<Coord>,
    pub exit_sign: i8,
    /// Unstable coordinates at the exit (or at `s_max`).
    pub theta0: f64,
    pub theta1: f64,
    /// Last time reached.
    pub s_reached: f64,
}

impl ExitRecord {
    /// Quadrant of `(theta_0, theta_1)`, counter-clockwise from (+, +).
    pub fn quadrant(&self) -> u8 {
        match (self.theta0 >= 0.0, self.theta1 >= 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        }
    }

    /// Exit direction in `(-pi, pi]`.
    pub fn angle(&self) -> f64 {
        self.theta1.atan2(self.theta0)
    }

    /// Time used to rank trials: the exit time, or `s_reached` on survival.
    pub fn survival(&self) -> f64 {
        self.s_exit.unwrap_or(self.s_reached)
    }
}

/// Anything that maps a shooting pair to an exit.
pub trait Classifier: Sync {
    fn classify(&self, d0: f64, d1: f64) -> Result<ExitRecord>;
}

/// `[d0_lo, d0_hi] x [d1_lo, d1_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub d0: (f64, f64),
    pub d1: (f64, f64),
}

impl Rect {
    pub fn square(half: f64) -> Self {
        Rect { d0: (-half, half), d1: (-half, half) }
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.d0.0 + self.d0.1), 0.5 * (self.d1.0 + self.d1.1))
    }

    /// Interior lattice point used for subdivision.
    pub fn split(&self) -> (f64, f64) {
        (self.d0.0 + SPLIT * (self.d0.1 - self.d0.0), self.d1.0 + SPLIT * (self.d1.1 - self.d1.0))
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.d0.1 > self.d0.0 && self.d1.1 > self.d1.0)
    }

    pub fn width(&self) -> f64 {
        (self.d0.1 - self.d0.0).max(self.d1.1 - self.d1.0)
    }
}

pub const SPLIT: f64 = 15.0 / 32.0;

/// Signed turn from `a`'s exit direction to `b`'s, in `(-pi, pi]`.
fn turn(a: &ExitRecord, b: &ExitRecord) -> f64 {
    use std::f64::consts::PI;
    let mut d = b.angle() - a.angle();
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Winding number of the corner exit directions listed counter-clockwise.
pub fn winding(corners: [&ExitRecord; 4]) -> i32 {
    let total: f64 = (0..4).map(|k| turn(corners[k], corners[(k + 1) % 4])).sum();
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

/// Edges are subdivided while one step turns the label by more than this.
pub const MAX_TURN: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub rect: Rect,
    pub winding: i32,
    /// Latest minimal corner survival among bracketing children.
    pub min_corner_survival: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub d0: f64,
    pub d1: f64,
    pub record: ExitRecord,
    pub levels: Vec<Level>,
    /// Every classify call, in evaluation order.
    pub log: Vec<ExitRecord>,
    /// Set when no child bracketed before the depth limit.
    pub stalled: bool,
}

/// Memoized classify calls; every label is computed once so neighbouring
/// rectangles see the same values.
struct Labels<'a, C: Classifier> {
    c: &'a C,
    refine: usize,
    seen: HashMap<(u64, u64), ExitRecord>,
    log: Vec<ExitRecord>,
}

impl<'a, C: Classifier> Labels<'a, C> {
    fn key(p: (f64, f64)) -> (u64, u64) {
        (p.0.to_bits(), p.1.to_bits())
    }

    fn get_many(&mut self, pts: &[(f64, f64)]) -> Result<Vec<ExitRecord>> {
        let mut fresh: Vec<(f64, f64)> = Vec::new();
        for &p in pts {
            if !self.seen.contains_key(&Self::key(p)) && !fresh.contains(&p) {
                fresh.push(p);
            }
        }
        let c = self.c;
        let out: Vec<ExitRecord> = fresh.par_iter().map(|&(a, b)| c.classify(a, b)).collect::<Result<_>>()?;
        for (p, r) in fresh.iter().zip(out) {
            self.seen.insert(Self::key(*p), r);
            self.log.push(r);
        }
        Ok(pts.iter().map(|&p| self.seen[&Self::key(p)]).collect())
    }

    fn get(&mut self, p: (f64, f64)) -> Result<ExitRecord> {
        Ok(self.get_many(&[p])?[0])
    }

    /// Label turn along the segment `a -> b`, refined where it is too coarse.
    fn edge(&mut self, a: (f64, f64), b: (f64, f64), budget: usize) -> Result<f64> {
        let (ra, rb) = (self.get(a)?, self.get(b)?);
        let d = turn(&ra, &rb);
        if d.abs() <= MAX_TURN || budget == 0 {
            return Ok(d);
        }
        let m = (a.0 + SPLIT * (b.0 - a.0), a.1 + SPLIT * (b.1 - a.1));
        Ok(self.edge(a, m, budget - 1)? + self.edge(m, b, budget - 1)?)
    }

    fn corners(&mut self, r: &Rect) -> Result<[ExitRecord; 4]> {
        let v = self.get_many(&corner_points(r))?;
        Ok([v[0], v[1], v[2], v[3]])
    }

    fn winding(&mut self, r: &Rect) -> Result<i32> {
        let p = corner_points(r);
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge(p[k], p[(k + 1) % 4], self.refine)?;
        }
        Ok((total / (2.0 * std::f64::consts::PI)).round() as i32)
    }
}

/// Corners counter-clockwise from `(d0_lo, d1_lo)`.
fn corner_points(r: &Rect) -> [(f64, f64); 4] {
    [(r.d0.0, r.d1.0), (r.d0.1, r.d1.0), (r.d0.1, r.d1.1), (r.d0.0, r.d1.1)]
}

/// Recursive bracketing subdivision of `rect` down to `depth` levels. Each
/// rectangle edge may be split up to `refine` times to resolve its winding.
pub fn search<C: Classifier>(c: &C, rect: Rect, depth: usize, refine: usize) -> Result<SearchResult> {
    let mut lab = Labels { c, refine, seen: HashMap::new(), log: Vec::new() };
    if rect.is_degenerate() {
        let (d0, d1) = rect.center();
        let record = lab.get((d0, d1))?;
        return Ok(SearchResult { d0, d1, record, levels: vec![], log: lab.log, stalled: false });
    }
    let cr = lab.corners(&rect)?;
    let w = lab.winding(&rect)?;
    if w == 0 {
        return Err(Error::DegreeZero);
    }
    let mut cur = rect;
    let mut levels = vec![Level { rect, winding: w, min_corner_survival: min_survival(&cr) }];
    let mut stalled = false;
    for _ in 0..depth {
        let (x0, x2) = cur.d0;
        let (y0, y2) = cur.d1;
        let (x1, y1) = cur.split();
        lab.get_many(&[(x1, y0), (x2, y1), (x1, y2), (x0, y1), (x1, y1)])?;
        let children = [
            Rect { d0: (x0, x1), d1: (y0, y1) },
            Rect { d0: (x1, x2), d1: (y0, y1) },
            Rect { d0: (x1, x2), d1: (y1, y2) },
            Rect { d0: (x0, x1), d1: (y1, y2) },
        ];
        let mut best: Option<(Rect, i32, f64)> = None;
        for rc in children {
            let wk = lab.winding(&rc)?;
            if wk == 0 {
                continue;
            }
            let ms = min_survival(&lab.corners(&rc)?);
            if best.as_ref().map_or(true, |b| ms > b.2) {
                best = Some((rc, wk, ms));
            }
        }
        match best {
            Some((rc, wk, ms)) => {
                cur = rc;
                levels.push(Level { rect: rc, winding: wk, min_corner_survival: ms });
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let (d0, d1) = cur.center();
    let record = lab.get((d0, d1))?;
    Ok(SearchResult { d0, d1, record, levels, log: lab.log, stalled })
}

fn min_survival(k: &[ExitRecord; 4]) -> f64 {
    k.iter().map(|r| r.survival()).fold(f64::INFINITY, f64::min)
}

/// One shooting stage: the prepared data (or a restart state) plus a bump.
#[derive(Clone, Debug)]
pub struct ShootingProblem {
    pub spec: InitialDataSpec,
    pub grid: Arc<Grid>,
    pub run: RunOptions,
    pub tracker: Arc<Tracker>,
    pub rect: Rect,
    pub s_max: f64,
    pub depth: usize,
    /// Edge refinement budget of the winding test.
    pub refine: usize,
    /// Restart state; when set the bump is added at `base.s`.
    pub base: Option<SimilarityState>,
}

impl ShootingProblem {
    pub fn s_start(&self) -> f64 {
        self.base.as_ref().map_or(self.spec.s0, |b| b.s)
    }

    pub fn initial_state(&self, d0: f64, d1: f64) -> Result<SimilarityState> {
        match &self.base {
            Some(b) => perturb(b, d0, d1, self.spec.amp, self.spec.k0, self.spec.bump_width),
            None => {
                build_initial_data(&InitialDataSpec { d0, d1, ..self.spec }, &self.tracker.params, self.grid.clone())
            }
        }
    }

    /// Runs `(d0, d1)` to `s_end`, handing every record and state to `visit`
    /// until it returns `Stop`.
    pub fn replay(
        &self,
        d0: f64,
        d1: f64,
        s_end: f64,
        mut visit: impl FnMut(&SimilarityState, ModeRecord) -> Result<Control>,
    ) -> Result<SimilarityState> {
        let tag = |e: Error| Error::Shot { d0, d1, source: Box::new(e) };
        let st = self.initial_state(d0, d1).map_err(tag)?;
        let (end, _) = run(st, s_end, &self.run, |s| {
            let rec = self.tracker.track(s)?;
            visit(s, rec)
        })
        .map_err(tag)?;
        Ok(end)
    }

    pub fn search(&self) -> Result<SearchResult> {
        search(self, self.rect, self.depth, self.refine)
    }
}

impl Classifier for ShootingProblem {
    fn classify(&self, d0: f64, d1: f64) -> Result<ExitRecord> {
        let mut det = ExitDetector::default();
        let mut last = (0.0, 0.0, self.s_start());
        let res = self.replay(d0, d1, self.s_max, |s, rec| {
            last = (rec.theta[0], rec.theta[1], s.s);
            Ok(if det.push(&rec).is_some() { Control::Stop } else { Control::Continue })
        });
        match res {
            Ok(_) => {}
            // leaving through the ceiling counts as an exit at that time
            Err(Error::Shot { source, .. }) if matches!(*source, Error::Ceiling { .. }) && det.exit().is_some() => {}
            Err(e) => return Err(e),
        }
        Ok(match det.exit() {
            Some(e) => ExitRecord {
                d0,
                d1,
                s_exit: Some(e.s),
                exit_coord: Some(e.coord),
                exit_sign: e.sign,
                theta0: e.theta0,
                theta1: e.theta1,
                s_reached: e.s,
            },
            None => ExitRecord {
                d0,
                d1,
                s_exit: None,
                exit_coord: None,
                exit_sign: 0,
                theta0: last.0,
                theta1: last.1,
                s_reached: last.2,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub s_start: f64,
    pub d0: f64,
    pub d1: f64,
    pub survival: f64,
    pub depth_reached: usize,
    pub stalled: bool,
    pub calls: usize,
    /// Exits during the search through coordinates other than theta_0, theta_1.
    pub other_exits: usize,
}

#[derive(Clone, Debug)]
pub struct Funnel {
    pub stages: Vec<Stage>,
    /// Records of the retained trajectory from `s0` to the end.
    pub records: Vec<ModeRecord>,
    pub final_state: SimilarityState,
    pub log: Vec<ExitRecord>,
}

/// Chains searches to carry one trajectory to `s_target`. Each stage searches,
/// replays its best pair and hands over `margin` before that pair's exit; the
/// next stage perturbs the handed-over state with a fresh bump.
pub fn funnel(template: &ShootingProblem, s_target: f64, margin: f64, max_stages: usize) -> Result<Funnel> {
    Ok(funnel_map(template, s_target, margin, max_stages, |_, _| ())?.0)
}

/// [`funnel`] that also maps every retained state, kept in step with `records`.
pub fn funnel_map<T>(
    template: &ShootingProblem,
    s_target: f64,
    margin: f64,
    max_stages: usize,
    mut f: impl FnMut(&SimilarityState, &ModeRecord) -> T,
) -> Result<(Funnel, Vec<T>)> {
    let mut extra = Vec::new();
    let mut problem = template.clone();
    problem.base = None;
    let mut stages = Vec::new();
    let mut records: Vec<ModeRecord> = Vec::new();
    let mut log = Vec::new();
    let step = template.run.record_every;
    loop {
        let s_start = problem.s_start();
        problem.s_max = (s_start + (template.s_max - template.spec.s0)).min(s_target);
        let res = problem.search()?;
        let survival = res.record.survival();
        let done = res.record.s_exit.is_none() && survival >= s_target - 1e-9;
        let last = stages.len() + 1 >= max_stages;
        let mut hand = if done || last { s_target } else { survival - margin };
        // hand over on the record lattice and always make progress
        hand = s_start + ((hand - s_start) / step + 1e-9).floor() * step;
        if hand <= s_start + step {
            return Err(Error::NoBlowup(format!("stage at s = {s_start} made no progress (survival {survival})")));
        }
        stages.push(Stage {
            s_start,
            d0: res.d0,
            d1: res.d1,
            survival,
            depth_reached: res.levels.len() - 1,
            stalled: res.stalled,
            calls: res.log.len(),
            other_exits: res.log.iter().filter(|r| r.exit_coord.is_some_and(|c| !c.is_unstable())).count(),
        });
        log.extend(res.log);
        if !records.is_empty() {
            // the restart state repeats the last handed-over record
            records.pop();
            extra.pop();
        }
        let end = problem.replay(res.d0, res.d1, hand, |st, rec| {
            extra.push(f(st, &rec));
            records.push(rec);
            Ok(Control::Continue)
        })?;
        if done || last || end.s >= s_target - 1e-9 {
            return Ok((Funnel { stages, records, final_state: end, log }, extra));
        }
        problem.base = Some(end);
    }
}
