//! Run configuration. Every section has defaults, so a config file only
//! needs the keys it changes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::modes::{ShrinkingSetConfig, Tracker};
use crate::regions::RegionThresholds;
use crate::shooting::{Rect, ShootingProblem};
use crate::solver::{Boundary, Grid, GridKind, InitialDataSpec, PhysGrid, PhysicalOptions, RunOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SpectralVerify,
    Simulate,
    Shoot,
    VerifyRegions,
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::SpectralVerify, Mode::Simulate, Mode::Shoot, Mode::VerifyRegions, Mode::Sweep];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::SpectralVerify => "spectral-verify",
            Mode::Simulate => "simulate",
            Mode::Shoot => "shoot",
            Mode::VerifyRegions => "verify-regions",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub quad_order: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { m: 14, quad_order: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKind,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub points: usize,
    /// Far-field parameter `a` of the prepared data and boundary.
    pub far_field_a: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { kind: GridKind::ScaledZ, half_width: 8.0, points: 1025, far_field_a: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunnelConfig {
    #[serde(rename = "A")]
    pub amp: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub s0: f64,
    pub eps0: f64,
    pub alpha0: f64,
    /// Defaults to half the smaller ODE value at tau = 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    pub eta0: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub bump_width: f64,
}

impl Default for FunnelConfig {
    fn default() -> Self {
        FunnelConfig {
            amp: 4.0,
            k0: 2.0,
            s0: 20.0,
            eps0: 0.1,
            alpha0: 0.0625,
            delta0: None,
            eta0: 1.0,
            c0: 16.0,
            bump_width: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Half width of the square search box in (d0, d1).
    #[serde(rename = "box")]
    pub half_box: f64,
    pub depth: usize,
    /// Survival horizon of the first stage; later stages get the same length.
    pub s_max: f64,
    pub refine: usize,
    pub s_target: f64,
    pub margin: f64,
    pub max_stages: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig { half_box: 1.0, depth: 45, s_max: 60.0, refine: 0, s_target: 80.0, margin: 3.0, max_stages: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Prepared data with the bump `(d0, d1)`.
    Prepared,
    /// The approximate profile itself.
    Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial: InitialKind,
    pub d0: f64,
    pub d1: f64,
    pub s_end: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { initial: InitialKind::Prepared, d0: 0.0, d1: 0.0, s_end: 25.0 }
    }
}

/// Physical-variable run behind `verify-regions`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConfig {
    pub s0: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub half_width: f64,
    pub points: usize,
    pub h_min: f64,
    pub dt_factor: f64,
    pub stop_level: f64,
    /// Records used by the blow-up time fit.
    pub window: usize,
    /// Relative T perturbation of the sensitivity block.
    pub rel_dt: f64,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        PhysicalConfig {
            s0: 5.0,
            k0: 1.0,
            half_width: 0.9,
            points: 4001,
            h_min: 5e-6,
            dt_factor: 0.005,
            stop_level: 1e10,
            window: 20,
            rel_dt: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Record cadence in s.
    pub cadence: f64,
    /// Profile snapshot cadence in s.
    pub snapshot_every: f64,
    /// Run directory used when none is given on the command line.
    pub directory: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { cadence: 0.05, snapshot_every: 5.0, directory: "runs/default".into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Stage run for every point.
    pub mode: Mode,
    pub points: Vec<SweepPoint>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { mode: Mode::SpectralVerify, points: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    pub spectral: SpectralConfig,
    pub grid: GridConfig,
    pub funnel: FunnelConfig,
    pub shooting: ShootingConfig,
    pub simulate: SimulateConfig,
    pub physical: PhysicalConfig,
    pub outputs: OutputConfig,
    pub sweep: SweepConfig,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params { p: 1.0, q: 1.0, mu: 1.0, dim: 1 },
            spectral: SpectralConfig::default(),
            grid: GridConfig::default(),
            funnel: FunnelConfig::default(),
            shooting: ShootingConfig::default(),
            simulate: SimulateConfig::default(),
            physical: PhysicalConfig::default(),
            outputs: OutputConfig::default(),
            sweep: SweepConfig::default(),
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// TOML with every table's keys sorted.
    pub fn canonical(&self) -> Result<String> {
        // toml::Table is a BTreeMap, so going through Value sorts the keys
        let v = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        toml::to_string(&v).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical form, lowercase hex.
    pub fn hash(&self) -> Result<String> {
        Ok(format!("{:x}", Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let o = &self.outputs;
        if !(o.cadence > 0.0 && o.snapshot_every > 0.0) {
            return Err(Error::Config("outputs.cadence and outputs.snapshot_every must be positive".into()));
        }
        self.grid()?;
        self.spec(0.0, 0.0).validate()?;
        self.shrinking_set().validate()?;
        if self.simulate.s_end < self.funnel.s0 {
            return Err(Error::Config(format!("simulate.s_end = {} is before s0", self.simulate.s_end)));
        }
        let sh = &self.shooting;
        if !(sh.half_box > 0.0 && sh.s_max > self.funnel.s0 && sh.s_target > self.funnel.s0 && sh.margin >= 0.0) {
            return Err(Error::Config("shooting: need box > 0, s_max and s_target after s0, margin >= 0".into()));
        }
        if sh.max_stages == 0 {
            return Err(Error::Config("shooting.max_stages must be at least 1".into()));
        }
        PhysGrid::stretched(self.physical.half_width, self.physical.points, self.physical.h_min)?;
        let th = self.thresholds()?;
        if !(4.0 * th.alpha0 < th.k0) {
            return Err(Error::Config(format!("alpha0 = {} must be below K0/4 = {}", th.alpha0, th.k0 / 4.0)));
        }
        if self.sweep.mode == Mode::Sweep {
            return Err(Error::Config("sweep.mode cannot be sweep".into()));
        }
        for pt in &self.sweep.points {
            Params::new(pt.p, pt.q, pt.mu)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.kind, self.grid.half_width, self.grid.points)
    }

    pub fn spec(&self, d0: f64, d1: f64) -> InitialDataSpec {
        let f = &self.funnel;
        InitialDataSpec {
            d0,
            d1,
            amp: f.amp,
            s0: f.s0,
            k0: f.k0,
            eps0: f.eps0,
            a: self.grid.far_field_a,
            bump_width: f.bump_width,
        }
    }

    /// Prepared data of the physical run.
    pub fn physical_spec(&self, d0: f64, d1: f64) -> InitialDataSpec {
        InitialDataSpec { s0: self.physical.s0, k0: self.physical.k0, ..self.spec(d0, d1) }
    }

    pub fn shrinking_set(&self) -> ShrinkingSetConfig {
        ShrinkingSetConfig { amp: self.funnel.amp, k0: self.funnel.k0, m: self.spectral.m }
    }

    pub fn tracker(&self) -> Result<Tracker> {
        Tracker::new(&self.params, self.shrinking_set(), self.spectral.quad_order)
    }

    pub fn run_options(&self) -> RunOptions {
        let mut opts = RunOptions::new(Boundary::FarField { a: self.grid.far_field_a });
        opts.record_every = self.outputs.cadence;
        opts
    }

    pub fn shooting_problem(&self) -> Result<ShootingProblem> {
        Ok(ShootingProblem {
            spec: self.spec(0.0, 0.0),
            grid: Arc::new(self.grid()?),
            run: self.run_options(),
            tracker: Arc::new(self.tracker()?),
            rect: Rect::square(self.shooting.half_box),
            s_max: self.shooting.s_max,
            depth: self.shooting.depth,
            refine: self.shooting.refine,
            base: None,
        })
    }

    pub fn physical_options(&self) -> PhysicalOptions {
        PhysicalOptions {
            dt_factor: self.physical.dt_factor,
            stop_level: self.physical.stop_level,
            ..Default::default()
        }
    }

    /// Region thresholds for the physical run (its own K0).
    pub fn thresholds(&self) -> Result<RegionThresholds> {
        let f = &self.funnel;
        let k0 = self.physical.k0;
        let delta0 = match f.delta0 {
            Some(d) => d,
            None => RegionThresholds::default_delta0(k0, &self.params)?,
        };
        Ok(RegionThresholds { delta0, c0: f.c0, eta0: f.eta0, eps0: f.eps0, alpha0: f.alpha0, k0 })
    }
}
