//! Scenario files and the closed loop.
//!
//! Each step `k` runs in a fixed order: read the plant output, pass it
//! through the feedback delay line and add sensor noise, form the error,
//! compute the control, then hold the control over the next plant step.

mod grid;

use std::io::Write;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

pub use grid::{grid_cells, run_grid, write_grid_csv, GridCell, GridOptions, GridRow, GridSection, GRID_HEADER};

use crate::controller::{preset, FuzzyFopid, FuzzyFopidConfig};
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyEngine, RuleBase, DEFAULT_GRID_POINTS};
use crate::reactor::{linearize, ReactorModel, ReactorParams, MAX_STEP};
use crate::stochastic::{generate_delay_series, DelaySpec, NoiseSpec};
use crate::tuner::{objective_from_series, ObjectiveSpec};

/// Default integration and controller period (s).
pub const DEFAULT_DT: f64 = 0.0005;
/// Default simulated horizon (s).
pub const DEFAULT_HORIZON: f64 = 100.0;
/// Default standard deviation of sensor noise (relative power).
pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;
/// Default mean network delay (s).
pub const DEFAULT_MEAN_DELAY: f64 = 0.001;
/// Default largest network delay (s).
pub const DEFAULT_MAX_DELAY: f64 = 0.004;
/// Plant output magnitude treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;
/// Band used for the settling time, relative to the setpoint change.
pub const SETTLING_BAND: f64 = 0.02;
/// Column names of the per-step CSV.
pub const SERIES_HEADER: [&str; 8] = ["t", "r", "y", "y_fb", "e", "u", "delay", "noise"];

/// Offset that separates the delay stream from the noise stream when both
/// specs carry the same seed.
const DELAY_STREAM_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantMode {
    /// State-space model in deviation coordinates.
    #[default]
    Linear,
    /// Point kinetics with thermal feedback; output is `n_r − n_r0`.
    Nonlinear,
}

/// Reference trajectory in relative-power deviation units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Setpoint {
    Step {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        start: f64,
    },
    /// `[time, value]` pairs; each value holds until the next time. Zero
    /// before the first point.
    Piecewise { points: Vec<[f64; 2]> },
}

fn one() -> f64 {
    1.0
}

impl Default for Setpoint {
    fn default() -> Self {
        Setpoint::Step {
            amplitude: 1.0,
            start: 1.0,
        }
    }
}

impl Setpoint {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Setpoint::Step { amplitude, start } => {
                if t + 1e-9 >= *start {
                    *amplitude
                } else {
                    0.0
                }
            }
            Setpoint::Piecewise { points } => points
                .iter()
                .take_while(|p| p[0] <= t + 1e-9)
                .last()
                .map_or(0.0, |p| p[1]),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Setpoint::Step { amplitude, start } if amplitude.is_finite() && start.is_finite() => Ok(()),
            Setpoint::Piecewise { points }
                if !points.is_empty()
                    && points.iter().all(|p| p[0].is_finite() && p[1].is_finite())
                    && points.windows(2).all(|w| w[0][0] < w[1][0]) =>
            {
                Ok(())
            }
            _ => Err(Error::Config(
                "setpoint must be finite; piecewise points need strictly increasing times".into(),
            )),
        }
    }
}

/// Preset name (or `"none"` for a zero controller) or explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControllerSpec {
    Named(String),
    Custom(FuzzyFopidConfig),
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Named("table2-fopid-100".into())
    }
}

impl ControllerSpec {
    /// `None` for the zero controller.
    pub fn resolve(&self) -> Result<Option<FuzzyFopidConfig>> {
        match self {
            ControllerSpec::Named(n) if n == "none" => Ok(None),
            ControllerSpec::Named(n) => preset(n)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("unknown controller preset {n:?}"))),
            ControllerSpec::Custom(c) => {
                c.validate()?;
                Ok(Some(*c))
            }
        }
    }
}

/// One closed-loop experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Built-in operating point; ignored when `params` is given.
    #[serde(default = "default_power")]
    pub power_percent: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ReactorParams>,
    #[serde(default)]
    pub plant_mode: PlantMode,
    #[serde(default)]
    pub setpoint: Setpoint,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub delay: Option<DelayConfig>,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    /// Symmetric bound on the control signal.
    #[serde(default)]
    pub u_max: Option<f64>,
    /// Added to the noise and delay seeds.
    #[serde(default)]
    pub seed: u64,
    /// Replacement 7×7 rule table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<RuleBase>,
}

fn default_power() -> u32 {
    100
}
fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Sensor-noise block of a scenario; `sigma` defaults to
/// [`DEFAULT_NOISE_SIGMA`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub beta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    DEFAULT_NOISE_SIGMA
}

impl NoiseConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            sigma: DEFAULT_NOISE_SIGMA,
            seed: 0,
        }
    }
}

/// Network-delay block of a scenario with the default magnitudes filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    #[serde(default = "default_delay_hurst")]
    pub hurst: f64,
    #[serde(default = "default_mean_delay")]
    pub mean_delay: f64,
    #[serde(default = "default_max_delay")]
    pub max_delay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: crate::stochastic::DelaySource,
}

fn default_delay_hurst() -> f64 {
    crate::stochastic::DELAY_HURST
}
fn default_mean_delay() -> f64 {
    DEFAULT_MEAN_DELAY
}
fn default_max_delay() -> f64 {
    DEFAULT_MAX_DELAY
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            hurst: default_delay_hurst(),
            mean_delay: DEFAULT_MEAN_DELAY,
            max_delay: DEFAULT_MAX_DELAY,
            seed: 0,
            source: Default::default(),
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            power_percent: 100,
            params: None,
            plant_mode: PlantMode::Linear,
            setpoint: Setpoint::default(),
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            controller: ControllerSpec::default(),
            noise: None,
            delay: None,
            objective: ObjectiveSpec::default(),
            u_max: None,
            seed: 0,
            rules: None,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn plant_params(&self) -> Result<ReactorParams> {
        match &self.params {
            Some(p) => Ok(p.clone()),
            None => ReactorParams::table1(self.power_percent).ok_or_else(|| {
                Error::Config(format!(
                    "power_percent must be one of 100, 80, 60, 40, 20, got {}",
                    self.power_percent
                ))
            }),
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.plant_params()?.validate()?;
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return Err(Error::StepSizeTooLarge {
                dt: self.dt,
                max: MAX_STEP,
            });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        let n = self.steps() as f64;
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::Config(format!(
                "dt = {} does not divide the horizon {}",
                self.dt, self.horizon
            )));
        }
        self.setpoint.validate()?;
        self.controller.resolve()?;
        self.objective.validate()?;
        if let Some(n) = &self.noise {
            self.noise_spec(n).validate()?;
        }
        if let Some(d) = &self.delay {
            self.delay_spec(d).validate()?;
        }
        if let Some(m) = self.u_max {
            if !(m > 0.0) {
                return Err(Error::Config(format!("u_max must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// Noise settings with the scenario seed folded in.
    pub fn noise_spec(&self, n: &NoiseConfig) -> NoiseSpec {
        NoiseSpec {
            beta: n.beta,
            sigma: n.sigma,
            seed: n.seed.wrapping_add(self.seed),
        }
    }

    /// Delay settings with the scenario seed folded in.
    pub fn delay_spec(&self, d: &DelayConfig) -> DelaySpec {
        DelaySpec {
            hurst: d.hurst,
            mean_delay: d.mean_delay,
            max_delay: d.max_delay,
            seed: d.seed.wrapping_add(self.seed).wrapping_add(DELAY_STREAM_OFFSET),
            source: d.source.clone(),
        }
    }
}

/// Scalar performance figures of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    /// Weighted ITSE + ISCO on the loop error and control.
    pub j: f64,
    /// Peak excursion of `y` past the final setpoint, percent of the
    /// setpoint change.
    pub overshoot_pct: f64,
    /// Time from the last setpoint change until `y` stays within 2% of the
    /// change; `None` when it never does.
    pub settling_time: Option<f64>,
    /// `r − y` at the final sample.
    pub steady_state_error: f64,
    /// Variance of `u` over the second half of the horizon.
    pub u_variance_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub y_fb: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub delay: Vec<f64>,
    pub noise: Vec<f64>,
    pub summary: Summary,
}

enum Plant {
    Linear {
        ss: crate::reactor::LinearStateSpace,
        x: Vector4<f64>,
    },
    Nonlinear {
        model: ReactorModel,
        x: Vec<f64>,
        n0: f64,
    },
}

impl Plant {
    fn output(&self) -> f64 {
        match self {
            Plant::Linear { ss, x } => ss.output(x, 0.0),
            Plant::Nonlinear { x, n0, .. } => x[0] - n0,
        }
    }

    fn advance(&mut self, u: f64, t: f64, dt: f64) {
        match self {
            Plant::Linear { ss, x } => *x = ss.rk4_step(x, u, dt),
            Plant::Nonlinear { model, x, .. } => model.rk4_step(x, t, dt, |_| u),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Plant::Linear { x, .. } => x.iter().all(|v| v.is_finite()),
            Plant::Nonlinear { x, .. } => x.iter().all(|v| v.is_finite()),
        }
    }
}

/// Simulates the scenario over `[0, horizon]`.
pub fn run_scenario(scn: &Scenario) -> Result<SimResult> {
    scn.validate()?;
    let params = scn.plant_params()?;
    let dt = scn.dt;
    let n = scn.steps();
    let mut plant = match scn.plant_mode {
        PlantMode::Linear => Plant::Linear {
            ss: linearize(&params)?,
            x: Vector4::zeros(),
        },
        PlantMode::Nonlinear => {
            let model = ReactorModel::new(params)?;
            let x = model.steady_state().state.to_vec();
            let n0 = model.params().n_r0;
            Plant::Nonlinear { model, x, n0 }
        }
    };
    let mut controller = match scn.controller.resolve()? {
        Some(cfg) => {
            let engine = FuzzyEngine::new(scn.rules.clone().unwrap_or_default(), DEFAULT_GRID_POINTS)?;
            Some(FuzzyFopid::new(cfg, engine, dt)?)
        }
        None => None,
    };
    let noise = match &scn.noise {
        Some(c) => scn.noise_spec(c).generate(n + 1, dt)?,
        None => vec![0.0; n + 1],
    };
    let delay = match &scn.delay {
        Some(c) => generate_delay_series(&scn.delay_spec(c), n + 1, dt)?,
        None => vec![0.0; n + 1],
    };
    let mut line = crate::stochastic::DelayLine::new();

    let mut res = SimResult {
        t: Vec::with_capacity(n + 1),
        r: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        y_fb: Vec::with_capacity(n + 1),
        e: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
        delay,
        noise,
        summary: Summary {
            j: 0.0,
            overshoot_pct: 0.0,
            settling_time: None,
            steady_state_error: 0.0,
            u_variance_tail: 0.0,
        },
    };
    for k in 0..=n {
        let t = k as f64 * dt;
        let r = scn.setpoint.value(t);
        let y = plant.output();
        let y_fb = line.push(y, res.delay[k], dt) + res.noise[k];
        let e = r - y_fb;
        let mut u = controller.as_mut().map_or(0.0, |c| c.step(e));
        if let Some(m) = scn.u_max {
            u = u.clamp(-m, m);
        }
        res.t.push(t);
        res.r.push(r);
        res.y.push(y);
        res.y_fb.push(y_fb);
        res.e.push(e);
        res.u.push(u);
        if k < n {
            plant.advance(u, t, dt);
            if !plant.is_finite() || plant.output().abs() > DIVERGENCE_BOUND {
                return Err(Error::DivergedSimulation { time: (k + 1) as f64 * dt });
            }
        }
    }
    res.summary = summarize(&res, &scn.objective)?;
    Ok(res)
}

fn summarize(res: &SimResult, objective: &ObjectiveSpec) -> Result<Summary> {
    let n = res.t.len() - 1;
    let j = objective_from_series(objective, &res.t, &res.e, &res.u)?;
    let (r0, r_end) = (res.r[0], res.r[n]);
    let change = r_end - r0;
    let scale = if change != 0.0 { change.abs() } else { 1.0 };
    let sign = if change < 0.0 { -1.0 } else { 1.0 };
    let peak = res.y.iter().map(|&y| sign * (y - r_end)).fold(0.0, f64::max);
    let t_change = (1..=n)
        .rev()
        .find(|&k| res.r[k] != res.r[k - 1])
        .map_or(0.0, |k| res.t[k]);
    let settling_time = match (0..=n).rev().find(|&k| (res.y[k] - r_end).abs() > SETTLING_BAND * scale) {
        None => Some(0.0),
        Some(k) if k == n => None,
        Some(k) => Some((res.t[k + 1] - t_change).max(0.0)),
    };
    let half = res.t[n] / 2.0;
    let tail: Vec<f64> = res
        .t
        .iter()
        .zip(&res.u)
        .filter(|(t, _)| **t >= half)
        .map(|(_, u)| *u)
        .collect();
    let m = tail.iter().sum::<f64>() / tail.len() as f64;
    let u_variance_tail = tail.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (tail.len().max(2) - 1) as f64;
    Ok(Summary {
        j,
        overshoot_pct: 100.0 * peak / scale,
        settling_time,
        steady_state_error: r_end - res.y[n],
        u_variance_tail,
    })
}

/// Writes the per-step series with the [`SERIES_HEADER`] columns.
pub fn write_series_csv<W: Write>(res: &SimResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for k in 0..res.t.len() {
        let row = [
            res.t[k], res.r[k], res.y[k], res.y_fb[k], res.e[k], res.u[k], res.delay[k], res.noise[k],
        ];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
