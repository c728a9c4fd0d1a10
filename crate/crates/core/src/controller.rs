//! Fuzzy PI^λD^μ control law.
//!
//! The error and its order-μ derivative are scaled by `K_e`, `K_d`, clamped
//! and passed through the fuzzy engine; the engine output `v` drives an
//! order-λ integral branch and a direct branch:
//! `u = K_PI · I^λ v + K_PD · v`. With `λ = μ = 1` this is the ordinary
//! fuzzy PID.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracfilter::{frac_derivative_stream, frac_integral_stream, FracDerivative, FracIntegral};
use crate::fuzzy::FuzzyEngine;

/// Step used for the central-difference slope of the engine at the origin.
pub const SLOPE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyFopidConfig {
    pub k_e: f64,
    pub k_d: f64,
    pub k_pi: f64,
    pub k_pd: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

impl FuzzyFopidConfig {
    /// Integer-order fuzzy PID with the given scaling factors.
    pub fn pid(k_e: f64, k_d: f64, k_pi: f64, k_pd: f64) -> Self {
        Self {
            k_e,
            k_d,
            k_pi,
            k_pd,
            lambda: 1.0,
            mu: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_e", self.k_e), ("k_d", self.k_d), ("k_pi", self.k_pi), ("k_pd", self.k_pd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for v in [self.lambda, self.mu] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::OrderOutOfRange(v));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.k_e, self.k_d, self.k_pi, self.k_pd, self.lambda, self.mu]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            k_e: v[0],
            k_d: v[1],
            k_pi: v[2],
            k_pd: v[3],
            lambda: v[4],
            mu: v[5],
        }
    }
}

/// Filter memories for one controller instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    dt: f64,
    lambda: f64,
    mu: f64,
    derivative: FracDerivative,
    integral: FracIntegral,
    last_output: f64,
}

impl ControllerState {
    pub fn new(cfg: &FuzzyFopidConfig, dt: f64) -> Result<Self> {
        cfg.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("controller period must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            lambda: cfg.lambda,
            mu: cfg.mu,
            derivative: frac_derivative_stream(cfg.mu, dt)?,
            integral: frac_integral_stream(cfg.lambda, dt)?,
            last_output: 0.0,
        })
    }

    pub fn reset(&mut self) {
        self.derivative.reset();
        self.integral.reset();
        self.last_output = 0.0;
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn last_output(&self) -> f64 {
        self.last_output
    }
}

/// Advances the control law by one sample of the error `e`.
pub fn step(cfg: &FuzzyFopidConfig, engine: &FuzzyEngine, state: &mut ControllerState, e: f64) -> Result<f64> {
    if cfg.lambda != state.lambda || cfg.mu != state.mu {
        return Err(Error::ConfigMismatch(format!(
            "state built for λ = {}, μ = {} but config has λ = {}, μ = {}",
            state.lambda, state.mu, cfg.lambda, cfg.mu
        )));
    }
    let d = state.derivative.apply(e);
    let e_n = (cfg.k_e * e).clamp(-1.0, 1.0);
    let d_n = (cfg.k_d * d).clamp(-1.0, 1.0);
    let v = engine.infer(e_n, d_n);
    let u = cfg.k_pi * state.integral.apply(v) + cfg.k_pd * v;
    state.last_output = u;
    Ok(u)
}

/// Configuration, engine and state bundled together.
#[derive(Debug, Clone)]
pub struct FuzzyFopid {
    cfg: FuzzyFopidConfig,
    engine: FuzzyEngine,
    state: ControllerState,
}

impl FuzzyFopid {
    pub fn new(cfg: FuzzyFopidConfig, engine: FuzzyEngine, dt: f64) -> Result<Self> {
        let state = ControllerState::new(&cfg, dt)?;
        Ok(Self { cfg, engine, state })
    }

    pub fn config(&self) -> &FuzzyFopidConfig {
        &self.cfg
    }

    pub fn step(&mut self, e: f64) -> f64 {
        step(&self.cfg, &self.engine, &mut self.state, e).expect("state built from the same config")
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }
}

/// Linearised gains of the law about zero error.
///
/// With engine slope `S` at the origin, small signals see
/// `u ≈ K_PD S (K_e e + K_d D^μ e) + K_PI S I^λ (K_e e + K_d D^μ e)`.
/// The last product contributes `K_PI S K_d · I^λ D^μ e`, which for
/// `λ = μ` is an extra proportional term (`cross`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallSignalGains {
    pub slope: f64,
    /// `K_PD S K_e`
    pub proportional: f64,
    /// `K_PI S K_e`, order λ
    pub integral: f64,
    /// `K_PD S K_d`, order μ
    pub derivative: f64,
    /// `K_PI S K_d`, order μ − λ
    pub cross: f64,
}

pub fn small_signal_gains(cfg: &FuzzyFopidConfig, engine: &FuzzyEngine) -> SmallSignalGains {
    let s = engine.small_signal_slope(SLOPE_STEP);
    SmallSignalGains {
        slope: s,
        proportional: cfg.k_pd * s * cfg.k_e,
        integral: cfg.k_pi * s * cfg.k_e,
        derivative: cfg.k_pd * s * cfg.k_d,
        cross: cfg.k_pi * s * cfg.k_d,
    }
}

/// Named scaling-factor and order sets.
pub const PRESET_NAMES: [&str; 16] = [
    "table2-fopid-100",
    "table2-pid-100",
    "table2-fopid-20",
    "table2-pid-20",
    "table3-persistent-fopid-100",
    "table3-persistent-pid-100",
    "table3-persistent-fopid-20",
    "table3-persistent-pid-20",
    "table3-white-fopid-100",
    "table3-white-pid-100",
    "table3-white-fopid-20",
    "table3-white-pid-20",
    "table3-antipersistent-fopid-100",
    "table3-antipersistent-pid-100",
    "table3-antipersistent-fopid-20",
    "table3-antipersistent-pid-20",
];

pub fn preset(name: &str) -> Option<FuzzyFopidConfig> {
    let fo = |k_e, k_d, k_pi, k_pd, lambda, mu| FuzzyFopidConfig {
        k_e,
        k_d,
        k_pi,
        k_pd,
        lambda,
        mu,
    };
    let pid = FuzzyFopidConfig::pid;
    Some(match name {
        "table2-fopid-100" => fo(0.3236, 0.0683, 4.557, 0.124, 0.9643, 0.0958),
        "table2-pid-100" => pid(0.9918, 0.0061, 1.2510, 0.001),
        "table2-fopid-20" => fo(0.6534, 0.3349, 2.189, 0.092, 0.8407, 0.0254),
        "table2-pid-20" => pid(0.9859, 0.0059, 1.876, 0.067),
        "table3-persistent-fopid-100" => fo(0.1145, 0.0796, 0.9951, 0.0488, 0.9361, 0.0863),
        "table3-persistent-pid-100" => pid(0.9624, 0.0011, 0.1245, 0.0011),
        "table3-persistent-fopid-20" => fo(0.6436, 0.1946, 1.4269, 0.0514, 0.8779, 0.0569),
        "table3-persistent-pid-20" => pid(0.9708, 0.0021, 0.5439, 0.0019),
        "table3-white-fopid-100" => fo(0.1674, 0.0010, 1.6514, 0.0361, 0.9408, 0.7431),
        "table3-white-pid-100" => pid(0.3229, 0.0010, 1.1039, 0.0212),
        "table3-white-fopid-20" => fo(0.5916, 0.1182, 1.0812, 0.0580, 0.8823, 0.0010),
        "table3-white-pid-20" => pid(0.9979, 0.0010, 0.9718, 0.0402),
        "table3-antipersistent-fopid-100" => fo(0.0802, 0.4775, 0.1638, 0.0075, 0.9866, 0.0148),
        "table3-antipersistent-pid-100" => pid(0.9166, 0.0010, 0.4412, 0.0109),
        "table3-antipersistent-fopid-20" => fo(0.0928, 0.2729, 0.9870, 0.0122, 0.9875, 0.0036),
        "table3-antipersistent-pid-20" => pid(0.9985, 0.0166, 1.5201, 0.0291),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> FuzzyFopidConfig {
        FuzzyFopidConfig::pid(1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn zero_error_gives_zero_output() {
        let cfg = preset("table2-fopid-100").unwrap();
        let mut c = FuzzyFopid::new(cfg, FuzzyEngine::default(), 0.01).unwrap();
        assert!((0..500).all(|_| c.step(0.0) == 0.0));
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(name.contains("-pid-"), cfg.lambda == 1.0 && cfg.mu == 1.0, "{name}");
        }
        assert!(preset("table9-fopid-100").is_none());
    }

    #[test]
    fn gain_formulas() {
        let eng = FuzzyEngine::default();
        let g = small_signal_gains(&unit(), &eng);
        assert_eq!(g.proportional, g.slope);
        assert_eq!(g.integral, g.slope);
        assert_eq!(g.derivative, g.slope);
        let mut cfg = unit();
        cfg.k_pi = 0.0;
        assert_eq!(small_signal_gains(&cfg, &eng).integral, 0.0);
        let mut doubled = unit();
        doubled.k_e = 2.0;
        let g2 = small_signal_gains(&doubled, &eng);
        assert_eq!(g2.proportional, 2.0 * g.proportional);
        assert_eq!(g2.integral, 2.0 * g.integral);
        assert_eq!(g2.derivative, g.derivative);
    }

    #[test]
    fn mismatched_state_rejected() {
        let eng = FuzzyEngine::default();
        let a = preset("table2-fopid-100").unwrap();
        let b = preset("table2-pid-100").unwrap();
        let mut st = ControllerState::new(&a, 0.01).unwrap();
        assert!(matches!(step(&b, &eng, &mut st, 0.1), Err(Error::ConfigMismatch(_))));
        assert!(ControllerState::new(&a, 0.0).is_err());
        let mut bad = a;
        bad.k_e = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reset_restores_fresh_behaviour() {
        let cfg = preset("table2-fopid-20").unwrap();
        let mut c = FuzzyFopid::new(cfg, FuzzyEngine::default(), 0.01).unwrap();
        let first: Vec<f64> = (0..200).map(|k| c.step((k as f64 * 0.1).sin())).collect();
        c.reset();
        let again: Vec<f64> = (0..200).map(|k| c.step((k as f64 * 0.1).sin())).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn interleaved_instances_are_independent() {
        let cfg = preset("table2-fopid-100").unwrap();
        let mut a = FuzzyFopid::new(cfg, FuzzyEngine::default(), 0.01).unwrap();
        let mut b = a.clone();
        for k in 0..300 {
            let e = 0.5 * (k as f64 * 0.05).cos();
            assert_eq!(a.step(e), b.step(e));
        }
    }

    // Constant small error through the unit PID: after the first sample the
    // derivative is zero, so u follows K_PD·v + K_PI·∫v with v = infer(0.002, 0).
    #[test]
    fn constant_error_gives_affine_growth() {
        let eng = FuzzyEngine::default();
        let dt = 0.01;
        let mut c = FuzzyFopid::new(unit(), eng.clone(), dt).unwrap();
        let v = eng.infer(0.002, 0.0);
        let s = eng.small_signal_slope(SLOPE_STEP);
        assert!((v / (s * 0.002) - 1.0).abs() < 0.01);
        let mut u = Vec::new();
        for _ in 0..1000 {
            u.push(c.step(0.002));
        }
        for k in 10..1000 {
            let slope = (u[k] - u[k - 1]) / dt;
            assert!((slope - v).abs() < 1e-12, "k = {k}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn negated_error_negates_output(seed in 0u64..1000, fo in any::<bool>()) {
            let cfg = if fo { preset("table2-fopid-100").unwrap() } else { preset("table2-pid-20").unwrap() };
            let mut a = FuzzyFopid::new(cfg, FuzzyEngine::default(), 0.01).unwrap();
            let mut b = a.clone();
            let mut x = seed as f64;
            for _ in 0..300 {
                x = (x * 12.9898 + 78.233).sin() * 43758.5453;
                let e = x.fract() * 4.0 - 2.0;
                let (ua, ub) = (a.step(e), b.step(-e));
                prop_assert!((ua + ub).abs() <= 1e-9 * ua.abs().max(1.0));
                prop_assert!(ua.is_finite());
            }
        }
    }
}
