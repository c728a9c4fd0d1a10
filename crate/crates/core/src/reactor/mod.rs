//! Point-kinetics reactor with fuel and coolant thermal feedback.
//!
//! The nonlinear model works in absolute variables: relative neutron
//! density `n_r`, relative precursor concentrations `c_r`, average fuel
//! temperature `T_f` and outlet coolant temperature `T_e`. The inlet
//! temperature `T_i` is held constant at the value that makes the tabulated
//! average coolant temperature a steady state.

mod linear;
mod params;

pub use linear::{dc_gain, linearize, to_transfer_function, LinearStateSpace, RationalTF};
pub use params::{
    HeatingScale, ReactorParams, DELAYED_FRACTION, FULL_POWER_W, GENERATION_TIME_S, LUMPED_DECAY,
    TABLE1_POWERS,
};

use crate::error::{Error, Result};

/// Largest step accepted by [`ReactorModel::integrate`] (s).
pub const MAX_STEP: f64 = 0.02;

/// Reactor state, or its time derivative when returned by
/// [`ReactorModel::derivatives`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReactorState {
    pub n_r: f64,
    pub c_r: Vec<f64>,
    pub t_fuel: f64,
    pub t_outlet: f64,
}

impl ReactorState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.c_r.len() + 3);
        v.push(self.n_r);
        v.extend_from_slice(&self.c_r);
        v.push(self.t_fuel);
        v.push(self.t_outlet);
        v
    }

    /// Inverse of [`ReactorState::to_vec`]; `v` holds `G + 3` entries.
    pub fn from_slice(v: &[f64]) -> Self {
        let g = v.len() - 3;
        Self {
            n_r: v[0],
            c_r: v[1..=g].to_vec(),
            t_fuel: v[g + 1],
            t_outlet: v[g + 2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.n_r.is_finite()
            && self.t_fuel.is_finite()
            && self.t_outlet.is_finite()
            && self.c_r.iter().all(|c| c.is_finite())
    }
}

/// Steady operating point together with the recovered inlet temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: ReactorState,
    pub t_inlet: f64,
    /// Reactivity implied by the neutron balance at steady state; zero up to
    /// rounding.
    pub implied_reactivity: f64,
}

impl SteadyState {
    pub fn t_coolant(&self) -> f64 {
        0.5 * (self.t_inlet + self.state.t_outlet)
    }
}

/// Solves for the state where every derivative vanishes at zero rod
/// reactivity.
pub fn steady_state(params: &ReactorParams) -> Result<SteadyState> {
    params.validate()?;
    let n0 = params.n_r0;
    let lambda_gen = params.generation_time;
    let c_r: Vec<f64> = params
        .group_fractions
        .iter()
        .zip(&params.decay_constants)
        .map(|(&b, &l)| b / (lambda_gen * l) * n0)
        .collect();

    // Fuel balance at steady state fixes T_f − T_c.
    let t_fuel = params.t_coolant0
        + params.p0 * n0 * params.mu_fuel / (params.heating_capacity() * params.omega);

    // Unknowns (T_i, T_e):
    //   T_i + T_e = 2 T_c0
    //   (2M_c − Ω) T_i − (2M_c + Ω) T_e = −2Ω T_f
    let (m, om) = (params.m_coolant, params.omega);
    let (a11, a12, r1) = (1.0, 1.0, 2.0 * params.t_coolant0);
    let (a21, a22, r2) = (2.0 * m - om, -(2.0 * m + om), -2.0 * om * t_fuel);
    let det = a11 * a22 - a12 * a21;
    let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::SingularThermalSystem);
    }
    let t_inlet = (r1 * a22 - a12 * r2) / det;
    let t_outlet = (a11 * r2 - r1 * a21) / det;

    let delayed_source: f64 = params
        .decay_constants
        .iter()
        .zip(&c_r)
        .map(|(l, c)| l * c)
        .sum();
    let implied_reactivity = params.beta - lambda_gen * delayed_source / n0;

    Ok(SteadyState {
        state: ReactorState {
            n_r: n0,
            c_r,
            t_fuel,
            t_outlet,
        },
        t_inlet,
        implied_reactivity,
    })
}

/// Sampled trajectory; `states[k]` is the state at `times[k]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReactorState>,
}

/// Nonlinear reactor bound to its steady operating point.
#[derive(Debug, Clone)]
pub struct ReactorModel {
    params: ReactorParams,
    steady: SteadyState,
}

impl ReactorModel {
    pub fn new(params: ReactorParams) -> Result<Self> {
        let steady = steady_state(&params)?;
        Ok(Self { params, steady })
    }

    pub fn params(&self) -> &ReactorParams {
        &self.params
    }

    pub fn steady_state(&self) -> &SteadyState {
        &self.steady
    }

    /// ρ = ρ_rod + α_f (T_f − T_f0) + α_c (T_c − T_c0).
    pub fn total_reactivity(&self, state: &ReactorState, rho_rod: f64) -> f64 {
        let t_c = 0.5 * (self.steady.t_inlet + state.t_outlet);
        rho_rod
            + self.params.alpha_fuel * (state.t_fuel - self.steady.state.t_fuel)
            + self.params.alpha_coolant * (t_c - self.steady.t_coolant())
    }

    pub fn derivatives(&self, state: &ReactorState, rho_rod: f64) -> ReactorState {
        let mut out = vec![0.0; state.c_r.len() + 3];
        self.rates(&state.to_vec(), rho_rod, &mut out);
        ReactorState::from_slice(&out)
    }

    /// Right-hand side on the flat layout `[n_r, c_r.., T_f, T_e]`.
    fn rates(&self, x: &[f64], rho_rod: f64, out: &mut [f64]) {
        let p = &self.params;
        let g = p.groups();
        let (n, t_f, t_e) = (x[0], x[g + 1], x[g + 2]);
        let t_i = self.steady.t_inlet;
        let t_c = 0.5 * (t_i + t_e);
        let rho = rho_rod
            + p.alpha_fuel * (t_f - self.steady.state.t_fuel)
            + p.alpha_coolant * (t_c - self.steady.t_coolant());

        let mut delayed = 0.0;
        for i in 0..g {
            let c = x[1 + i];
            delayed += p.decay_constants[i] * c;
            out[1 + i] = p.group_fractions[i] / p.generation_time * n - p.decay_constants[i] * c;
        }
        out[0] = (rho - p.beta) / p.generation_time * n + delayed;
        out[g + 1] = p.p0 / p.heating_capacity() * n - p.omega / p.mu_fuel * t_f
            + p.omega / (2.0 * p.mu_fuel) * (t_i + t_e);
        out[g + 2] = 2.0 * p.omega / p.mu_coolant * t_f
            - (2.0 * p.m_coolant + p.omega) / p.mu_coolant * t_e
            + (2.0 * p.m_coolant - p.omega) / p.mu_coolant * t_i;
    }

    /// One classical RK4 step of length `dt` on the flat state, with
    /// `rho_rod(t)` sampled at the usual stage times.
    pub fn rk4_step(&self, x: &mut [f64], t: f64, dt: f64, rho_rod: impl Fn(f64) -> f64) {
        let n = x.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.rates(x, rho_rod(t), &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        self.rates(&tmp, rho_rod(t + 0.5 * dt), &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        self.rates(&tmp, rho_rod(t + 0.5 * dt), &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        self.rates(&tmp, rho_rod(t + dt), &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Fixed-step RK4 over `[t_start, t_end]`, sampled at every step.
    pub fn integrate(
        &self,
        initial: &ReactorState,
        rho_rod: impl Fn(f64) -> f64,
        t_start: f64,
        t_end: f64,
        dt: f64,
    ) -> Result<Trajectory> {
        if !(dt > 0.0) || dt > MAX_STEP {
            return Err(Error::StepSizeTooLarge { dt, max: MAX_STEP });
        }
        if initial.c_r.len() != self.params.groups() {
            return Err(Error::Config(format!(
                "initial state has {} precursor groups, model has {}",
                initial.c_r.len(),
                self.params.groups()
            )));
        }
        let steps = ((t_end - t_start) / dt).round().max(0.0) as usize;
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut x = initial.to_vec();
        times.push(t_start);
        states.push(initial.clone());
        for k in 0..steps {
            let t = t_start + k as f64 * dt;
            self.rk4_step(&mut x, t, dt, &rho_rod);
            let t_next = t_start + (k + 1) as f64 * dt;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { time: t_next });
            }
            times.push(t_next);
            states.push(ReactorState::from_slice(&x));
        }
        Ok(Trajectory { times, states })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(p: u32) -> ReactorModel {
        ReactorModel::new(ReactorParams::table1(p).unwrap()).unwrap()
    }

    fn rel_zero(v: f64, scale: f64) -> bool {
        v.abs() <= 1e-9 * scale.abs().max(1.0)
    }

    #[test]
    fn reactivity_zero_at_reference() {
        let m = model(100);
        let s = &m.steady_state().state;
        assert_eq!(m.total_reactivity(s, 0.0), 0.0);
        assert_eq!(m.total_reactivity(s, 1e-3), 1e-3);
    }

    #[test]
    fn fuel_temperature_rise_reactivity() {
        let m = model(100);
        let mut s = m.steady_state().state.clone();
        s.t_fuel += 10.0;
        assert_relative_eq!(m.total_reactivity(&s, 0.0), -2.9e-4, max_relative = 1e-9);
    }

    #[test]
    fn steady_state_is_fixed_point_for_every_row() {
        for p in TABLE1_POWERS {
            for heating in [HeatingScale::CoolantCapacity, HeatingScale::FuelCapacity] {
                let m = ReactorModel::new(ReactorParams::table1(p).unwrap().with_heating(heating)).unwrap();
                let s = &m.steady_state().state;
                let d = m.derivatives(s, 0.0);
                // Each rate is compared with the magnitude of its largest term.
                let pr = m.params();
                assert!(rel_zero(d.n_r, pr.beta / pr.generation_time * s.n_r), "{p}: {d:?}");
                assert!(rel_zero(d.c_r[0], pr.beta / pr.generation_time * s.n_r));
                assert!(rel_zero(d.t_fuel, pr.omega / pr.mu_fuel * s.t_fuel));
                assert!(rel_zero(d.t_outlet, 2.0 * pr.omega / pr.mu_coolant * s.t_fuel));
                assert!(m.steady_state().implied_reactivity.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lumped_precursor_concentration() {
        let m = model(100);
        assert_relative_eq!(m.steady_state().state.c_r[0], 572.673374, max_relative = 1e-6);
    }

    #[test]
    fn fuel_to_coolant_temperature_gap() {
        let m = ReactorModel::new(
            ReactorParams::table1(100).unwrap().with_heating(HeatingScale::FuelCapacity),
        )
        .unwrap();
        let s = m.steady_state();
        assert_relative_eq!(s.state.t_fuel - s.t_coolant(), 500e6 / 3.94e6, max_relative = 1e-12);
        assert_relative_eq!(s.t_coolant(), 302.0, max_relative = 1e-12);
    }

    #[test]
    fn positive_rod_step_raises_power() {
        let m = model(100);
        let s = &m.steady_state().state;
        let d = m.derivatives(s, 1e-4);
        assert_relative_eq!(d.n_r, 1e-4 / GENERATION_TIME_S * s.n_r, max_relative = 1e-9);
        assert!(d.n_r > 0.0);
    }

    #[test]
    fn doubled_power_heats_fuel() {
        let m = ReactorModel::new(
            ReactorParams::table1(100).unwrap().with_heating(HeatingScale::FuelCapacity),
        )
        .unwrap();
        let mut s = m.steady_state().state.clone();
        s.n_r *= 2.0;
        assert_relative_eq!(m.derivatives(&s, 0.0).t_fuel, 500e6 / 2.25e7, max_relative = 1e-9);
    }

    #[test]
    fn steady_trajectory_stays_put() {
        let m = model(60);
        let s0 = m.steady_state().state.clone();
        let traj = m.integrate(&s0, |_| 0.0, 0.0, 20.0, 0.01).unwrap();
        assert_eq!(traj.states[0], s0);
        assert_eq!(traj.times.len(), 2001);
        let a = s0.to_vec();
        for st in &traj.states {
            for (x, y) in st.to_vec().iter().zip(&a) {
                assert!(((x - y) / y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn reactivity_step_increases_power_monotonically() {
        let m = model(100);
        let s0 = m.steady_state().state.clone();
        let traj = m.integrate(&s0, |_| 1e-4, 0.0, 1.0, 0.01).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1].n_r > w[0].n_r);
        }
    }

    #[test]
    fn step_bound_enforced() {
        let m = model(100);
        let s0 = m.steady_state().state.clone();
        assert!(matches!(
            m.integrate(&s0, |_| 0.0, 0.0, 1.0, 0.05),
            Err(Error::StepSizeTooLarge { .. })
        ));
    }

    #[test]
    fn runaway_reported_as_non_finite() {
        let m = model(100);
        let s0 = m.steady_state().state.clone();
        let r = m.integrate(&s0, |_| 0.5, 0.0, 20.0, 0.02);
        assert!(matches!(r, Err(Error::NonFiniteState { .. })), "{r:?}");
    }

    #[test]
    fn multi_group_parameters_accepted() {
        let mut p = ReactorParams::table1(100).unwrap();
        p.decay_constants = vec![0.0124, 0.0305, 0.111, 0.301, 1.14, 3.01];
        p.group_fractions = vec![2.15e-4, 1.424e-3, 1.274e-3, 2.568e-3, 7.48e-4, 2.73e-4];
        p.beta = p.group_fractions.iter().sum();
        let m = ReactorModel::new(p).unwrap();
        let s = m.steady_state().state.clone();
        assert_eq!(s.c_r.len(), 6);
        let d = m.derivatives(&s, 0.0);
        assert!(d.n_r.abs() < 1e-9 * 50.0);
        assert!(linearize(m.params()).is_err());
    }
}
