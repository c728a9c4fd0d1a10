//! ITSE + ISCO objective and a real-coded genetic algorithm over the six
//! controller parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::FuzzyFopidConfig;
use crate::error::{Error, Result};
use crate::sim::{run_scenario, ControllerSpec, Scenario};

/// Objective assigned to candidates whose closed loop diverges.
pub const DIVERGENCE_PENALTY: f64 = 1e12;

/// Weights of `J = ∫ (w1 · t · e² + w2 · u²) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    #[serde(default = "half")]
    pub w1: f64,
    #[serde(default = "half")]
    pub w2: f64,
}

fn half() -> f64 {
    0.5
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w >= 0.0 && w.is_finite();
        if !ok(self.w1) || !ok(self.w2) || self.w1 + self.w2 == 0.0 {
            return Err(Error::Config("objective weights must be non-negative and not both zero".into()));
        }
        Ok(())
    }
}

/// Trapezoidal quadrature of the weighted integrand on the sample grid.
pub fn objective_from_series(spec: &ObjectiveSpec, t: &[f64], e: &[f64], u: &[f64]) -> Result<f64> {
    for other in [e.len(), u.len()] {
        if other != t.len() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: other,
            });
        }
    }
    let f = |k: usize| spec.w1 * t[k] * e[k] * e[k] + spec.w2 * u[k] * u[k];
    Ok((1..t.len()).map(|k| 0.5 * (t[k] - t[k - 1]) * (f(k) + f(k - 1))).sum())
}

/// `J` of one closed-loop run with `candidate` in place of the scenario's
/// controller. Divergence yields [`DIVERGENCE_PENALTY`]; configuration errors
/// are returned.
pub fn evaluate_objective(candidate: &FuzzyFopidConfig, scenario: &Scenario) -> Result<f64> {
    let mut scn = scenario.clone();
    scn.controller = ControllerSpec::Custom(*candidate);
    match run_scenario(&scn) {
        Ok(r) if r.summary.j.is_finite() => Ok(r.summary.j),
        Ok(_) | Err(Error::DivergedSimulation { .. }) | Err(Error::NonFiniteState { .. }) => Ok(DIVERGENCE_PENALTY),
        Err(e) => Err(e),
    }
}

/// Mean of `evals` objective values with scenario seeds `seed, seed + 1, …`.
///
/// Every candidate sees the same noise and delay realisations, so
/// differences between candidates are not masked by sampling noise.
pub fn expected_objective(candidate: &FuzzyFopidConfig, scenario: &Scenario, evals: usize) -> Result<f64> {
    if evals == 0 {
        return Err(Error::Config("stochastic_evals must be at least 1".into()));
    }
    let mut total = 0.0;
    for i in 0..evals {
        let mut scn = scenario.clone();
        scn.seed = scenario.seed.wrapping_add(i as u64);
        total += evaluate_objective(candidate, &scn)?;
    }
    Ok(total / evals as f64)
}

/// Search box for `[K_e, K_d, K_PI, K_PD, λ, μ]`.
pub fn default_bounds() -> Vec<[f64; 2]> {
    vec![[1e-3, 10.0], [1e-3, 10.0], [1e-3, 10.0], [1e-3, 10.0], [1e-3, 1.0], [1e-3, 1.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_fraction: f64,
    pub mutation_fraction: f64,
    pub elite_count: usize,
    pub bounds: Vec<[f64; 2]>,
    /// Objective evaluations averaged per candidate; unset means 1 for a
    /// deterministic scenario and 5 when noise or delay is present.
    pub stochastic_evals: Option<usize>,
    /// Stop after this many generations without improving by more than
    /// `stall_tolerance`.
    pub stall_generations: usize,
    pub stall_tolerance: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 50,
            crossover_fraction: 0.8,
            mutation_fraction: 0.2,
            elite_count: 1,
            bounds: default_bounds(),
            stochastic_evals: None,
            stall_generations: 15,
            stall_tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("GA: {m}")));
        if self.population < 4 {
            return bad(format!("population must be at least 4, got {}", self.population));
        }
        for (name, f) in [("crossover_fraction", self.crossover_fraction), ("mutation_fraction", self.mutation_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        if self.elite_count >= self.population {
            return bad("elite_count must be below the population size".into());
        }
        if self.bounds.is_empty() {
            return bad("at least one decision variable is required".into());
        }
        if let Some((i, b)) = self.bounds.iter().enumerate().find(|(_, b)| !(b[0] < b[1]) || !b[1].is_finite() || !b[0].is_finite()) {
            return bad(format!("bounds[{i}] = {b:?} must satisfy lower < upper"));
        }
        if self.stochastic_evals == Some(0) {
            return bad("stochastic_evals must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub best_j: f64,
    /// Best objective after each evaluated generation (initial population
    /// first); never increases.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Minimises `objective` over the configured box.
///
/// Binary tournament selection, BLX-0.5 blend crossover, Gaussian mutation
/// with a spread of 10% of each range, elitism, and clamping after every
/// operator. Fitness calls within a generation run in parallel; all random
/// draws come from one seeded stream on the calling thread.
pub fn ga_optimize<F>(cfg: &GaConfig, objective: F) -> Result<GaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = cfg.bounds.len();
    let clamp = |x: &mut Vec<f64>| {
        for (v, b) in x.iter_mut().zip(&cfg.bounds) {
            *v = v.clamp(b[0], b[1]);
        }
    };
    let score = |x: &[f64]| {
        let j = objective(x);
        if j.is_nan() {
            DIVERGENCE_PENALTY
        } else {
            j
        }
    };
    let evaluate = |pop: &[Vec<f64>]| -> Vec<f64> { pop.par_iter().map(|x| score(x)).collect() };

    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| cfg.bounds.iter().map(|b| rng.random_range(b[0]..=b[1])).collect())
        .collect();
    let mut fit = evaluate(&pop);
    let mut evaluations = pop.len();
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let (mut best, mut best_j) = best_of(&pop, &fit);
    history.push(best_j);
    let mut stall = 0;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));
        let mut next: Vec<Vec<f64>> = order[..cfg.elite_count].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..cfg.elite_count].iter().map(|&i| fit[i]).collect();

        let mut offspring = Vec::with_capacity(cfg.population - cfg.elite_count);
        while offspring.len() < cfg.population - cfg.elite_count {
            let a = tournament(&fit, &mut rng);
            let b = tournament(&fit, &mut rng);
            let (mut c1, mut c2) = (pop[a].clone(), pop[b].clone());
            if rng.random::<f64>() < cfg.crossover_fraction {
                for d in 0..dims {
                    let (lo, hi) = (pop[a][d].min(pop[b][d]), pop[a][d].max(pop[b][d]));
                    let ext = 0.5 * (hi - lo);
                    c1[d] = rng.random_range((lo - ext)..=(hi + ext));
                    c2[d] = rng.random_range((lo - ext)..=(hi + ext));
                }
            }
            for child in [&mut c1, &mut c2] {
                clamp(child);
                if rng.random::<f64>() < cfg.mutation_fraction {
                    for (v, bnd) in child.iter_mut().zip(&cfg.bounds) {
                        *v += 0.1 * (bnd[1] - bnd[0]) * unit.sample(&mut rng);
                    }
                    clamp(child);
                }
            }
            offspring.push(c1);
            if offspring.len() < cfg.population - cfg.elite_count {
                offspring.push(c2);
            }
        }
        let off_fit = evaluate(&offspring);
        evaluations += offspring.len();
        next.extend(offspring);
        next_fit.extend(off_fit);
        pop = next;
        fit = next_fit;

        let (cand, cand_j) = best_of(&pop, &fit);
        if cand_j < best_j - cfg.stall_tolerance {
            stall = 0;
        } else {
            stall += 1;
        }
        if cand_j < best_j {
            best = cand;
            best_j = cand_j;
        }
        history.push(best_j);
        if stall >= cfg.stall_generations {
            log::info!("GA stopped after {} generations without improvement", stall);
            break;
        }
    }
    Ok(GaResult {
        best,
        best_j,
        history,
        evaluations,
    })
}

fn best_of(pop: &[Vec<f64>], fit: &[f64]) -> (Vec<f64>, f64) {
    let i = (0..fit.len())
        .min_by(|&a, &b| fit[a].total_cmp(&fit[b]))
        .expect("non-empty population");
    (pop[i].clone(), fit[i])
}

fn tournament(fit: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..fit.len());
    let b = rng.random_range(0..fit.len());
    if fit[b] < fit[a] {
        b
    } else {
        a
    }
}

/// Tuned controller with its objective and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub best: FuzzyFopidConfig,
    pub best_j: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub stochastic_evals: usize,
    pub ga: GaConfig,
}

/// Tunes all six parameters against a scenario's (expected) objective.
pub fn tune(scenario: &Scenario, ga: &GaConfig) -> Result<TuneResult> {
    scenario.validate()?;
    if ga.bounds.len() != 6 {
        return Err(Error::Config(format!("controller tuning needs 6 bounds, got {}", ga.bounds.len())));
    }
    if ga.bounds[4][0] <= 0.0 || ga.bounds[5][0] <= 0.0 || ga.bounds[4][1] > 1.0 || ga.bounds[5][1] > 1.0 {
        return Err(Error::Config("order bounds must lie within (0, 1]".into()));
    }
    if ga.bounds[..4].iter().any(|b| b[0] < 0.0) {
        return Err(Error::Config("scaling-factor bounds must be non-negative".into()));
    }
    let stochastic = scenario.noise.is_some() || scenario.delay.is_some();
    let evals = ga.stochastic_evals.unwrap_or(if stochastic { 5 } else { 1 });
    let res = ga_optimize(ga, |x| {
        let cfg = FuzzyFopidConfig::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
        expected_objective(&cfg, scenario, evals).unwrap_or(DIVERGENCE_PENALTY)
    })?;
    Ok(TuneResult {
        best: FuzzyFopidConfig::from_array([res.best[0], res.best[1], res.best[2], res.best[3], res.best[4], res.best[5]]),
        best_j: res.best_j,
        history: res.history,
        evaluations: res.evaluations,
        stochastic_evals: evals,
        ga: ga.clone(),
    })
}
