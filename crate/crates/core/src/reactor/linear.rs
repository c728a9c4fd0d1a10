use nalgebra::{Matrix4, RowVector4, Vector4};
use num_complex::Complex64;

use super::params::ReactorParams;
use crate::error::{Error, Result};
use crate::poly;

/// Single-input single-output model `x' = Ax + Bu`, `y = Cx + Du` with
/// state `[δn_r, δc_r, δT_f, δT_e]` and input `δρ_rod`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStateSpace {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub c: RowVector4<f64>,
    pub d: f64,
}

impl LinearStateSpace {
    pub fn derivative(&self, x: &Vector4<f64>, u: f64) -> Vector4<f64> {
        self.a * x + self.b * u
    }

    pub fn output(&self, x: &Vector4<f64>, u: f64) -> f64 {
        (self.c * x)[0] + self.d * u
    }

    /// RK4 step with the input held over the interval.
    pub fn rk4_step(&self, x: &Vector4<f64>, u: f64, dt: f64) -> Vector4<f64> {
        let k1 = self.derivative(x, u);
        let k2 = self.derivative(&(x + k1 * (0.5 * dt)), u);
        let k3 = self.derivative(&(x + k2 * (0.5 * dt)), u);
        let k4 = self.derivative(&(x + k3 * dt), u);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }
}

/// Analytic Jacobian of the lumped-group model about its steady state.
pub fn linearize(params: &ReactorParams) -> Result<LinearStateSpace> {
    params.validate()?;
    if params.groups() != 1 {
        return Err(Error::UnsupportedGroupCount(params.groups()));
    }
    let beta = params.beta;
    let gen = params.generation_time;
    let lam = params.decay_constants[0];
    let n0 = params.n_r0;
    let (mu_f, mu_c, om, mc) = (params.mu_fuel, params.mu_coolant, params.omega, params.m_coolant);

    #[rustfmt::skip]
    let a = Matrix4::new(
        -beta / gen,                          lam,  n0 * params.alpha_fuel / gen, n0 * params.alpha_coolant / (2.0 * gen),
         beta / gen,                         -lam,  0.0,                          0.0,
         params.p0 / params.heating_capacity(), 0.0, -om / mu_f,                  om / (2.0 * mu_f),
         0.0,                                 0.0,  2.0 * om / mu_c,             -(2.0 * mc + om) / mu_c,
    );
    Ok(LinearStateSpace {
        a,
        b: Vector4::new(n0 / gen, 0.0, 0.0, 0.0),
        c: RowVector4::new(1.0, 0.0, 0.0, 0.0),
        d: 0.0,
    })
}

/// `−C A⁻¹ B + D`.
pub fn dc_gain(ss: &LinearStateSpace) -> Result<f64> {
    let scale = ss.a.abs().max();
    let det = ss.a.determinant();
    if scale == 0.0 || det.abs() <= 1e-14 * scale.powi(4) {
        return Err(Error::SingularA);
    }
    let x = ss.a.lu().solve(&ss.b).ok_or(Error::SingularA)?;
    Ok(-(ss.c * x)[0] + ss.d)
}

/// Zero-pole-gain transfer function `gain · Π(s − z) / Π(s − p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
}

impl RationalTF {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let num: Complex64 = self.zeros.iter().map(|z| s - z).product();
        let den: Complex64 = self.poles.iter().map(|p| s - p).product();
        num / den * self.gain
    }

    /// `gain · Π(−z) / Π(−p)`; infinite when a pole sits at the origin.
    pub fn dc_gain(&self) -> f64 {
        let num: Complex64 = self.zeros.iter().map(|z| -z).product();
        let den: Complex64 = self.poles.iter().map(|p| -p).product();
        (num / den).re * self.gain
    }

    /// Removes pole/zero pairs closer than `tol` (relative to the pole
    /// magnitude, absolute below one).
    pub fn cancel_common(&self, tol: f64) -> RationalTF {
        let mut zeros = self.zeros.clone();
        let mut poles = Vec::with_capacity(self.poles.len());
        for &p in &self.poles {
            let hit = zeros
                .iter()
                .position(|z| (z - p).norm() <= tol * p.norm().max(1.0));
            match hit {
                Some(i) => {
                    zeros.remove(i);
                }
                None => poles.push(p),
            }
        }
        RationalTF {
            zeros,
            poles,
            gain: self.gain,
        }
    }
}

/// Characteristic polynomial and `C adj(sI − A) B` by the Faddeev–LeVerrier
/// recursion, both highest degree first.
fn faddeev_leverrier(ss: &LinearStateSpace) -> (Vec<f64>, Vec<f64>) {
    let n = 4;
    let ident = Matrix4::<f64>::identity();
    let mut char_poly = vec![1.0];
    let mut adj_terms = Vec::with_capacity(n);
    let mut m = ident;
    for k in 1..=n {
        if k > 1 {
            m = ss.a * m + ident * char_poly[k - 1];
        }
        adj_terms.push((ss.c * m * ss.b)[0]);
        let ck = -(ss.a * m).trace() / k as f64;
        char_poly.push(ck);
    }
    let mut numerator = Vec::with_capacity(n + 1);
    numerator.push(ss.d);
    for k in 0..n {
        numerator.push(adj_terms[k] + ss.d * char_poly[k + 1]);
    }
    (char_poly, numerator)
}

/// Zero-pole-gain form of `C (sI − A)⁻¹ B + D`.
pub fn to_transfer_function(ss: &LinearStateSpace) -> RationalTF {
    let (den, num) = faddeev_leverrier(ss);
    let num = poly::trim_leading(&num);
    let mut poles = poly::roots(&den);
    let mut zeros = poly::roots(&num);
    poly::sort_roots(&mut poles);
    poly::sort_roots(&mut zeros);
    let residual = poly::max_relative_residual(&den, &poles)
        .max(poly::max_relative_residual(&num, &zeros));
    if residual > 1e-6 {
        log::warn!("transfer-function roots poorly conditioned: relative residual {residual:.3e}");
    }
    RationalTF {
        zeros,
        poles,
        gain: num.first().copied().unwrap_or(0.0),
    }
}
