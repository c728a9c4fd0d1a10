//! Real-coefficient polynomial helpers.
//!
//! Coefficients are stored highest degree first, so `[1.0, 3.0, 2.0]` is
//! `s^2 + 3s + 2`.

use num_complex::Complex64;

/// Horner evaluation at a complex point.
pub fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Drops leading coefficients that are zero relative to the largest one.
pub fn trim_leading(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let first = coeffs
        .iter()
        .position(|c| c.abs() > scale * 1e-13)
        .unwrap_or(coeffs.len());
    coeffs[first..].to_vec()
}

/// Euclidean norm of the coefficient vector.
pub fn norm(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Largest relative residual `|p(r)| / ‖p‖` over the given roots, with `p`
/// normalised to a monic polynomial and each root's residual scaled by
/// `max(1, |r|)^deg`.
pub fn max_relative_residual(coeffs: &[f64], roots: &[Complex64]) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / coeffs[0]).collect();
    let deg = monic.len() as i32 - 1;
    let n = norm(&monic);
    roots
        .iter()
        .map(|&r| eval(&monic, r).norm() / (n * r.norm().max(1.0).powi(deg)))
        .fold(0.0, f64::max)
}

/// All complex roots by Aberth–Ehrlich simultaneous iteration.
///
/// Leading zero coefficients are trimmed first; a constant polynomial has
/// no roots. Exact zero roots (trailing zero coefficients) are split off
/// before iterating.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut p = trim_leading(coeffs);
    let mut out = Vec::new();
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
        out.push(Complex64::new(0.0, 0.0));
    }
    let deg = p.len().saturating_sub(1);
    match deg {
        0 => return out,
        1 => {
            out.push(Complex64::new(-p[1] / p[0], 0.0));
            return out;
        }
        _ => {}
    }

    // Fujiwara bound on root moduli.
    let lead = p[0];
    let bound = (1..=deg)
        .map(|k| {
            let c = (p[k] / lead).abs();
            let c = if k == deg { c / 2.0 } else { c };
            c.powf(1.0 / k as f64)
        })
        .fold(0.0_f64, f64::max)
        * 2.0;
    // Geometric mean of root moduli gives a better starting circle when the
    // roots span several decades.
    let radius = ((p[deg] / lead).abs().powf(1.0 / deg as f64)).clamp(1e-12, bound.max(1e-12));
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    for _ in 0..2000 {
        let mut max_step = 0.0_f64;
        for i in 0..deg {
            let (pv, dpv) = eval_with_derivative(&p, z[i]);
            if pv.norm() == 0.0 {
                continue;
            }
            let ratio = pv / dpv;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    // Newton polish, then snap tiny imaginary parts of real roots.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (pv, dpv) = eval_with_derivative(&p, *zi);
            if dpv.norm() == 0.0 {
                break;
            }
            let next = *zi - pv / dpv;
            if !next.is_finite() || eval(&p, next).norm() >= pv.norm() {
                break;
            }
            *zi = next;
        }
        if zi.im.abs() <= 1e-9 * zi.norm().max(1e-300) {
            zi.im = 0.0;
        }
    }
    out.extend(z);
    out
}

/// Sorts by descending real part, ties by descending imaginary part.
pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Multiplies two polynomials.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic real polynomial with the given real roots.
pub fn from_real_roots(roots: &[f64]) -> Vec<f64> {
    roots
        .iter()
        .fold(vec![1.0], |acc, &r| mul(&acc, &[1.0, -r]))
}
