//! Brute-force reference computations, independent of the library's
//! closed-form moment functions: plain Simpson quadrature of the Gaussian
//! density and bisection.

#![allow(dead_code)]

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// d > eps
    Above,
    /// d < -eps
    Below,
    /// |d| <= eps
    Inside,
}

const PANELS: usize = 20_000;

fn simpson<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let h = (hi - lo) / PANELS as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..PANELS {
        let x = lo + h * i as f64;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

/// Mean and variance of `d ~ N(m, c^2)` restricted to `region`.
pub fn truncated_moments(m: f64, c: f64, eps: f64, region: Region) -> (f64, f64) {
    let reach = 14.0 * c;
    let (lo, hi) = match region {
        Region::Above => (eps, eps.max(m) + reach),
        Region::Below => ((-eps).min(m) - reach, -eps),
        Region::Inside => (-eps, eps),
    };
    if hi <= lo {
        // zero-width interval: the difference is pinned to that point
        return (lo, 0.0);
    }
    // Shift the exponent by its smallest value on [lo, hi] so nothing underflows.
    let nearest = m.clamp(lo, hi);
    let k = (nearest - m) * (nearest - m) / (2.0 * c * c);
    let density = |x: f64| (-(x - m) * (x - m) / (2.0 * c * c) + k).exp();
    let z = simpson(lo, hi, density);
    let mean = simpson(lo, hi, |x| x * density(x)) / z;
    let var = simpson(lo, hi, |x| (x - mean) * (x - mean) * density(x)) / z;
    (mean, var)
}

/// Exact posterior moments `((mu_a, sigma_a), (mu_b, sigma_b))` of both
/// skills given the region of the performance difference.
pub fn posterior(
    a: (f64, f64),
    b: (f64, f64),
    beta: f64,
    tau: f64,
    eps: f64,
    region: Region,
) -> ((f64, f64), (f64, f64)) {
    let var_a = a.1 * a.1 + tau * tau;
    let var_b = b.1 * b.1 + tau * tau;
    let c_sq = 2.0 * beta * beta + var_a + var_b;
    let m = a.0 - b.0;
    let (d_mean, d_var) = truncated_moments(m, c_sq.sqrt(), eps, region);
    let post = |mu: f64, var: f64, sign: f64| {
        let gain = var / c_sq;
        let mean = mu + sign * gain * (d_mean - m);
        let variance = var - gain * var + gain * gain * d_var;
        (mean, variance.sqrt())
    };
    (post(a.0, var_a, 1.0), post(b.0, var_b, -1.0))
}

/// `P(|d| <= eps)` for `d ~ N(0, n * beta^2)` by quadrature.
pub fn draw_probability(eps: f64, beta: f64, n_players: u32) -> f64 {
    let s = beta * f64::from(n_players).sqrt();
    simpson(-eps, eps, |x| (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt()))
}

/// Invert [`draw_probability`] by bisection.
pub fn draw_margin(p_draw: f64, beta: f64, n_players: u32) -> f64 {
    if p_draw == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 20.0 * beta * f64::from(n_players).sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if draw_probability(mid, beta, n_players) < p_draw {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF by quadrature from the far left tail.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    0.5 + simpson(0.0, x, |u| (-(u * u) / 2.0).exp() / (2.0 * PI).sqrt())
}
