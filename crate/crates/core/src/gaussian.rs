//! Standard normal helpers with tail-safe ratios.
//!
//! `pdf / cdf` is evaluated directly while `cdf` keeps full relative
//! precision; below [`TAIL_CUTOFF`] both the ratio and `ln cdf` switch to the
//! Mills-ratio continued fraction so nothing underflows to `0 / 0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use statrs::function::erf::erf_inv;

const TAIL_CUTOFF: f64 = -10.0;
const MILLS_TERMS: u32 = 80;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of [`cdf`] for `p` in `(0, 1)`: a series start polished by
/// Newton steps against [`cdf`].
pub fn inv_cdf(p: f64) -> f64 {
    let mut x = SQRT_2 * erf_inv(2.0 * p - 1.0);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..3 {
        let density = pdf(x);
        if density == 0.0 {
            break;
        }
        x -= (cdf(x) - p) / density;
    }
    x
}

/// Mills ratio `(1 - cdf(x)) / pdf(x)` for large positive `x`.
fn mills_ratio(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=MILLS_TERMS).rev() {
        f = x + f64::from(k) / f;
    }
    1.0 / f
}

/// `ln cdf(x)`, finite for every finite `x`.
pub fn ln_cdf(x: f64) -> f64 {
    if x < TAIL_CUTOFF {
        ln_pdf(x) + mills_ratio(-x).ln()
    } else if x > 0.0 {
        (-cdf(-x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// `pdf(x) / cdf(x)`: the mean-shift multiplier for a one-sided truncation.
///
/// Tends to `-x` as `x -> -inf` and to `0` as `x -> +inf`.
pub fn pdf_over_cdf(x: f64) -> f64 {
    if x < TAIL_CUTOFF {
        1.0 / mills_ratio(-x)
    } else {
        pdf(x) / cdf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }

    #[test]
    fn inverse_round_trips() {
        for p in [0.01, 0.1, 0.25, 0.5, 0.55, 0.9, 0.999] {
            assert!((cdf(inv_cdf(p)) - p).abs() < 1e-13, "p = {p}");
        }
    }

    #[test]
    fn tail_branches_agree_at_cutoff() {
        let x = TAIL_CUTOFF;
        let direct = pdf(x) / cdf(x);
        let cf = 1.0 / mills_ratio(-x);
        assert!((direct - cf).abs() / direct < 1e-13);
        assert!((cdf(x).ln() - (ln_pdf(x) + mills_ratio(-x).ln())).abs() < 1e-12);
    }

    #[test]
    fn extreme_tail_is_finite() {
        for x in [-40.0, -1e3, -1e8] {
            let v = pdf_over_cdf(x);
            assert!(v.is_finite() && v >= -x, "x = {x}, v = {v}");
            assert!(ln_cdf(x).is_finite());
        }
        assert_eq!(pdf_over_cdf(60.0), 0.0);
    }
}
