//! Two-player Bayesian skill updates.
//!
//! Each agent's skill is a Gaussian belief. A match outcome constrains the
//! difference of two noisy performances; the posterior is moment-matched back
//! to a Gaussian using the truncated-Gaussian multipliers `v` (mean shift) and
//! `w` (variance shrink).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatingError {
    #[error("invalid rating input: {0}")]
    InvalidInput(String),
}

/// Hyperparameters of the rating model, in rating points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RatingParams {
    pub mu0: f64,
    pub sigma0: f64,
    /// Performance noise around skill.
    pub beta: f64,
    /// Dynamics noise added to each variance before every update.
    pub tau: f64,
    pub p_draw: f64,
}

impl Default for RatingParams {
    fn default() -> Self {
        Self {
            mu0: 25.0,
            sigma0: 25.0 / 3.0,
            beta: 25.0 / 6.0,
            tau: 25.0 / 300.0,
            p_draw: 0.10,
        }
    }
}

impl RatingParams {
    pub fn validate(&self) -> Result<(), RatingError> {
        let bad = |what: &str| Err(RatingError::InvalidInput(what.to_owned()));
        if !self.mu0.is_finite() {
            return bad("mu0 must be finite");
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return bad("sigma0 must be finite and > 0");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be finite and > 0");
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return bad("tau must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.p_draw) {
            return bad("pDraw must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn prior(&self) -> Rating {
        Rating {
            mu: self.mu0,
            sigma: self.sigma0,
        }
    }

    /// Draw margin for a two-player match under these parameters.
    pub fn draw_margin(&self) -> Result<f64, RatingError> {
        draw_margin_from_probability(self.p_draw, self.beta, 2)
    }
}

/// Gaussian skill belief for one agent on one task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

impl Rating {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, RatingError> {
        let r = Self { mu, sigma };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RatingError> {
        if !self.mu.is_finite() {
            return Err(RatingError::InvalidInput(format!("mu = {} is not finite", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(RatingError::InvalidInput(format!(
                "sigma = {} must be finite and > 0",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `mu - k * sigma`.
    pub fn conservative(&self, k: f64) -> f64 {
        conservative_score(self, k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    FirstWins,
    SecondWins,
    Draw,
}

impl Outcome {
    /// The same result seen with the players relabeled.
    pub fn swapped(self) -> Self {
        match self {
            Outcome::FirstWins => Outcome::SecondWins,
            Outcome::SecondWins => Outcome::FirstWins,
            Outcome::Draw => Outcome::Draw,
        }
    }
}

pub fn conservative_score(r: &Rating, k: f64) -> f64 {
    r.mu - k * r.sigma
}

/// Margin `epsilon` such that `P(|p_1 - p_2| <= epsilon) = p_draw` when the
/// players are evenly matched and each of `n_players` contributes `beta`
/// performance noise.
pub fn draw_margin_from_probability(p_draw: f64, beta: f64, n_players: u32) -> Result<f64, RatingError> {
    if !(0.0..1.0).contains(&p_draw) {
        return Err(RatingError::InvalidInput(format!("draw probability {p_draw} outside [0, 1)")));
    }
    if !(beta.is_finite() && beta > 0.0) || n_players == 0 {
        return Err(RatingError::InvalidInput("beta must be > 0 with at least one player".into()));
    }
    if p_draw == 0.0 {
        return Ok(0.0);
    }
    let z = gaussian::inv_cdf(0.5 * (1.0 + p_draw));
    Ok(z * f64::from(n_players).sqrt() * beta)
}

/// Probability-of-draw style quality: 1 for identical certain players,
/// falling towards 0 as the mean gap grows relative to total uncertainty.
pub fn match_quality(a: &Rating, b: &Rating, params: &RatingParams) -> f64 {
    let two_beta_sq = 2.0 * params.beta * params.beta;
    let c_sq = two_beta_sq + (a.sigma * a.sigma + b.sigma * b.sigma);
    let gap = a.mu - b.mu;
    (two_beta_sq / c_sq).sqrt() * (-(gap * gap) / (2.0 * c_sq)).exp()
}

/// Posterior ratings of both players after one match.
pub fn update_pair(
    a: &Rating,
    b: &Rating,
    outcome: Outcome,
    params: &RatingParams,
) -> Result<(Rating, Rating), RatingError> {
    params.validate()?;
    a.validate()?;
    b.validate()?;
    let eps = params.draw_margin()?;
    let out = match outcome {
        Outcome::FirstWins => win_update(a, b, params, eps),
        Outcome::SecondWins => {
            let (b_post, a_post) = win_update(b, a, params, eps);
            (a_post, b_post)
        }
        Outcome::Draw => draw_update(a, b, params, eps),
    };
    Ok(out)
}

struct Setup {
    var_a: f64,
    var_b: f64,
    c: f64,
    c_sq: f64,
    /// Standardized mean difference `(mu_a - mu_b) / c`.
    t: f64,
    /// Standardized draw margin.
    e: f64,
}

fn setup(a: &Rating, b: &Rating, params: &RatingParams, eps: f64) -> Setup {
    let tau_sq = params.tau * params.tau;
    let var_a = a.sigma * a.sigma + tau_sq;
    let var_b = b.sigma * b.sigma + tau_sq;
    let c_sq = 2.0 * params.beta * params.beta + (var_a + var_b);
    let c = c_sq.sqrt();
    Setup {
        var_a,
        var_b,
        c,
        c_sq,
        t: (a.mu - b.mu) / c,
        e: eps / c,
    }
}

fn apply(a: &Rating, b: &Rating, s: &Setup, v: f64, w: f64) -> (Rating, Rating) {
    let w = w.clamp(0.0, 1.0);
    let post = |r: &Rating, var: f64, sign: f64| Rating {
        mu: r.mu + sign * (var / s.c) * v,
        sigma: (var * (1.0 - (var / s.c_sq) * w)).sqrt(),
    };
    (post(a, s.var_a, 1.0), post(b, s.var_b, -1.0))
}

fn win_update(winner: &Rating, loser: &Rating, params: &RatingParams, eps: f64) -> (Rating, Rating) {
    let s = setup(winner, loser, params, eps);
    let (v, w) = win_multipliers(s.t, s.e);
    apply(winner, loser, &s, v, w)
}

fn draw_update(a: &Rating, b: &Rating, params: &RatingParams, eps: f64) -> (Rating, Rating) {
    let s = setup(a, b, params, eps);
    let (v, w) = draw_multipliers(s.t.abs(), s.e);
    let v = if s.t < 0.0 { -v } else { v };
    apply(a, b, &s, v, w)
}

/// `v` and `w` for the event `d > e` where `d ~ N(t, 1)`.
pub(crate) fn win_multipliers(t: f64, e: f64) -> (f64, f64) {
    let x = t - e;
    let v = gaussian::pdf_over_cdf(x);
    (v, v * (v + x))
}

/// `v` and `w` for the event `|d| <= e` where `d ~ N(t, 1)`, `t >= 0`.
///
/// Every term is scaled by `cdf(e - t)` so the result stays finite when both
/// tail probabilities underflow. `e = 0` is the limit of conditioning on
/// `d = 0` exactly.
pub(crate) fn draw_multipliers(t: f64, e: f64) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    if e == 0.0 {
        return (-t, 1.0);
    }
    let hi = e - t;
    let lo = -e - t;
    let lambda = gaussian::pdf_over_cdf(hi);
    // 1 - cdf(lo) / cdf(hi)
    let mass = -(gaussian::ln_cdf(lo) - gaussian::ln_cdf(hi)).exp_m1();
    // pdf(lo) / pdf(hi) = exp(-2 e t)
    let pdf_ratio_m1 = (-2.0 * e * t).exp_m1();
    let v = lambda * pdf_ratio_m1 / mass;
    let w = v * v + lambda * (hi - lo * (1.0 + pdf_ratio_m1)) / mass;
    (v, w)
}
