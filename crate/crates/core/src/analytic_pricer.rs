//! Semi-closed-form call and put prices from the characteristic function of
//! log-spot, used as the reference solution for the grid solvers.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston_model::{HestonParams, OperatorForm};
use crate::par::{self, Execution};
use crate::quadrature::GaussLegendre;
use crate::witness::std_normal_cdf;

/// Model parameters in the `ω = κθ` parameterisation, which keeps `κ = 0`
/// in the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharFnParams {
    pub kappa: f64,
    pub omega: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub q: f64,
    pub v0: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
}

impl CharFnParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(kappa: f64, omega: f64, sigma: f64, rho: f64, r: f64, q: f64, v0: f64, maturity: f64) -> Result<Self> {
        let p = Self { kappa, omega, sigma, rho, r, q, v0, maturity };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of `form` built from Heston parameters; the market price
    /// of volatility risk shifts the mean reversion.
    pub fn from_heston(p: &HestonParams, form: OperatorForm) -> Result<Self> {
        let c = p.coefficients(form)?;
        Self::new(c.mean_reversion, c.omega, c.sigma, c.rho, p.r, p.q, p.v0, p.maturity)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa, self.omega, self.sigma, self.rho, self.r, self.q, self.v0, self.maturity];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        let checks = [
            (self.kappa >= 0.0, "kappa >= 0"),
            (self.omega >= 0.0, "omega >= 0"),
            (self.sigma > 0.0, "sigma > 0"),
            ((-1.0..=1.0).contains(&self.rho), "rho in [-1, 1]"),
            (self.v0 >= 0.0, "v0 >= 0"),
            (self.maturity > 0.0, "T > 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidParams(format!("need {what}")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, spot: f64) -> f64 {
        spot * ((self.r - self.q) * self.maturity).exp()
    }
}

fn expm1(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let s = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * s * s, a.exp() * b.sin())
}

fn log1p(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    Complex64::new(0.5 * (2.0 * a + a * a + b * b).ln_1p(), b.atan2(1.0 + a))
}

/// Characteristic function of `ln(S_T / F)`.
fn char_fn_centered(p: &CharFnParams, u: Complex64) -> Complex64 {
    if u == Complex64::new(0.0, 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    let i = Complex64::i();
    let s2 = p.sigma * p.sigma;
    let q = i * u + u * u;
    let beta = p.kappa - p.rho * p.sigma * i * u;
    let d = (beta * beta + s2 * q).sqrt();
    let bd = beta + d;
    // β − d in cancellation-free form
    let g = -s2 * q / (bd * bd);
    let one_minus_e = -expm1(-d * p.maturity);
    let e = 1.0 - one_minus_e;
    let dd = -q / bd * one_minus_e / (1.0 - g * e);
    let c = p.omega * (-q * p.maturity / bd - 2.0 / s2 * log1p(g * one_minus_e / (1.0 - g)));
    (c + dd * p.v0).exp()
}

/// Characteristic function `E[exp(iu ln S_T)]` with `spot_x = ln F` the
/// log-forward. Uses the formulation that stays on the principal branch of
/// the logarithm for all maturities and is stable as `σ → 0`.
pub fn char_fn(p: &CharFnParams, u: Complex64, spot_x: f64) -> Complex64 {
    (Complex64::i() * u * spot_x).exp() * char_fn_centered(p, u)
}

/// Truncation and resolution of the Fourier integrals: composite `nodes`-point
/// Gauss–Legendre on panels of width `panel` over `(0, U]`, starting from
/// `U = panel` and doubling up to `max_doublings` times until the integrand
/// magnitude at `U` is below `tail_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub nodes: usize,
    pub panel: f64,
    pub max_doublings: usize,
    pub tail_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { nodes: 128, panel: 16.0, max_doublings: 4, tail_tol: 1e-12 }
    }
}

struct Probabilities {
    p1: f64,
    p2: f64,
}

fn probabilities(p: &CharFnParams, spot: f64, strike: f64, cfg: &QuadConfig) -> Result<Probabilities> {
    p.validate()?;
    if !(spot > 0.0 && spot.is_finite()) || !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidParams(format!("spot and strike must be positive, got S={spot}, K={strike}")));
    }
    let k = (strike / p.forward(spot)).ln();
    let i = Complex64::i();
    let integrand = |u: f64| -> (f64, f64) {
        let uc = Complex64::new(u, 0.0);
        let rot = (-i * uc * k).exp() / (i * uc);
        let f1 = (rot * char_fn_centered(p, uc - i)).re;
        let f2 = (rot * char_fn_centered(p, uc)).re;
        (f1, f2)
    };
    let gl = GaussLegendre::new(cfg.nodes);
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut upper = 0.0;
    let mut panels = 1usize;
    for doubling in 0..=cfg.max_doublings {
        while upper < panels as f64 * cfg.panel - 0.5 * cfg.panel {
            let a = upper;
            let b = upper + cfg.panel;
            for (u, w) in gl.mapped(a, b) {
                let (f1, f2) = integrand(u);
                s1 += w * f1;
                s2 += w * f2;
            }
            upper = b;
        }
        let (t1, t2) = integrand(upper);
        let tail = t1.abs().max(t2.abs());
        if tail < cfg.tail_tol {
            break;
        }
        if doubling == cfg.max_doublings {
            return Err(Error::QuadratureTailTooFat { tail, cutoff: upper });
        }
        panels *= 2;
    }
    Ok(Probabilities { p1: 0.5 + s1 / PI, p2: 0.5 + s2 / PI })
}

pub fn call_price(p: &CharFnParams, spot: f64, strike: f64) -> Result<f64> {
    call_price_with(p, spot, strike, &QuadConfig::default())
}

/// `S e^{−qT} P₁ − K e^{−rT} P₂`, clamped to the no-arbitrage envelope to
/// absorb quadrature round-off.
pub fn call_price_with(p: &CharFnParams, spot: f64, strike: f64, cfg: &QuadConfig) -> Result<f64> {
    let pr = probabilities(p, spot, strike, cfg)?;
    let df_s = spot * (-p.q * p.maturity).exp();
    let df_k = strike * (-p.r * p.maturity).exp();
    let price = df_s * pr.p1 - df_k * pr.p2;
    Ok(price.clamp((df_s - df_k).max(0.0), df_s))
}

pub fn put_price(p: &CharFnParams, spot: f64, strike: f64) -> Result<f64> {
    put_price_with(p, spot, strike, &QuadConfig::default())
}

/// `K e^{−rT} (1 − P₂) − S e^{−qT} (1 − P₁)`.
pub fn put_price_with(p: &CharFnParams, spot: f64, strike: f64, cfg: &QuadConfig) -> Result<f64> {
    let pr = probabilities(p, spot, strike, cfg)?;
    let df_s = spot * (-p.q * p.maturity).exp();
    let df_k = strike * (-p.r * p.maturity).exp();
    let price = df_k * (1.0 - pr.p2) - df_s * (1.0 - pr.p1);
    Ok(price.clamp((df_k - df_s).max(0.0), df_k))
}

/// Calls for each strike, priced concurrently under `Parallel`.
pub fn price_ladder(p: &CharFnParams, spot: f64, strikes: &[f64], exec: Execution) -> Result<Vec<f64>> {
    par::map_slice(exec, strikes, |&k| call_price(p, spot, k)).into_iter().collect()
}

/// Lognormal call value.
pub fn bs_price(spot: f64, strike: f64, maturity: f64, vol: f64, r: f64, q: f64) -> f64 {
    let fwd = spot * ((r - q) * maturity).exp();
    let df = (-r * maturity).exp();
    let sd = vol * maturity.sqrt();
    if sd == 0.0 {
        return df * (fwd - strike).max(0.0);
    }
    let d1 = ((fwd / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    df * (fwd * std_normal_cdf(d1) - strike * std_normal_cdf(d2))
}
