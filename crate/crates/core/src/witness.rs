//! Closed-form solutions with vanishing terminal (or initial) data.
//!
//! | kind | function | equation |
//! |------|----------|----------|
//! | [`WitnessKind::PiHeston`] | `Π(v,t) = v⁻¹ exp(−r(T−t) − 2v/(σ²(T−t)))` | `(σ²v/2)Π_vv + σ²Π_v + Π_t − rΠ = 0` |
//! | [`WitnessKind::PiCev32`]  | `Π(y,τ) = (4y/σ²) exp(−1/(2yτ))`           | `Π_τ = 2y³ Π_yy` |
//! | [`WitnessKind::PiCev2`]   | `Π(y,t) = 2y N(−1/(σy√t))`                 | `Π_t = (σ²/2) y⁴ Π_yy` |
//!
//! The power-law witness for exponent 2 is `y − E[Y_t]`, where
//! `E[Y_t] = y(1 − 2N(−1/(σy√t)))` ([`cev2_expectation`]) is the expected
//! value of the strict local martingale `dY = σY² dW`. Both functions solve
//! the same equation; only the difference has zero initial data.
//!
//! Exponentials are evaluated in log space and exponentiated once; results
//! below the smallest normal `f64` are returned as exact zero.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `Π(v, t)`, variables `(v, t)`, vanishes as `t → T⁻`.
    PiHeston,
    /// `Π₂(y, t)`, power-law exponent 2, vanishes as `t → 0⁺`.
    PiCev2,
    /// `Π(y, τ)`, power-law exponent 3/2, vanishes as `τ → 0⁺`.
    PiCev32,
}

impl WitnessKind {
    pub const ALL: [WitnessKind; 3] = [WitnessKind::PiHeston, WitnessKind::PiCev2, WitnessKind::PiCev32];

    /// Names of the (space, time) coordinates.
    pub fn coordinates(self) -> (&'static str, &'static str) {
        match self {
            WitnessKind::PiHeston => ("v", "t"),
            WitnessKind::PiCev2 => ("y", "t"),
            WitnessKind::PiCev32 => ("y", "tau"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pi_heston" | "PiHeston" => Some(WitnessKind::PiHeston),
            "pi_cev2" | "PiCEV2" | "PiCev2" => Some(WitnessKind::PiCev2),
            "pi_cev32" | "PiCEV32" | "PiCev32" => Some(WitnessKind::PiCev32),
            _ => None,
        }
    }

    /// `(a, α)` of `u_τ = a y^{2α} u_yy` for the power-law witnesses.
    pub fn power_law(self, sigma: f64) -> Option<(f64, f64)> {
        match self {
            WitnessKind::PiHeston => None,
            WitnessKind::PiCev2 => Some((0.5 * sigma * sigma, 2.0)),
            WitnessKind::PiCev32 => Some((2.0, 1.5)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub sigma: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
}

impl WitnessParams {
    pub fn new(sigma: f64, r: f64, maturity: f64) -> Result<Self> {
        let p = Self { sigma, r, maturity };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParams(format!("r must be >= 0, got {}", self.r)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidParams(format!("T must be > 0, got {}", self.maturity)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessValue {
    pub value: f64,
    /// True when the point is the vanishing epoch and the value comes from
    /// continuous extension.
    pub extended: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub value: f64,
    pub d_space: f64,
    pub d_space2: f64,
    pub d_time: f64,
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    flush(libm::exp(-0.5 * z * z) / (2.0 * PI).sqrt())
}

fn flush(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

fn exp_flushed(log_value: f64) -> f64 {
    if log_value < f64::MIN_POSITIVE.ln() {
        0.0
    } else {
        flush(log_value.exp())
    }
}

/// `y (1 − 2N(−1/(σ y √t)))`, the expectation of the exponent-2 power-law
/// diffusion started at `y`. Tends to `y` as `t → 0⁺`.
pub fn cev2_expectation(y: f64, t: f64, sigma: f64) -> f64 {
    let z = 1.0 / (sigma * y * t.sqrt());
    y * (1.0 - 2.0 * std_normal_cdf(-z))
}

enum Epoch {
    Interior,
    Vanishing,
}

fn check_point(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> Result<Epoch> {
    p.validate()?;
    if !(space > 0.0 && space.is_finite()) {
        return Err(Error::DomainError(format!("{kind:?} needs a positive space coordinate, got {space}")));
    }
    if !time.is_finite() {
        return Err(Error::EpochError(format!("non-finite time {time}")));
    }
    match kind {
        WitnessKind::PiHeston => {
            if time < p.maturity {
                Ok(Epoch::Interior)
            } else if time == p.maturity {
                Ok(Epoch::Vanishing)
            } else {
                Err(Error::EpochError(format!("t = {time} beyond maturity {}", p.maturity)))
            }
        }
        WitnessKind::PiCev2 | WitnessKind::PiCev32 => {
            if time > 0.0 {
                Ok(Epoch::Interior)
            } else if time == 0.0 {
                Ok(Epoch::Vanishing)
            } else {
                Err(Error::EpochError(format!("time must be >= 0, got {time}")))
            }
        }
    }
}

/// Closed-form value at `(space, time)`.
pub fn eval_witness(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> Result<WitnessValue> {
    match check_point(kind, p, space, time)? {
        Epoch::Vanishing => Ok(WitnessValue { value: 0.0, extended: true }),
        Epoch::Interior => Ok(WitnessValue { value: interior_value(kind, p, space, time), extended: false }),
    }
}

fn interior_value(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> f64 {
    let s2 = p.sigma * p.sigma;
    match kind {
        WitnessKind::PiHeston => {
            let v = space;
            let rem = p.maturity - time;
            exp_flushed(-v.ln() - p.r * rem - 2.0 * v / (s2 * rem))
        }
        WitnessKind::PiCev32 => {
            let (y, tau) = (space, time);
            exp_flushed((4.0 * y / s2).ln() - 1.0 / (2.0 * y * tau))
        }
        WitnessKind::PiCev2 => {
            let (y, t) = (space, time);
            let z = 1.0 / (p.sigma * y * t.sqrt());
            flush(2.0 * y * std_normal_cdf(-z))
        }
    }
}

/// Value with first and second space derivative and first time derivative,
/// all in closed form. Strict interior points only.
pub fn witness_partials(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> Result<Partials> {
    if let Epoch::Vanishing = check_point(kind, p, space, time)? {
        return Err(Error::EpochError(format!("{kind:?} partials need a strict interior point")));
    }
    let s2 = p.sigma * p.sigma;
    let value = interior_value(kind, p, space, time);
    let out = match kind {
        WitnessKind::PiHeston => {
            let v = space;
            let rem = p.maturity - time;
            let k = 2.0 / (s2 * rem);
            let g = 1.0 / v + k;
            Partials {
                value,
                d_space: -value * g,
                d_space2: value * (g * g + 1.0 / (v * v)),
                d_time: value * (p.r - 2.0 * v / (s2 * rem * rem)),
            }
        }
        WitnessKind::PiCev32 => {
            let (y, tau) = (space, time);
            let w = 1.0 / (2.0 * y * tau);
            // c·e^{−w} = value / y
            let ce = value / y;
            Partials {
                value,
                d_space: ce * (1.0 + w),
                d_space2: ce / (4.0 * y * y * y * tau * tau),
                d_time: ce / (2.0 * tau * tau),
            }
        }
        WitnessKind::PiCev2 => {
            let (y, t) = (space, time);
            let z = 1.0 / (p.sigma * y * t.sqrt());
            let phi = std_normal_pdf(z);
            Partials {
                value,
                d_space: 2.0 * std_normal_cdf(-z) + 2.0 * z * phi,
                d_space2: 2.0 * z * z * z * phi / y,
                d_time: phi / (p.sigma * t * t.sqrt()),
            }
        }
    };
    Ok(out)
}

/// The witness's own equation evaluated with the analytic partials.
pub fn residual(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> Result<f64> {
    let d = witness_partials(kind, p, space, time)?;
    Ok(residual_from_partials(kind, p, space, &d))
}

pub(crate) fn residual_from_partials(kind: WitnessKind, p: &WitnessParams, space: f64, d: &Partials) -> f64 {
    let s2 = p.sigma * p.sigma;
    match kind {
        WitnessKind::PiHeston => {
            let v = space;
            0.5 * s2 * v * d.d_space2 + s2 * d.d_space + d.d_time - p.r * d.value
        }
        WitnessKind::PiCev32 => d.d_time - 2.0 * space.powi(3) * d.d_space2,
        WitnessKind::PiCev2 => d.d_time - 0.5 * s2 * space.powi(4) * d.d_space2,
    }
}

/// Residual scaled by `1 + |Π| + |Π_t|`, the quantity the exactness
/// contract bounds.
pub fn relative_residual(kind: WitnessKind, p: &WitnessParams, space: f64, time: f64) -> Result<f64> {
    let d = witness_partials(kind, p, space, time)?;
    let res = residual_from_partials(kind, p, space, &d);
    Ok(res.abs() / (1.0 + d.value.abs() + d.d_time.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(sigma: f64, r: f64, t: f64) -> WitnessParams {
        WitnessParams::new(sigma, r, t).unwrap()
    }

    #[test]
    fn cdf_reference_values() {
        // 40-digit reference values
        let table = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_948_585_232_5),
            (-1.0, 0.158_655_253_931_457_051_414_767_5),
            (2.5, 0.993_790_334_674_223_864_833_021_9),
            (-3.0, 0.001_349_898_031_630_094_526_651_815),
            (0.1, 0.539_827_837_277_028_983_668_933_9),
            (-7.0, 1.279_812_543_885_835_004_383_624e-12),
            (5.0, 0.999_999_713_348_428_120_806_088_3),
        ];
        for (z, want) in table {
            assert!((std_normal_cdf(z) - want).abs() <= 1e-12, "z={z}");
        }
        assert_eq!(std_normal_cdf(40.0), 1.0);
        assert_eq!(std_normal_cdf(-40.0), 0.0);
        for k in -80..=80 {
            let z = 0.1 * k as f64;
            assert!((std_normal_cdf(-z) - (1.0 - std_normal_cdf(z))).abs() <= 1e-15);
            assert!(std_normal_cdf(z + 0.1) >= std_normal_cdf(z));
        }
    }

    #[test]
    fn value_examples() {
        let p = wp(2.0, 0.0, 1.0);
        let v = eval_witness(WitnessKind::PiCev32, &p, 1.0, 0.5).unwrap();
        assert!((v.value - (-1.0f64).exp()).abs() < 1e-15);
        assert!(!v.extended);

        let p = wp(1.0, 0.05, 1.0);
        let v = eval_witness(WitnessKind::PiHeston, &p, 1.0, 1.0).unwrap();
        assert_eq!(v, WitnessValue { value: 0.0, extended: true });
        assert!(eval_witness(WitnessKind::PiHeston, &p, 1.0, 1.0 - 1e-9).unwrap().value < 1e-300);
        assert!(matches!(eval_witness(WitnessKind::PiHeston, &p, 1.0, 1.5), Err(Error::EpochError(_))));
        assert!(matches!(eval_witness(WitnessKind::PiHeston, &p, 0.0, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(eval_witness(WitnessKind::PiCev2, &p, -1.0, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(eval_witness(WitnessKind::PiCev32, &p, 1.0, -0.5), Err(Error::EpochError(_))));
        assert!(eval_witness(WitnessKind::PiCev2, &p, 1.0, 0.0).unwrap().extended);

        // y -> 0+ at fixed t
        let small = eval_witness(WitnessKind::PiCev2, &p, 1e-9, 1.0).unwrap().value;
        assert!(small.abs() < 1e-12);
    }

    #[test]
    fn cev2_witness_is_gap_to_expectation() {
        let p = wp(0.7, 0.0, 1.0);
        for &(y, t) in &[(0.5, 0.3), (2.0, 1.0), (10.0, 4.0)] {
            let w = eval_witness(WitnessKind::PiCev2, &p, y, t).unwrap().value;
            assert!((w - (y - cev2_expectation(y, t, 0.7))).abs() < 1e-14 * y);
        }
        // expectation starts at y, the witness at 0
        assert!((cev2_expectation(1.5, 1e-10, 0.7) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn partial_examples() {
        let p = wp(2.0, 0.0, 1.0);
        let d = witness_partials(WitnessKind::PiCev32, &p, 1.0, 0.5).unwrap();
        assert!((d.d_time - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((2.0 * d.d_space2 - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(residual(WitnessKind::PiCev32, &p, 1.0, 0.5).unwrap().abs() < 1e-15);

        let p = wp(1.0, 0.05, 1.0);
        let rel = relative_residual(WitnessKind::PiHeston, &p, 0.5, 0.3).unwrap();
        assert!(rel < 1e-12);

        let p = wp(1.0, 0.0, 1.0);
        let d = witness_partials(WitnessKind::PiCev2, &p, 2.0, 1.0).unwrap();
        let z: f64 = 0.5;
        let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        assert!((d.d_time - phi).abs() < 1e-15);
        assert!(relative_residual(WitnessKind::PiCev2, &p, 2.0, 1.0).unwrap() < 1e-12);

        assert!(witness_partials(WitnessKind::PiCev2, &p, 2.0, 0.0).is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let p = wp(0.8, 0.03, 1.5);
        let pts = [
            (WitnessKind::PiHeston, 0.4, 0.7),
            (WitnessKind::PiCev2, 1.3, 0.9),
            (WitnessKind::PiCev32, 0.8, 0.6),
        ];
        for (kind, x, t) in pts {
            let f = |x: f64, t: f64| eval_witness(kind, &p, x, t).unwrap().value;
            let d = witness_partials(kind, &p, x, t).unwrap();
            let h = 1e-5;
            let dx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let dt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
            assert!((dx - d.d_space).abs() <= 1e-7 * d.d_space.abs().max(1e-3), "{kind:?} dx");
            assert!((dt - d.d_time).abs() <= 1e-7 * d.d_time.abs().max(1e-3), "{kind:?} dt");
        }
    }

    #[test]
    fn second_derivative_richardson_order() {
        let p = wp(0.8, 0.03, 1.5);
        for (kind, x, t) in [
            (WitnessKind::PiHeston, 0.4, 0.7),
            (WitnessKind::PiCev2, 1.3, 0.9),
            (WitnessKind::PiCev32, 0.8, 0.6),
        ] {
            let f = |x: f64| eval_witness(kind, &p, x, t).unwrap().value;
            let exact = witness_partials(kind, &p, x, t).unwrap().d_space2;
            // fourth-order central stencil
            let d4 = |h: f64| (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h);
            let e1 = (d4(0.02) - exact).abs();
            let e2 = (d4(0.01) - exact).abs();
            let order = (e1 / e2).log2();
            assert!(order >= 3.5, "{kind:?}: order {order}");
        }
    }

    #[test]
    fn asymptotics() {
        let p = wp(1.0, 0.05, 1.0);
        let t = 0.3;
        let vp = 1e-6 * eval_witness(WitnessKind::PiHeston, &p, 1e-6, t).unwrap().value;
        let lim = (-0.05f64 * 0.7).exp();
        assert!((vp - lim).abs() / lim < 1e-4);

        let p = wp(1.7, 0.0, 1.0);
        let ratio = eval_witness(WitnessKind::PiCev32, &p, 1e6, 0.4).unwrap().value / 1e6;
        assert!((ratio - 4.0 / (1.7 * 1.7)).abs() / ratio < 1e-5);
        let ratio = eval_witness(WitnessKind::PiCev2, &p, 1e6, 0.4).unwrap().value / 1e6;
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vanishing_epoch() {
        let p = wp(1.0, 0.02, 1.0);
        for k in 0..=45 {
            let x = 0.5 + 0.1 * k as f64;
            assert!(eval_witness(WitnessKind::PiHeston, &p, x, 1.0 - 1e-8).unwrap().value <= 1e-30);
            assert!(eval_witness(WitnessKind::PiCev32, &p, x, 1e-8).unwrap().value <= 1e-30);
            assert!(eval_witness(WitnessKind::PiCev2, &p, x, 1e-8).unwrap().value <= 1e-12);
        }
    }
}
