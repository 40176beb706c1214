//! Model constants, the Feller condition, payoffs and assembly of the three
//! operator variants of the pricing equation
//!
//! ```text
//! V_t + (v S²/2) V_SS + ρσ v S V_Sv + (σ² v/2) V_vv + (r − q) S V_S
//!     + (κ(θ − v) − λ v) V_v − r V = 0.
//! ```
//!
//! * [`OperatorForm::FullHeston`] is the equation above in `(S, v, t)`.
//! * [`OperatorForm::SpecialModel`] replaces the variance drift by the
//!   constant `σ²` and forces `ρ = 1`, `λ = 0`, `q = 0`.
//! * [`OperatorForm::LogSpot`] is the special model rewritten in `(x, v, t)`
//!   with `x = ln S`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fichera::DegenerateOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub q: f64,
    #[serde(default)]
    pub lambda: f64,
    pub v0: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
}

impl HestonParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa: f64,
        theta: f64,
        sigma: f64,
        rho: f64,
        r: f64,
        q: f64,
        v0: f64,
        maturity: f64,
    ) -> Result<Self> {
        let p = Self { kappa, theta, sigma, rho, r, q, lambda: 0.0, v0, maturity };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the special model: constant variance drift `σ²`, `ρ = 1`,
    /// no dividend. `κ` and `θ` are unused by that form and set to zero.
    pub fn special(sigma: f64, r: f64, v0: f64, maturity: f64) -> Result<Self> {
        Self::new(0.0, 0.0, sigma, 1.0, r, 0.0, v0, maturity)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa, self.theta, self.sigma, self.rho, self.r, self.q, self.lambda, self.v0,
            self.maturity,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::InvalidParams(format!("|rho| must be <= 1, got {}", self.rho)));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for (name, x) in [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("r", self.r),
            ("q", self.q),
            ("v0", self.v0),
        ] {
            if x < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {x}")));
            }
        }
        if self.maturity <= 0.0 {
            return Err(Error::InvalidParams(format!("T must be > 0, got {}", self.maturity)));
        }
        Ok(())
    }

    /// The product `κθ`, the constant part of the variance drift.
    pub fn omega(&self) -> f64 {
        self.kappa * self.theta
    }

    /// Parses the flat JSON object form; unknown keys are rejected.
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidParams(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    /// Resolves the parameter profile a given form actually uses.
    pub fn coefficients(&self, form: OperatorForm) -> Result<ModelCoefficients> {
        self.validate()?;
        match form {
            OperatorForm::FullHeston => Ok(ModelCoefficients {
                spot_drift: self.r - self.q,
                omega: self.omega(),
                mean_reversion: self.kappa + self.lambda,
                sigma: self.sigma,
                rho: self.rho,
                r: self.r,
            }),
            OperatorForm::SpecialModel | OperatorForm::LogSpot => {
                if self.rho != 1.0 || self.lambda != 0.0 || self.q != 0.0 {
                    return Err(Error::SpecialModelParamMismatch {
                        rho: self.rho,
                        lambda: self.lambda,
                        q: self.q,
                    });
                }
                Ok(ModelCoefficients {
                    spot_drift: self.r,
                    omega: self.sigma * self.sigma,
                    mean_reversion: 0.0,
                    sigma: self.sigma,
                    rho: 1.0,
                    r: self.r,
                })
            }
        }
    }
}

/// The constants an operator form actually depends on. The variance drift is
/// `omega − mean_reversion · v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    pub spot_drift: f64,
    pub omega: f64,
    pub mean_reversion: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorForm {
    FullHeston,
    SpecialModel,
    LogSpot,
}

impl OperatorForm {
    pub fn coordinate_labels(self) -> [&'static str; 3] {
        match self {
            OperatorForm::FullHeston | OperatorForm::SpecialModel => ["S", "v", "t"],
            OperatorForm::LogSpot => ["x", "v", "t"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `κθ ≥ σ²/2`.
pub fn feller_check(params: &HestonParams) -> FellerReport {
    feller_from(params.omega(), params.sigma)
}

/// Feller-type inequality for the variance drift a form actually uses: for the
/// special model the constant drift is `σ²`, so the check reads `σ² ≥ σ²/2`.
pub fn feller_check_form(params: &HestonParams, form: OperatorForm) -> Result<FellerReport> {
    let c = params.coefficients(form)?;
    Ok(feller_from(c.omega, c.sigma))
}

fn feller_from(omega: f64, sigma: f64) -> FellerReport {
    let rhs = sigma * sigma / 2.0;
    FellerReport { lhs: omega, rhs, satisfied: omega >= rhs }
}

/// Builds the coefficient closures `a_ij`, `∂_k a_ij`, `b_i`, `c` of the
/// chosen form. Coordinates are `(S, v, t)` or `(x, v, t)`; the time direction
/// carries the first-order coefficient `+1`.
pub fn assemble_operator(params: &HestonParams, form: OperatorForm) -> Result<DegenerateOperator> {
    let m = params.coefficients(form)?;
    let labels = form.coordinate_labels();
    let op = match form {
        OperatorForm::FullHeston | OperatorForm::SpecialModel => {
            let a = move |p: &[f64], i: usize, j: usize| -> f64 {
                let (s, v) = (p[0], p[1]);
                match (i, j) {
                    (0, 0) => 0.5 * v * s * s,
                    (0, 1) | (1, 0) => 0.5 * m.rho * m.sigma * v * s,
                    (1, 1) => 0.5 * m.sigma * m.sigma * v,
                    _ => 0.0,
                }
            };
            let da = move |p: &[f64], i: usize, j: usize, k: usize| -> f64 {
                let (s, v) = (p[0], p[1]);
                match ((i, j), k) {
                    ((0, 0), 0) => v * s,
                    ((0, 0), 1) => 0.5 * s * s,
                    ((0, 1) | (1, 0), 0) => 0.5 * m.rho * m.sigma * v,
                    ((0, 1) | (1, 0), 1) => 0.5 * m.rho * m.sigma * s,
                    ((1, 1), 1) => 0.5 * m.sigma * m.sigma,
                    _ => 0.0,
                }
            };
            let b = move |p: &[f64], i: usize| -> f64 {
                let (s, v) = (p[0], p[1]);
                match i {
                    0 => m.spot_drift * s,
                    1 => m.omega - m.mean_reversion * v,
                    2 => 1.0,
                    _ => 0.0,
                }
            };
            DegenerateOperator::new(3, labels, Some(form), Arc::new(a), Arc::new(da), Arc::new(b), Arc::new(move |_: &[f64]| -m.r))
        }
        OperatorForm::LogSpot => {
            let a = move |p: &[f64], i: usize, j: usize| -> f64 {
                let v = p[1];
                match (i, j) {
                    (0, 0) => 0.5 * v,
                    (0, 1) | (1, 0) => 0.5 * m.rho * m.sigma * v,
                    (1, 1) => 0.5 * m.sigma * m.sigma * v,
                    _ => 0.0,
                }
            };
            let da = move |_p: &[f64], i: usize, j: usize, k: usize| -> f64 {
                match ((i, j), k) {
                    ((0, 0), 1) => 0.5,
                    ((0, 1) | (1, 0), 1) => 0.5 * m.rho * m.sigma,
                    ((1, 1), 1) => 0.5 * m.sigma * m.sigma,
                    _ => 0.0,
                }
            };
            let b = move |p: &[f64], i: usize| -> f64 {
                let v = p[1];
                match i {
                    0 => m.spot_drift - 0.5 * v,
                    1 => m.omega - m.mean_reversion * v,
                    2 => 1.0,
                    _ => 0.0,
                }
            };
            DegenerateOperator::new(3, labels, Some(form), Arc::new(a), Arc::new(da), Arc::new(b), Arc::new(move |_: &[f64]| -m.r))
        }
    };
    Ok(op)
}

/// Terminal payoff `Φ(S, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payoff {
    Call(f64),
    Put(f64),
    Zero,
    Constant(f64),
    /// `(S, value)` pairs, strictly increasing in `S`.
    Custom(Vec<(f64, f64)>),
}

impl Payoff {
    pub fn call(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::Call(strike))
    }

    pub fn put(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::Put(strike))
    }

    pub fn custom(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidParams("empty payoff table".into()));
        }
        if table.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParams("payoff table must be strictly increasing in S".into()));
        }
        Ok(Payoff::Custom(table))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::Call(k) | Payoff::Put(k) => check_strike(*k),
            Payoff::Custom(t) => Payoff::custom(t.clone()).map(|_| ()),
            Payoff::Zero | Payoff::Constant(_) => Ok(()),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Payoff::Call(k) | Payoff::Put(k) => Some(*k),
            _ => None,
        }
    }
}

fn check_strike(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("strike must be > 0, got {k}")))
    }
}

/// Evaluates the payoff. Custom tables interpolate linearly and extrapolate
/// by the end values.
pub fn payoff_eval(payoff: &Payoff, spot: f64, _variance: f64) -> f64 {
    match payoff {
        Payoff::Call(k) => (spot - k).max(0.0),
        Payoff::Put(k) => (k - spot).max(0.0),
        Payoff::Zero => 0.0,
        Payoff::Constant(c) => *c,
        Payoff::Custom(t) => {
            let first = t[0];
            let last = t[t.len() - 1];
            if spot <= first.0 {
                return first.1;
            }
            if spot >= last.0 {
                return last.1;
            }
            let k = t.partition_point(|&(s, _)| s <= spot);
            let (s0, y0) = t[k - 1];
            let (s1, y1) = t[k];
            y0 + (y1 - y0) * (spot - s0) / (s1 - s0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full(kappa: f64, theta: f64, sigma: f64) -> HestonParams {
        HestonParams::new(kappa, theta, sigma, -0.5, 0.03, 0.01, 0.04, 1.0).unwrap()
    }

    #[test]
    fn feller_examples() {
        let rep = feller_check(&full(2.0, 0.09, 0.3));
        assert_eq!(rep.lhs, 0.18);
        assert_eq!(rep.rhs, 0.045);
        assert!(rep.satisfied);

        let rep = feller_check(&full(1.0, 0.02, 0.5));
        assert_eq!(rep.lhs, 0.02);
        assert_eq!(rep.rhs, 0.125);
        assert!(!rep.satisfied);

        let rep = feller_check(&full(1.0, 0.125, 0.5));
        assert!(rep.satisfied);
    }

    #[test]
    fn feller_monotone_in_omega() {
        let mut was = false;
        for k in 0..200 {
            let theta = 0.001 * k as f64;
            let s = feller_check(&full(1.0, theta, 0.4)).satisfied;
            assert!(!(was && !s));
            was = s;
        }
        assert!(was);
    }

    #[test]
    fn special_model_feller_analogue_always_holds() {
        for sigma in [0.1, 0.5, 1.0, 2.0] {
            let p = HestonParams::special(sigma, 0.0, 0.1, 1.0).unwrap();
            assert!(!feller_check(&p).satisfied);
            assert!(feller_check_form(&p, OperatorForm::SpecialModel).unwrap().satisfied);
        }
    }

    #[test]
    fn validation() {
        assert!(HestonParams::new(1.0, 0.04, 0.3, 1.2, 0.0, 0.0, 0.04, 1.0).is_err());
        assert!(HestonParams::new(1.0, 0.04, 0.0, 0.0, 0.0, 0.0, 0.04, 1.0).is_err());
        assert!(HestonParams::new(-1.0, 0.04, 0.3, 0.0, 0.0, 0.0, 0.04, 1.0).is_err());
        assert!(HestonParams::new(1.0, 0.04, 0.3, 0.0, 0.0, 0.0, 0.04, 0.0).is_err());
        assert!(HestonParams::new(1.0, 0.04, 0.3, -1.0, 0.0, 0.0, 0.0, 2.0).is_ok());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let p = full(1.5, 0.04, 0.3).with_lambda(0.1).unwrap();
        let s = p.to_json();
        assert!(s.contains("\"T\":1.0"));
        assert_eq!(HestonParams::from_json(&s).unwrap(), p);
        let bad = s.replace("\"T\"", "\"maturity\"");
        assert!(HestonParams::from_json(&bad).is_err());
        let no_lambda = r#"{"kappa":1,"theta":0.04,"sigma":0.3,"rho":0,"r":0,"q":0,"v0":0.04,"T":1}"#;
        assert_eq!(HestonParams::from_json(no_lambda).unwrap().lambda, 0.0);
        let neg = no_lambda.replace("\"sigma\":0.3", "\"sigma\":-0.3");
        assert!(HestonParams::from_json(&neg).is_err());
    }

    #[test]
    fn coefficient_examples() {
        let p = HestonParams::new(1.0, 0.04, 0.3, -0.6, 0.0, 0.0, 0.04, 1.0).unwrap();
        let op = assemble_operator(&p, OperatorForm::FullHeston).unwrap();
        let pt = [1.0, 0.04, 0.0];
        assert!((op.a(&pt, 0, 0) - 0.02).abs() < 1e-16);
        assert!((op.a(&pt, 0, 1) - 0.5 * -0.6 * 0.3 * 0.04).abs() < 1e-16);
        assert!((op.a(&pt, 1, 1) - 0.5 * 0.09 * 0.04).abs() < 1e-16);

        let sp = HestonParams::special(0.3, 0.0, 0.04, 1.0).unwrap();
        let log = assemble_operator(&sp, OperatorForm::LogSpot).unwrap();
        assert!((log.b(&[0.0, 0.04, 0.0], 0) + 0.02).abs() < 1e-16);

        for form in [OperatorForm::FullHeston, OperatorForm::SpecialModel, OperatorForm::LogSpot] {
            let params = if form == OperatorForm::FullHeston { p } else { sp };
            let op = assemble_operator(&params, form).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(op.a(&[1.3, 0.0, 0.2], i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn special_model_rejects_wrong_profile() {
        let p = HestonParams::new(1.0, 0.04, 0.3, 0.5, 0.0, 0.0, 0.04, 1.0).unwrap();
        assert!(matches!(
            assemble_operator(&p, OperatorForm::SpecialModel),
            Err(Error::SpecialModelParamMismatch { .. })
        ));
        let p = HestonParams::special(0.3, 0.0, 0.04, 1.0).unwrap().with_lambda(0.2).unwrap();
        assert!(assemble_operator(&p, OperatorForm::LogSpot).is_err());
    }

    #[test]
    fn second_order_part_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for form in [OperatorForm::FullHeston, OperatorForm::SpecialModel, OperatorForm::LogSpot] {
            for _ in 0..200 {
                let rho = if form == OperatorForm::FullHeston { rng.gen_range(-1.0..=1.0) } else { 1.0 };
                let sigma = rng.gen_range(0.05..3.0);
                let p = HestonParams {
                    kappa: 1.0,
                    theta: 0.04,
                    sigma,
                    rho,
                    r: 0.0,
                    q: 0.0,
                    lambda: 0.0,
                    v0: 0.04,
                    maturity: 1.0,
                };
                let op = assemble_operator(&p, form).unwrap();
                let pt = [rng.gen_range(-3.0..50.0f64).abs(), rng.gen_range(0.0..5.0), 0.3];
                let (a, b, d) = (op.a(&pt, 0, 0), op.a(&pt, 0, 1), op.a(&pt, 1, 1));
                assert_eq!(op.a(&pt, 1, 0), b);
                let tr = a + d;
                let det = a * d - b * b;
                let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
                let lo = tr / 2.0 - disc;
                assert!(lo >= -1e-14 * (1.0 + tr), "{lo}");
            }
        }
    }

    #[test]
    fn special_equals_full_with_forced_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let sigma = rng.gen_range(0.1..2.0);
            let r = rng.gen_range(0.0..0.1);
            let special = HestonParams::special(sigma, r, 0.04, 1.0).unwrap();
            // kappa -> 0 with kappa * theta = sigma^2
            let kappa = 1e-300;
            let full = HestonParams {
                kappa,
                theta: sigma * sigma / kappa,
                sigma,
                rho: 1.0,
                r,
                q: 0.0,
                lambda: 0.0,
                v0: 0.04,
                maturity: 1.0,
            };
            let a = assemble_operator(&special, OperatorForm::SpecialModel).unwrap();
            let b = assemble_operator(&full, OperatorForm::FullHeston).unwrap();
            let pt = [rng.gen_range(0.0..200.0), rng.gen_range(0.0..3.0), 0.5];
            for i in 0..3 {
                assert!((a.b(&pt, i) - b.b(&pt, i)).abs() <= 1e-14 * (1.0 + a.b(&pt, i).abs()));
                for j in 0..3 {
                    assert!((a.a(&pt, i, j) - b.a(&pt, i, j)).abs() <= 1e-14);
                    for k in 0..3 {
                        assert!((a.da(&pt, i, j, k) - b.da(&pt, i, j, k)).abs() <= 1e-14);
                    }
                }
            }
            assert_eq!(a.c(&pt), b.c(&pt));
        }
    }

    #[test]
    fn payoffs() {
        assert_eq!(payoff_eval(&Payoff::call(100.0).unwrap(), 120.0, 0.1), 20.0);
        assert_eq!(payoff_eval(&Payoff::Call(100.0), 80.0, 0.1), 0.0);
        assert_eq!(payoff_eval(&Payoff::Put(100.0), 80.0, 0.1), 20.0);
        assert_eq!(payoff_eval(&Payoff::Zero, 3.0, 7.0), 0.0);
        assert_eq!(payoff_eval(&Payoff::Constant(2.5), 3.0, 7.0), 2.5);
        let c = Payoff::custom(vec![(50.0, 0.0), (100.0, 0.0), (150.0, 50.0)]).unwrap();
        assert_eq!(payoff_eval(&c, 125.0, 0.0), 25.0);
        assert_eq!(payoff_eval(&c, 10.0, 0.0), 0.0);
        assert_eq!(payoff_eval(&c, 400.0, 0.0), 50.0);
        assert!(Payoff::custom(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(Payoff::call(-5.0).is_err());
    }
}
