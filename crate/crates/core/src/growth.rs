//! Growth-class membership checks on sampled functions.
//!
//! Membership in a growth class cannot be decided from finitely many samples,
//! so every check here is a heuristic and returns its evidence (fitted
//! slopes, ratio tails) alongside the verdict.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston_model::{feller_check_form, FellerReport, HestonParams, OperatorForm};
use crate::quadrature::GaussLegendre;

/// Slack on fitted exponents.
pub const SLOPE_TOL: f64 = 0.02;
pub const MIN_SAMPLES: usize = 8;
/// Required ratio between the largest and smallest coordinate.
pub const MIN_SPAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

fn check_span(coords: impl Iterator<Item = f64>, n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSpan(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let (lo, hi) = coords.fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c), hi.max(c)));
    if hi / lo < MIN_SPAN {
        return Err(Error::InsufficientSpan(format!("coordinates span [{lo:e}, {hi:e}], less than two decades")));
    }
    Ok(())
}

/// Least-squares line through `(ln coord, ln |value|)`.
pub fn fit_loglog_slope(samples: &[(f64, f64)]) -> Result<SlopeFit> {
    for &(c, v) in samples {
        if !(c > 0.0 && c.is_finite()) || !(v.abs() > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveSample(format!("({c}, {v})")));
        }
    }
    check_span(samples.iter().map(|s| s.0), samples.len())?;
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r_squared, n_points: samples.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublinearVerdict {
    pub sublinear: bool,
    pub slope: f64,
    pub tolerance: f64,
    pub fit: SlopeFit,
}

/// Sublinear growth as the coordinate grows: fitted slope `≤ 1 − δ`.
pub fn check_sublinear(samples: &[(f64, f64)]) -> Result<SublinearVerdict> {
    let fit = fit_loglog_slope(samples)?;
    Ok(SublinearVerdict { sublinear: fit.slope <= 1.0 - SLOPE_TOL, slope: fit.slope, tolerance: SLOPE_TOL, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityVerdict {
    /// Both tests below pass.
    pub integrable_weaker_than_1_over_v: bool,
    pub slope: f64,
    /// Exponent of `f` from the two extreme samples.
    pub secant_slope: f64,
    /// `v·|f(v)|` at the smallest coordinate.
    pub v_times_f_at_min: f64,
    pub slope_test: bool,
    pub secant_test: bool,
    pub tolerance: f64,
    pub fit: SlopeFit,
}

/// Singularity weaker than `1/v` as the coordinate tends to zero: fitted
/// slope `> −1 + δ`, and `v·|f|` decaying between the extreme samples at an
/// exponent above `δ`.
pub fn check_singularity(samples: &[(f64, f64)]) -> Result<SingularityVerdict> {
    let fit = fit_loglog_slope(samples)?;
    let lo = samples.iter().copied().fold((f64::INFINITY, 0.0), |a, s| if s.0 < a.0 { s } else { a });
    let hi = samples.iter().copied().fold((0.0, 0.0), |a, s| if s.0 > a.0 { s } else { a });
    let secant_slope = (lo.1.abs().ln() - hi.1.abs().ln()) / (lo.0.ln() - hi.0.ln());
    let slope_test = fit.slope > -1.0 + SLOPE_TOL;
    let secant_test = secant_slope > -1.0 + SLOPE_TOL;
    Ok(SingularityVerdict {
        integrable_weaker_than_1_over_v: slope_test && secant_test,
        slope: fit.slope,
        secant_slope,
        v_times_f_at_min: lo.0 * lo.1.abs(),
        slope_test,
        secant_test,
        tolerance: SLOPE_TOL,
        fit,
    })
}

/// Named Täcklind functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TacklindH {
    /// `max(1, s)`.
    #[default]
    Default,
    One,
    Linear,
    Square,
    /// `s·ln(s + e)`.
    SLog,
}

impl TacklindH {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            TacklindH::Default => s.max(1.0),
            TacklindH::One => 1.0,
            TacklindH::Linear => s,
            TacklindH::Square => s * s,
            TacklindH::SLog => s * (s + std::f64::consts::E).ln(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "default" => TacklindH::Default,
            "one" => TacklindH::One,
            "linear" | "s" => TacklindH::Linear,
            "square" | "s2" => TacklindH::Square,
            "slog" => TacklindH::SLog,
            _ => return None,
        })
    }
}

impl fmt::Display for TacklindH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TacklindH::Default => "default",
            TacklindH::One => "one",
            TacklindH::Linear => "linear",
            TacklindH::Square => "square",
            TacklindH::SLog => "slog",
        })
    }
}

/// The auxiliary `g` (1 near the origin, `s` far out, cubic Hermite blend on
/// `[1 − ε, 1 + ε]`) and its reciprocal integral `G(s) = ∫₀ˢ dt / g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryG {
    pub epsilon: f64,
}

impl Default for AuxiliaryG {
    fn default() -> Self {
        Self { epsilon: 0.1 }
    }
}

impl AuxiliaryG {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    fn blend(&self, s: f64) -> (f64, f64) {
        let (a, b) = (1.0 - self.epsilon, 1.0 + self.epsilon);
        let h = b - a;
        let t = (s - a) / h;
        let (t2, t3) = (t * t, t * t * t);
        // endpoint values 1 and b, slopes 0 and 1
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) + (-2.0 * t3 + 3.0 * t2) * b + (t3 - t2) * h;
        let der = ((6.0 * t2 - 6.0 * t) * (1.0 - b) + (3.0 * t2 - 2.0 * t) * h) / h;
        (val, der)
    }

    pub fn g(&self, s: f64) -> f64 {
        if s <= 1.0 - self.epsilon {
            1.0
        } else if s >= 1.0 + self.epsilon {
            s
        } else {
            self.blend(s).0
        }
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        if s <= 1.0 - self.epsilon {
            0.0
        } else if s >= 1.0 + self.epsilon {
            1.0
        } else {
            self.blend(s).1
        }
    }

    #[allow(non_snake_case)]
    pub fn G(&self, s: f64) -> f64 {
        let (a, b) = (1.0 - self.epsilon, 1.0 + self.epsilon);
        if s <= a {
            return s;
        }
        let gl = GaussLegendre::new(32);
        let mid = |hi: f64| gl.integrate(a, hi, |t| 1.0 / self.g(t));
        if s <= b {
            return a + mid(s);
        }
        a + mid(b) + (s / b).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GrowthClassSpec {
    pub h: TacklindH,
    pub aux: AuxiliaryG,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacklindVerdict {
    pub in_class: bool,
    /// `max_k ratio_k`; may be `inf` when the log ratio overflows.
    pub c_estimate: f64,
    pub log_c_estimate: f64,
    /// `ln ratio_k = ln|f_k| − ln(R_k)·h(ln R_k)`, in input order.
    pub log_ratios: Vec<f64>,
    pub first_decade_median: f64,
    pub last_decade_max: f64,
    pub heuristic: String,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Bounded-ratio test against `exp[ln R · h(ln R)]` on samples `(R, |f|)`.
pub fn check_tacklind(samples: &[(f64, f64)], spec: &GrowthClassSpec) -> Result<TacklindVerdict> {
    for &(r, v) in samples {
        if !(r > 0.0 && r.is_finite()) || !v.is_finite() {
            return Err(Error::NonPositiveSample(format!("({r}, {v})")));
        }
    }
    check_span(samples.iter().map(|s| s.0), samples.len())?;
    let log_ratios: Vec<f64> = samples
        .iter()
        .map(|&(r, v)| {
            let lr = r.ln();
            v.abs().ln() - lr * spec.h.eval(lr)
        })
        .collect();
    let r_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let r_max = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let first: Vec<f64> = samples.iter().zip(&log_ratios).filter(|(s, _)| s.0 <= 10.0 * r_min).map(|(_, &l)| l).collect();
    let last_decade_max = samples
        .iter()
        .zip(&log_ratios)
        .filter(|(s, _)| s.0 >= r_max / 10.0)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let first_decade_median = median(first);
    let log_c = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TacklindVerdict {
        in_class: last_decade_max <= first_decade_median + 2f64.ln(),
        c_estimate: log_c.exp(),
        log_c_estimate: log_c,
        log_ratios,
        first_decade_median,
        last_decade_max,
        heuristic: "in class when the largest ratio over the last decade of R is at most twice the median ratio over the first decade".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleVerdict {
    pub divergent: bool,
    pub ladder: Vec<f64>,
    /// `∫₁ᴺ ds / h(s)` for each ladder entry.
    pub partial_integrals: Vec<f64>,
    pub increment_ratios: Vec<f64>,
    pub heuristic: String,
}

/// Partial integrals of `1/h` over `[1, N]` along the ladder; divergent when
/// successive increments do not shrink geometrically (each ratio ≥ 0.5).
pub fn tacklind_admissible(h: impl Fn(f64) -> f64, ladder: &[f64]) -> Result<AdmissibleVerdict> {
    if ladder.len() < 3 || ladder.windows(2).any(|w| w[1] <= w[0]) || ladder[0] <= 1.0 {
        return Err(Error::InvalidParams("ladder needs at least three increasing entries above 1".into()));
    }
    let gl = GaussLegendre::new(32);
    let mut partial = Vec::with_capacity(ladder.len());
    let mut acc = 0.0;
    let mut w_lo = 0.0;
    for &n in ladder {
        let w_hi = n.ln();
        let panels = ((w_hi - w_lo).ceil() as usize).max(1);
        let width = (w_hi - w_lo) / panels as f64;
        for k in 0..panels {
            let a = w_lo + k as f64 * width;
            for (w, wt) in gl.mapped(a, a + width) {
                let s = w.exp();
                let hv = h(s);
                if !(hv > 0.0) {
                    return Err(Error::NonPositiveH(hv));
                }
                acc += wt * s / hv;
            }
        }
        partial.push(acc);
        w_lo = w_hi;
    }
    let incs: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_ratios: Vec<f64> = incs.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(AdmissibleVerdict {
        divergent: increment_ratios.iter().all(|&r| r >= 0.5),
        ladder: ladder.to_vec(),
        partial_integrals: partial,
        increment_ratios,
        heuristic: "divergent when every ratio of successive increments between ladder entries is at least 0.5".into(),
    })
}

/// Asymptotic regime probed by the main verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SpotToInfinity,
    VarianceToInfinity,
    SpotToZero,
    VarianceToZero,
}

/// Candidate samples `(x = ln S, v, value)` along the four regimes at a
/// fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSamples {
    pub time: f64,
    pub spot_large: Vec<(f64, f64, f64)>,
    pub var_large: Vec<(f64, f64, f64)>,
    pub spot_small: Vec<(f64, f64, f64)>,
    pub var_small: Vec<(f64, f64, f64)>,
}

impl CandidateSamples {
    /// Samples `f(x, v, t)` on log-spaced rays: `x ∈ ±[10, 1e4]` at `v = 1`,
    /// `v ∈ [10, 1e4]` and `v ∈ [1e−6, 1e−3]` at `x = 0`, 25 points each.
    /// Three decades outward so the radial span stays above two.
    pub fn from_fn(f: impl Fn(f64, f64, f64) -> f64, time: f64) -> Self {
        let ray = |lo: f64, hi: f64| -> Vec<f64> {
            (0..25).map(|k| lo * (hi / lo).powf(k as f64 / 24.0)).collect()
        };
        let sample = |pts: Vec<(f64, f64)>| pts.into_iter().map(|(x, v)| (x, v, f(x, v, time))).collect();
        Self {
            time,
            spot_large: sample(ray(10.0, 1e4).into_iter().map(|x| (x, 1.0)).collect()),
            var_large: sample(ray(10.0, 1e4).into_iter().map(|v| (0.0, v)).collect()),
            spot_small: sample(ray(10.0, 1e4).into_iter().map(|x| (-x, 1.0)).collect()),
            var_small: sample(ray(1e-6, 1e-3).into_iter().map(|v| (0.0, v)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub pass: bool,
    /// All samples were exactly zero.
    pub identically_zero: bool,
    pub tacklind: Option<TacklindVerdict>,
    pub singularity: Option<SingularityVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTheoremReport {
    pub feller: FellerReport,
    pub verdicts: Vec<RegimeVerdict>,
    pub all_pass: bool,
    pub note: String,
}

/// Applies the class checks of the uniqueness statement to a candidate
/// (typically the difference of two solutions with equal data).
pub fn uniqueness_verdict(
    candidate: &CandidateSamples,
    params: &HestonParams,
    form: OperatorForm,
    spec: &GrowthClassSpec,
) -> Result<MainTheoremReport> {
    let feller = feller_check_form(params, form)?;
    if !feller.satisfied {
        return Err(Error::FellerViolated { lhs: feller.lhs, rhs: feller.rhs });
    }
    let mut verdicts = Vec::new();
    let class = |regime: Regime, pts: &[(f64, f64, f64)]| -> Result<RegimeVerdict> {
        if pts.iter().all(|p| p.2 == 0.0) {
            return Ok(RegimeVerdict { regime, pass: true, identically_zero: true, tacklind: None, singularity: None });
        }
        // zeros stay in (log ratio −∞): far-field underflow must not shrink the span
        let radial: Vec<(f64, f64)> = pts.iter().map(|&(x, v, f)| ((x * x + v * v).sqrt(), f)).collect();
        let t = check_tacklind(&radial, spec)?;
        Ok(RegimeVerdict { regime, pass: t.in_class, identically_zero: false, tacklind: Some(t), singularity: None })
    };
    verdicts.push(class(Regime::SpotToInfinity, &candidate.spot_large)?);
    verdicts.push(class(Regime::VarianceToInfinity, &candidate.var_large)?);
    verdicts.push(class(Regime::SpotToZero, &candidate.spot_small)?);
    let nz: Vec<(f64, f64)> = candidate.var_small.iter().filter(|p| p.2 != 0.0).map(|&(_, v, f)| (v, f)).collect();
    verdicts.push(if nz.is_empty() {
        RegimeVerdict { regime: Regime::VarianceToZero, pass: true, identically_zero: true, tacklind: None, singularity: None }
    } else {
        let s = check_singularity(&nz)?;
        RegimeVerdict { regime: Regime::VarianceToZero, pass: s.integrable_weaker_than_1_over_v, identically_zero: false, tacklind: None, singularity: Some(s) }
    });
    Ok(MainTheoremReport {
        feller,
        all_pass: verdicts.iter().all(|v| v.pass),
        verdicts,
        note: "class checks are applied to the candidate as given; for a uniqueness statement pass the difference of two solutions with equal data".into(),
    })
}
