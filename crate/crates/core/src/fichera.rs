//! Fichera boundary classification for second-order operators with a
//! nonnegative characteristic form.
//!
//! For `L u = Σ a_ij u_ij + Σ b_i u_i + c u` and an inward unit normal `n`,
//! the Fichera function is
//!
//! ```text
//! H = Σ_i [ b_i − Σ_j ∂_j a_ij ] n_i .
//! ```
//!
//! Boundary points where `⟨A n, n⟩ = 0` split by the sign of `H` into
//! Σ0 (`H = 0`), Σ1 (`H > 0`) and Σ2 (`H < 0`); non-degenerate points form
//! Σ3. Data has to be prescribed on Σ2 ∪ Σ3.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston_model::OperatorForm;

pub type DiffusionFn = Arc<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;
pub type DiffusionDerivFn = Arc<dyn Fn(&[f64], usize, usize, usize) -> f64 + Send + Sync>;
pub type DriftFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub const DEFAULT_TOL_DEG: f64 = 1e-12;
pub const DEFAULT_TOL_H: f64 = 1e-12;

/// Coefficients of a linear second-order operator, with the spatial
/// derivatives of the diffusion matrix supplied analytically.
#[derive(Clone)]
pub struct DegenerateOperator {
    dim: usize,
    labels: Vec<String>,
    form: Option<OperatorForm>,
    a: DiffusionFn,
    da: DiffusionDerivFn,
    b: DriftFn,
    c: PotentialFn,
}

impl fmt::Debug for DegenerateOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DegenerateOperator")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .field("form", &self.form)
            .finish_non_exhaustive()
    }
}

impl DegenerateOperator {
    pub fn new<S: AsRef<str>>(
        dim: usize,
        labels: impl IntoIterator<Item = S>,
        form: Option<OperatorForm>,
        a: DiffusionFn,
        da: DiffusionDerivFn,
        b: DriftFn,
        c: PotentialFn,
    ) -> Self {
        let labels = labels.into_iter().map(|s| s.as_ref().to_string()).collect();
        Self { dim, labels, form, a, da, b, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn form(&self) -> Option<OperatorForm> {
        self.form
    }

    pub fn a(&self, p: &[f64], i: usize, j: usize) -> f64 {
        (self.a)(p, i, j)
    }

    /// `∂ a_ij / ∂ x_k`.
    pub fn da(&self, p: &[f64], i: usize, j: usize, k: usize) -> f64 {
        (self.da)(p, i, j, k)
    }

    pub fn b(&self, p: &[f64], i: usize) -> f64 {
        (self.b)(p, i)
    }

    pub fn c(&self, p: &[f64]) -> f64 {
        (self.c)(p)
    }

    /// Same diffusion and potential, first-order coefficients replaced.
    pub fn with_drift(&self, b: DriftFn) -> Self {
        Self { b, ..self.clone() }
    }

    /// The part of `H` contributed by the drift alone, `Σ b_i n_i`.
    pub fn drift_part(&self, p: &[f64], n: &[f64]) -> f64 {
        (0..self.dim).map(|i| self.b(p, i) * n[i]).sum()
    }

    /// The part of `H` contributed by the diffusion, `−Σ_i Σ_j ∂_j a_ij n_i`.
    pub fn diffusion_part(&self, p: &[f64], n: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let div: f64 = (0..self.dim).map(|j| self.da(p, i, j, j)).sum();
            s -= div * n[i];
        }
        s
    }
}

/// `⟨A ξ, ξ⟩` for a unit direction `ξ`.
pub fn quadratic_form(op: &DegenerateOperator, point: &[f64], xi: &[f64]) -> Result<f64> {
    check_unit(xi, op.dim)?;
    Ok(raw_quadratic_form(op, point, xi))
}

fn raw_quadratic_form(op: &DegenerateOperator, point: &[f64], xi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..op.dim {
        for j in 0..op.dim {
            s += op.a(point, i, j) * xi[i] * xi[j];
        }
    }
    s
}

fn check_unit(xi: &[f64], dim: usize) -> Result<()> {
    if xi.len() != dim {
        return Err(Error::NonUnitDirection(f64::NAN));
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 || !norm.is_finite() {
        return Err(Error::NonUnitDirection(norm));
    }
    Ok(())
}

/// Fichera function at `point` for the given inward normal.
pub fn fichera_value(op: &DegenerateOperator, point: &[f64], inward_normal: &[f64]) -> f64 {
    op.drift_part(point, inward_normal) + op.diffusion_part(point, inward_normal)
}

/// A boundary face described by its inward unit normal and sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub description: String,
    pub inward_normal: Vec<f64>,
    pub sample_points: Vec<Vec<f64>>,
}

impl BoundaryFace {
    pub fn new(description: impl Into<String>, inward_normal: Vec<f64>, sample_points: Vec<Vec<f64>>) -> Result<Self> {
        check_unit(&inward_normal, inward_normal.len())?;
        Ok(Self { description: description.into(), inward_normal, sample_points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigmaClass {
    #[serde(rename = "Sigma0")]
    Sigma0,
    #[serde(rename = "Sigma1")]
    Sigma1,
    #[serde(rename = "Sigma2")]
    Sigma2,
    #[serde(rename = "Sigma3")]
    Sigma3,
}

impl SigmaClass {
    pub fn requires_condition(self) -> bool {
        matches!(self, SigmaClass::Sigma2 | SigmaClass::Sigma3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClass {
    pub coords: Vec<f64>,
    pub degenerate: bool,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "class")]
    pub sigma_class: SigmaClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FicheraReport {
    pub face: String,
    pub points: Vec<PointClass>,
    pub bc_required: bool,
}

/// Classifies every sample point of `face` into Σ0–Σ3.
pub fn classify_boundary(op: &DegenerateOperator, face: &BoundaryFace, tol_deg: f64, tol_h: f64) -> Result<FicheraReport> {
    if !(tol_deg > 0.0 && tol_h > 0.0) {
        return Err(Error::InvalidParams("tolerances must be positive".into()));
    }
    if face.sample_points.is_empty() {
        return Err(Error::EmptyFace);
    }
    check_unit(&face.inward_normal, op.dim)?;
    let n = &face.inward_normal;
    let mut points = Vec::with_capacity(face.sample_points.len());
    let mut c_vanishes = true;
    for p in &face.sample_points {
        let qf = raw_quadratic_form(op, p, n);
        let degenerate = qf <= tol_deg;
        let h = fichera_value(op, p, n);
        let sigma_class = if !degenerate {
            SigmaClass::Sigma3
        } else if h > tol_h {
            SigmaClass::Sigma1
        } else if h < -tol_h {
            SigmaClass::Sigma2
        } else {
            SigmaClass::Sigma0
        };
        c_vanishes &= op.c(p) == 0.0;
        points.push(PointClass { coords: p.clone(), degenerate, h, sigma_class });
    }
    if c_vanishes {
        log::info!("face '{}': potential c vanishes at every sample point", face.description);
    }
    let bc_required = points.iter().any(|p| p.sigma_class.requires_condition());
    Ok(FicheraReport { face: face.description.clone(), points, bc_required })
}

/// The finite faces of the truncated Heston domain
/// `[0, s_max] × [0, v_max] × [0, T]` (or `[x_min, x_max]` in log-spot form),
/// each sampled at `n` points along the free spatial coordinate.
pub fn heston_faces(form: OperatorForm, spot_range: (f64, f64), v_max: f64, maturity: f64, n: usize) -> Vec<BoundaryFace> {
    let n = n.max(2);
    let lin = |a: f64, b: f64| -> Vec<f64> { (0..n).map(|k| a + (b - a) * (k as f64 + 0.5) / n as f64).collect() };
    let (lo, hi) = spot_range;
    let t_mid = 0.5 * maturity;
    let mut faces = Vec::new();
    let vs = lin(0.0, v_max);
    let ss = lin(lo, hi);
    faces.push(BoundaryFace {
        description: "v=0".into(),
        inward_normal: vec![0.0, 1.0, 0.0],
        sample_points: ss.iter().map(|&s| vec![s, 0.0, t_mid]).collect(),
    });
    if form != OperatorForm::LogSpot {
        faces.push(BoundaryFace {
            description: "S=0".into(),
            inward_normal: vec![1.0, 0.0, 0.0],
            sample_points: vs.iter().map(|&v| vec![0.0, v, t_mid]).collect(),
        });
    }
    let hi_label = if form == OperatorForm::LogSpot { "x=x_max" } else { "S=S_max" };
    faces.push(BoundaryFace {
        description: hi_label.into(),
        inward_normal: vec![-1.0, 0.0, 0.0],
        sample_points: vs.iter().map(|&v| vec![hi, v, t_mid]).collect(),
    });
    faces.push(BoundaryFace {
        description: "t=T".into(),
        inward_normal: vec![0.0, 0.0, -1.0],
        sample_points: ss.iter().map(|&s| vec![s, 0.5 * v_max, maturity]).collect(),
    });
    faces.push(BoundaryFace {
        description: "t=0".into(),
        inward_normal: vec![0.0, 0.0, 1.0],
        sample_points: ss.iter().map(|&s| vec![s, 0.5 * v_max, 0.0]).collect(),
    });
    faces
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub satisfied: bool,
}

/// Estimates the constants in `⟨Aξ,ξ⟩ ≤ C1 v` and `|b| ≤ C2 v` for the
/// log-spot operator, where `|b|` is the Euclidean norm of the two spatial
/// first-order coefficients. `ξ` ranges over 32 seeded random unit vectors of
/// the `(x, v)` plane per sample.
pub fn coefficient_growth_bounds(op: &DegenerateOperator, region_samples: &[Vec<f64>], frame: OperatorForm) -> Result<BoundsReport> {
    if frame != OperatorForm::LogSpot || op.form() != Some(OperatorForm::LogSpot) {
        return Err(Error::WrongFrame(format!("growth bounds need the LogSpot operator, got {:?}", op.form())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for p in region_samples {
        let v = p[1];
        if !(v > 0.0) {
            return Err(Error::NonPositiveVariance(v));
        }
        for _ in 0..32 {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let xi = [phi.cos(), phi.sin(), 0.0];
            c1 = c1.max(raw_quadratic_form(op, p, &xi) / v);
        }
        let b0 = op.b(p, 0);
        let b1 = op.b(p, 1);
        c2 = c2.max(b0.hypot(b1) / v);
    }
    Ok(BoundsReport { c1, c2, satisfied: c1.is_finite() && c2.is_finite() })
}
