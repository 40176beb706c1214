//! Backward θ-scheme solver for the one-dimensional degenerate equations,
//! with finite-difference residuals and refinement studies.
//!
//! Every equation is marched in the time-to-go variable `τ`, in the common
//! form `u_τ = A(z) u_zz + B(z) u_z − C(z) u`. For the variance equation
//! `τ = T − t` and the output is tagged with calendar time `t`; the other two
//! are already posed forward in `τ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, d1_weights, d2_weights, EndKind, Frame, Grid1D, GridFunction, GridSpec};
use crate::tridiag;
use crate::witness::{eval_witness, WitnessKind, WitnessParams};

/// Which of the two readings of the Feller equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FellerForm {
    /// `u_τ = a x u_xx + (b x + c) u_x`; the variance witness satisfies this
    /// one with `a = 2, b = 0, c = 4`.
    #[default]
    Generator,
    /// `u_τ = (a x u)_xx − ((b x + c) u)_x`.
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "eq", rename_all = "snake_case")]
pub enum Equation1D {
    /// `Π_t + (σ²v/2) Π_vv + σ² Π_v − rΠ = 0` on `0 ≤ t ≤ T`.
    PiAdd {
        sigma: f64,
        r: f64,
        #[serde(rename = "T")]
        maturity: f64,
    },
    Feller { a: f64, b: f64, c: f64, form: FellerForm, horizon: f64 },
    /// `u_τ = a y^{2α} u_yy`.
    Cev { a: f64, alpha: f64, horizon: f64 },
}

impl Equation1D {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match *self {
            Equation1D::PiAdd { sigma, r, maturity } => {
                pos("sigma", sigma)?;
                pos("T", maturity)?;
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::InvalidParams(format!("r must be >= 0, got {r}")));
                }
            }
            Equation1D::Feller { a, b, c, horizon, .. } => {
                pos("a", a)?;
                pos("horizon", horizon)?;
                if !b.is_finite() || !c.is_finite() {
                    return Err(Error::InvalidParams("b and c must be finite".into()));
                }
            }
            Equation1D::Cev { a, alpha, horizon } => {
                pos("a", a)?;
                pos("alpha", alpha)?;
                pos("horizon", horizon)?;
            }
        }
        Ok(())
    }

    /// Length of the time interval marched over.
    pub fn horizon(&self) -> f64 {
        match *self {
            Equation1D::PiAdd { maturity, .. } => maturity,
            Equation1D::Feller { horizon, .. } | Equation1D::Cev { horizon, .. } => horizon,
        }
    }

    /// `(A, B, C)` at `z`.
    pub fn coefficients(&self, z: f64) -> (f64, f64, f64) {
        match *self {
            Equation1D::PiAdd { sigma, r, .. } => (0.5 * sigma * sigma * z, sigma * sigma, r),
            Equation1D::Feller { a, b, c, form: FellerForm::Generator, .. } => (a * z, b * z + c, 0.0),
            Equation1D::Feller { a, b, c, form: FellerForm::Divergence, .. } => (a * z, 2.0 * a - c - b * z, b),
            Equation1D::Cev { a, alpha, .. } => (a * z.abs().powf(2.0 * alpha), 0.0, 0.0),
        }
    }

    /// Native time label of time-to-go `tau`.
    pub fn native_time(&self, tau: f64) -> f64 {
        match *self {
            Equation1D::PiAdd { maturity, .. } => maturity - tau,
            _ => tau,
        }
    }

    pub fn tau_of(&self, native: f64) -> f64 {
        // the map is an involution for PiAdd and the identity otherwise
        self.native_time(native)
    }

    pub fn frame(&self) -> Frame {
        match *self {
            Equation1D::PiAdd { .. } => Frame::VarTime,
            Equation1D::Feller { .. } => Frame::FellerX,
            Equation1D::Cev { alpha, a, .. } => Frame::Cev { alpha, a },
        }
    }
}

/// Boundary data as a function of native time.
pub type BoundaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FarFieldBc {
    /// `u_zz = 0`: linear extrapolation from the two inner nodes.
    DirichletZeroSecond,
    DirichletValue(BoundaryFn),
    NeumannZero,
}

#[derive(Clone)]
pub enum DegenerateBc {
    /// No condition imposed: the first-order equation left at the degenerate
    /// end is discretised with a one-sided difference.
    PdeOneSided,
    DirichletValue(BoundaryFn),
}

impl fmt::Debug for FarFieldBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FarFieldBc::DirichletZeroSecond => "DirichletZeroSecond",
            FarFieldBc::DirichletValue(_) => "DirichletValue(fn)",
            FarFieldBc::NeumannZero => "NeumannZero",
        })
    }
}

impl fmt::Debug for DegenerateBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegenerateBc::PdeOneSided => "PdeOneSided",
            DegenerateBc::DirichletValue(_) => "DirichletValue(fn)",
        })
    }
}

impl FarFieldBc {
    pub fn zero() -> Self {
        FarFieldBc::DirichletValue(Arc::new(|_| 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig1D {
    pub theta: f64,
    /// Leading steps replaced by two fully implicit half steps each.
    pub rannacher_steps: usize,
    pub n_time: usize,
    pub farfield_bc: FarFieldBc,
    pub degenerate_bc: DegenerateBc,
}

impl Default for SolverConfig1D {
    fn default() -> Self {
        Self {
            theta: 0.5,
            rannacher_steps: 2,
            n_time: 100,
            farfield_bc: FarFieldBc::DirichletZeroSecond,
            degenerate_bc: DegenerateBc::PdeOneSided,
        }
    }
}

impl SolverConfig1D {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if self.n_time == 0 {
            return Err(Error::InvalidConfig("n_time must be >= 1".into()));
        }
        Ok(())
    }
}

/// Geometric grid with the default clustering: first cell a tenth of the
/// uniform cell.
pub const DEFAULT_STRETCH: f64 = 10.0;

#[derive(Clone)]
enum Row {
    Pde,
    Fixed(BoundaryFn),
    /// `u_b = (1 + ρ) u_{b±1} − ρ u_{b±2}`.
    Extrap(f64),
}

/// Spatial operator rows `(lower, diag, upper)` with upwinding wherever the
/// central stencil would produce a negative off-diagonal.
fn assemble(eq: &Equation1D, z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = z.len();
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 1..n - 1 {
        let (a, b, c) = eq.coefficients(z[i]);
        let (hm, hp) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        let w1 = d1_weights(hm, hp);
        let w2 = d2_weights(hm, hp);
        let (mut l, mut d, mut u) = (a * w2[0] + b * w1[0], a * w2[1] + b * w1[1], a * w2[2] + b * w1[2]);
        if l < 0.0 || u < 0.0 {
            if b > 0.0 {
                l = a * w2[0];
                d = a * w2[1] - b / hp;
                u = a * w2[2] + b / hp;
            } else {
                l = a * w2[0] - b / hm;
                d = a * w2[1] + b / hm;
                u = a * w2[2];
            }
        }
        lo[i] = l;
        di[i] = d - c;
        up[i] = u;
    }
    // degenerate left end: first-order equation, forward difference
    let (_, b, c) = eq.coefficients(z[0]);
    let h = z[1] - z[0];
    di[0] = -b / h - c;
    up[0] = b / h;
    (lo, di, up)
}

fn boundary_rows(eq: &Equation1D, grid: &Grid1D, cfg: &SolverConfig1D) -> Result<(Row, Row)> {
    let z = grid.nodes();
    let n = z.len();
    let far = |bc: &FarFieldBc, rho: f64| match bc {
        FarFieldBc::DirichletZeroSecond => Row::Extrap(rho),
        FarFieldBc::NeumannZero => Row::Extrap(0.0),
        FarFieldBc::DirichletValue(g) => Row::Fixed(g.clone()),
    };
    let left = match grid.left {
        EndKind::Degenerate => {
            let (a, _, _) = eq.coefficients(z[0]);
            if a != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "left end z = {} is marked degenerate but the diffusion there is {a}",
                    z[0]
                )));
            }
            match &cfg.degenerate_bc {
                DegenerateBc::PdeOneSided => Row::Pde,
                DegenerateBc::DirichletValue(g) => Row::Fixed(g.clone()),
            }
        }
        EndKind::FarField => far(&cfg.farfield_bc, grid.spacing(0) / grid.spacing(1)),
    };
    let right = far(&cfg.farfield_bc, grid.spacing(n - 2) / grid.spacing(n - 3));
    Ok((left, right))
}

struct Stepper<'a> {
    eq: &'a Equation1D,
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
    left: Row,
    right: Row,
    scratch: Vec<f64>,
}

impl Stepper<'_> {
    /// Advances `u` from `tau` to `tau + dt` with weight `theta`.
    fn step(&mut self, u: &mut [f64], tau: f64, dt: f64, theta: f64) {
        let n = u.len();
        let mut rhs = vec![0.0; n];
        let mut ml = vec![0.0; n];
        let mut md = vec![1.0; n];
        let mut mu = vec![0.0; n];
        let pde_range = |i: usize| -> bool {
            (i > 0 && i < n - 1) || (i == 0 && matches!(self.left, Row::Pde))
        };
        for i in 0..n {
            if !pde_range(i) {
                continue;
            }
            let mut lu = self.di[i] * u[i];
            if i > 0 {
                lu += self.lo[i] * u[i - 1];
            }
            if i < n - 1 {
                lu += self.up[i] * u[i + 1];
            }
            rhs[i] = u[i] + (1.0 - theta) * dt * lu;
            ml[i] = -theta * dt * self.lo[i];
            md[i] = 1.0 - theta * dt * self.di[i];
            mu[i] = -theta * dt * self.up[i];
        }
        let t_new = self.eq.native_time(tau + dt);
        let mut a = 0;
        let mut b = n - 1;
        match &self.left {
            Row::Pde => {}
            Row::Fixed(g) => rhs[0] = g(t_new),
            Row::Extrap(rho) => {
                md[1] += ml[1] * (1.0 + rho);
                mu[1] -= ml[1] * rho;
                ml[1] = 0.0;
                a = 1;
            }
        }
        match &self.right {
            Row::Pde => unreachable!("far-field rows are never PDE rows"),
            Row::Fixed(g) => rhs[n - 1] = g(t_new),
            Row::Extrap(rho) => {
                md[n - 2] += mu[n - 2] * (1.0 + rho);
                ml[n - 2] -= mu[n - 2] * rho;
                mu[n - 2] = 0.0;
                b = n - 2;
            }
        }
        tridiag::solve_in_place(&ml[a..=b], &md[a..=b], &mu[a..=b], &mut rhs[a..=b], &mut self.scratch);
        u[a..=b].copy_from_slice(&rhs[a..=b]);
        if let Row::Extrap(rho) = self.left {
            u[0] = (1.0 + rho) * u[1] - rho * u[2];
        }
        if let Row::Extrap(rho) = self.right {
            u[n - 1] = (1.0 + rho) * u[n - 2] - rho * u[n - 3];
        }
    }
}

/// Marches `terminal` (a single slice, sampled on the solver grid at the
/// start of the march) over the equation's horizon. The result holds every
/// time level in marching order, tagged with native times.
pub fn solve_backward(eq: &Equation1D, terminal: &GridFunction, cfg: &SolverConfig1D) -> Result<GridFunction> {
    eq.validate()?;
    cfg.validate()?;
    if terminal.frame != eq.frame() {
        return Err(Error::FrameMismatch { expected: eq.frame().to_string(), found: terminal.frame.to_string() });
    }
    if terminal.axes.len() != 1 || terminal.values.is_empty() {
        return Err(Error::InvalidConfig("terminal data must be one 1-D slice".into()));
    }
    let grid = &terminal.axes[0];
    let (left, right) = boundary_rows(eq, grid, cfg)?;
    let (lo, di, up) = assemble(eq, grid.nodes());
    let mut st = Stepper { eq, lo, di, up, left, right, scratch: Vec::new() };

    let dt = eq.horizon() / cfg.n_time as f64;
    let mut u = terminal.values[0].clone();
    let mut times = vec![eq.native_time(0.0)];
    let mut slices = vec![u.clone()];
    for k in 0..cfg.n_time {
        let tau = k as f64 * dt;
        if k < cfg.rannacher_steps && cfg.theta != 1.0 {
            st.step(&mut u, tau, 0.5 * dt, 1.0);
            st.step(&mut u, tau + 0.5 * dt, 0.5 * dt, 1.0);
        } else {
            st.step(&mut u, tau, dt, cfg.theta);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::UnstableStep { step: k + 1 });
        }
        times.push(eq.native_time(if k + 1 == cfg.n_time { eq.horizon() } else { (k + 1) as f64 * dt }));
        slices.push(u.clone());
    }
    GridFunction::new(eq.frame(), terminal.axes.clone(), times, slices)
}

/// `u_τ − (A u_zz + B u_z − C u)` at interior nodes and interior time levels
/// (reported with the sign of the native-time equation); zero elsewhere.
pub fn residual_fd(f: &GridFunction, eq: &Equation1D) -> Result<GridFunction> {
    if f.times.len() < 3 {
        return Err(Error::TooFewSlices(f.times.len()));
    }
    if f.axes.len() != 1 {
        return Err(Error::FrameMismatch { expected: "one spatial axis".into(), found: format!("{} axes", f.axes.len()) });
    }
    if f.frame != eq.frame() {
        return Err(Error::FrameMismatch { expected: eq.frame().to_string(), found: f.frame.to_string() });
    }
    let z = f.axes[0].nodes();
    let n = z.len();
    let m = f.times.len();
    let sign = if matches!(eq, Equation1D::PiAdd { .. }) { -1.0 } else { 1.0 };
    let coeff: Vec<(f64, f64, f64)> = z.iter().map(|&x| eq.coefficients(x)).collect();
    let mut out = vec![vec![0.0; n]; m];
    for k in 1..m - 1 {
        let dtau = eq.tau_of(f.times[k + 1]) - eq.tau_of(f.times[k - 1]);
        let (um, u, up) = (&f.values[k - 1], &f.values[k], &f.values[k + 1]);
        for i in 1..n - 1 {
            let (hm, hp) = (z[i] - z[i - 1], z[i + 1] - z[i]);
            let w1 = d1_weights(hm, hp);
            let w2 = d2_weights(hm, hp);
            let uz = w1[0] * u[i - 1] + w1[1] * u[i] + w1[2] * u[i + 1];
            let uzz = w2[0] * u[i - 1] + w2[1] * u[i] + w2[2] * u[i + 1];
            let ut = (up[i] - um[i]) / dtau;
            let (a, b, c) = coeff[i];
            out[k][i] = sign * (ut - (a * uzz + b * uz - c * u[i]));
        }
    }
    GridFunction::new(f.frame, f.axes.clone(), f.times.clone(), out)
}

/// Exact solution available to a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "snake_case")]
pub enum Oracle {
    /// Spatially constant terminal value `c`; the solution is `c·e^{−Cτ}`.
    Constant { value: f64 },
    /// Zero terminal data with the far field pinned to the witness.
    Witness { kind: WitnessKind, params: WitnessParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub nodes: Vec<usize>,
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive levels.
    pub orders: Vec<f64>,
    /// Order between the two finest levels; `None` with a single level.
    pub observed_order: Option<f64>,
}

fn oracle_fn(eq: &Equation1D, oracle: &Oracle) -> Result<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    match *oracle {
        Oracle::Constant { value } => {
            let (_, _, c0) = eq.coefficients(0.0);
            let (_, _, c1) = eq.coefficients(1.0);
            if c0 != c1 {
                return Err(Error::NoOracle);
            }
            let e = *eq;
            Ok(Arc::new(move |_z, t| value * (-c0 * e.tau_of(t)).exp()))
        }
        Oracle::Witness { kind, params } => {
            let Equation1D::Cev { a, alpha, .. } = *eq else {
                return Err(Error::NoOracle);
            };
            match kind.power_law(params.sigma) {
                Some((wa, walpha)) if (wa - a).abs() <= 1e-14 * a && walpha == alpha => {}
                _ => return Err(Error::NoOracle),
            }
            Ok(Arc::new(move |z, t| {
                if z <= 0.0 {
                    0.0
                } else {
                    eval_witness(kind, &params, z, t).map(|w| w.value).unwrap_or(f64::NAN)
                }
            }))
        }
    }
}

/// Solves on `levels` successively refined grids (space and time step both
/// halved per level) and measures the max error against the oracle over all
/// nodes and time levels.
pub fn convergence_study(
    eq: &Equation1D,
    grid: &GridSpec,
    oracle: &Oracle,
    cfg: &SolverConfig1D,
    levels: usize,
) -> Result<ConvergenceReport> {
    eq.validate()?;
    if levels == 0 {
        return Err(Error::InvalidConfig("need at least one level".into()));
    }
    let exact = oracle_fn(eq, oracle)?;
    let mut cfg = cfg.clone();
    match oracle {
        Oracle::Constant { .. } => {
            if matches!(cfg.farfield_bc, FarFieldBc::DirichletValue(_)) || matches!(cfg.degenerate_bc, DegenerateBc::DirichletValue(_)) {
                return Err(Error::NoOracle);
            }
        }
        Oracle::Witness { .. } => {
            let far = grid.max;
            let ex = exact.clone();
            cfg.farfield_bc = FarFieldBc::DirichletValue(Arc::new(move |t| ex(far, t)));
            cfg.degenerate_bc = DegenerateBc::PdeOneSided;
        }
    }
    let mut spec = grid.with_frame(eq.frame());
    let mut report = ConvergenceReport { nodes: vec![], steps: vec![], errors: vec![], orders: vec![], observed_order: None };
    for level in 0..levels {
        if level > 0 {
            spec = spec.refined();
            cfg.n_time *= 2;
        }
        let g = build_grid(&spec)?;
        let t0 = eq.native_time(0.0);
        let terminal = GridFunction::sample(eq.frame(), vec![g], vec![t0], |p, t| exact(p[0], t))?;
        let sol = solve_backward(eq, &terminal, &cfg)?;
        let z = sol.axes[0].nodes();
        let mut err: f64 = 0.0;
        for (t, slice) in sol.times.iter().zip(&sol.values) {
            for (zi, ui) in z.iter().zip(slice) {
                err = err.max((ui - exact(*zi, *t)).abs());
            }
        }
        report.nodes.push(spec.n);
        report.steps.push(cfg.n_time);
        report.errors.push(err);
    }
    report.orders = report.errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    report.observed_order = report.orders.last().copied();
    Ok(report)
}
