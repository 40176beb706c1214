//! Douglas ADI solver for the two-factor pricing equation on an
//! `(x = ln S, v)` grid, and the superposition of the variance witness onto
//! its output.
//!
//! In time-to-go `τ = T − t` the equation reads
//! `V_τ = (v/2) V_xx + ρσv V_xv + (σ²v/2) V_vv + (r − q − v/2) V_x + (ω − κv) V_v − rV`.
//! The operator is split as `A0` (mixed term, explicit), `A1` (x terms) and
//! `A2` (v terms), with the reaction term shared equally by `A1` and `A2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fichera::DegenerateOperator;
use crate::grid::{build_grid, d1_weights, d2_weights, EndKind, Frame, Grid1D, GridFunction, GridSpec};
use crate::heston_model::{assemble_operator, payoff_eval, HestonParams, ModelCoefficients, OperatorForm, Payoff};
use crate::interp::{fd_weights, lagrange4};
use crate::par::{self, Execution};
use crate::tridiag;
use crate::witness::{eval_witness, WitnessKind, WitnessParams};

pub const MIN_NODES_2D: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x: Grid1D,
    pub v: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, v: Grid1D) -> Result<Self> {
        if x.len() < MIN_NODES_2D || v.len() < MIN_NODES_2D {
            return Err(Error::GridTooCoarse(format!(
                "need at least {MIN_NODES_2D} nodes per axis, got {}x{}",
                x.len(),
                v.len()
            )));
        }
        if v.min() != 0.0 || v.left != EndKind::Degenerate {
            return Err(Error::BadSpec("the variance axis must start at a degenerate v = 0".into()));
        }
        let mut x = x;
        let mut v = v;
        x.frame = Frame::LogSpotVar;
        v.frame = Frame::LogSpotVar;
        Ok(Self { x, v })
    }

    /// Default truncation around the strike: `x` uniform over
    /// `ln K ± 8√(θT + v0·T)` (the strike falls midway between nodes for even
    /// `nx`), `v ∈ [0, max(5θ, 5v0, 1)]` clustered toward zero by `v_stretch`.
    /// With `κ = 0`, `θ` is replaced by `σ²T/2`, the time-average of the
    /// variance drift's contribution.
    pub fn for_payoff(params: &HestonParams, form: OperatorForm, strike: f64, nx: usize, nv: usize, v_stretch: f64) -> Result<Self> {
        let m = params.coefficients(form)?;
        if !(strike > 0.0) {
            return Err(Error::InvalidParams(format!("strike must be > 0, got {strike}")));
        }
        let theta = effective_theta(&m, params.maturity);
        let half = 8.0 * (theta * params.maturity + params.v0 * params.maturity).sqrt();
        let ln_k = strike.ln();
        let x = build_grid(
            &GridSpec::uniform(ln_k - half, ln_k + half, nx)
                .with_frame(Frame::LogSpotVar)
                .with_ends(EndKind::FarField, EndKind::FarField),
        )
        .map_err(|e| coarse(e, nx))?;
        let v_max = (5.0 * theta).max(5.0 * params.v0).max(1.0);
        let v = build_grid(&GridSpec::new(0.0, v_max, nv, v_stretch).with_frame(Frame::LogSpotVar)).map_err(|e| coarse(e, nv))?;
        Self::new(x, v)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.v.len())
    }
}

fn coarse(e: Error, n: usize) -> Error {
    if n < MIN_NODES_2D {
        Error::GridTooCoarse(format!("need at least {MIN_NODES_2D} nodes per axis, got {n}"))
    } else {
        e
    }
}

fn effective_theta(m: &ModelCoefficients, maturity: f64) -> f64 {
    if m.mean_reversion > 0.0 {
        m.omega / m.mean_reversion
    } else {
        0.5 * m.omega * maturity
    }
}

/// Which time levels to keep in the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceStore {
    #[default]
    All,
    /// Terminal data and the final level only.
    Ends,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig2D {
    pub scheme: AdiScheme,
    pub theta: f64,
    /// Leading steps replaced by two fully implicit half steps each.
    pub rannacher_steps: usize,
    pub n_time: usize,
    pub slices: SliceStore,
    pub trace: TraceStencil,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdiScheme {
    /// Single predictor plus x/v corrections; first order in time once the
    /// explicit mixed term is present.
    #[default]
    Douglas,
    /// Douglas followed by a second stabilising corrector; second order with
    /// an explicit mixed term.
    HundsdorferVerwer,
}

/// One-sided `V_v` stencil of the first-order equation left at `v = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStencil {
    /// Two-point forward difference (monotone, first order).
    FirstOrder,
    /// Three-point forward difference (second order).
    #[default]
    SecondOrder,
}

impl Default for SolverConfig2D {
    fn default() -> Self {
        Self { scheme: AdiScheme::Douglas, theta: 0.5, rannacher_steps: 2, n_time: 100, slices: SliceStore::All, trace: TraceStencil::default(), exec: Execution::default() }
    }
}

/// Labels of the closures used where the equation itself prescribes nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub scheme: String,
    pub x_boundaries: String,
    pub v_max_boundary: String,
    pub v_zero_boundary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HestonSolution {
    /// Frame `LogSpotVar`; slices in marching order, first at `t = T`.
    pub surface: GridFunction,
    pub params: HestonParams,
    pub form: OperatorForm,
    pub payoff: Payoff,
    pub metadata: SolveMetadata,
}

impl HestonSolution {
    /// Value at `(S, v)` on stored slice `k`, by cubic interpolation in both
    /// directions.
    pub fn value_at_slice(&self, k: usize, spot: f64, v: f64) -> f64 {
        let xs = self.surface.axes[0].nodes();
        let vs = self.surface.axes[1].nodes();
        let nv = vs.len();
        let x = spot.ln();
        let i = xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1) - 1;
        let s = i.saturating_sub(1).min(xs.len() - 4);
        let slice = &self.surface.values[k];
        let col: Vec<f64> = (s..s + 4).map(|ii| lagrange4(vs, &slice[ii * nv..(ii + 1) * nv], v)).collect();
        lagrange4(&xs[s..s + 4], &col, x)
    }

    /// Value at `t = 0`.
    pub fn value_at(&self, spot: f64, v: f64) -> f64 {
        self.value_at_slice(self.surface.values.len() - 1, spot, v)
    }
}

#[derive(Clone, Copy)]
struct Stencil {
    l: f64,
    d: f64,
    u: f64,
}

/// Convection–diffusion row; with `upwind`, first-order upwinding wherever
/// the central stencil has a negative off-diagonal.
fn row(alpha: f64, beta: f64, react: f64, hm: f64, hp: f64, upwind: bool) -> Stencil {
    let w1 = d1_weights(hm, hp);
    let w2 = d2_weights(hm, hp);
    let (mut l, mut d, mut u) = (alpha * w2[0] + beta * w1[0], alpha * w2[1] + beta * w1[1], alpha * w2[2] + beta * w1[2]);
    if upwind && (l < 0.0 || u < 0.0) {
        if beta > 0.0 {
            l = alpha * w2[0];
            d = alpha * w2[1] - beta / hp;
            u = alpha * w2[2] + beta / hp;
        } else {
            l = alpha * w2[0] - beta / hm;
            d = alpha * w2[1] + beta / hm;
            u = alpha * w2[2];
        }
    }
    Stencil { l, d: d - react, u }
}

struct Operators {
    nx: usize,
    nv: usize,
    /// `A1` stencils at `(i, j)`, x-major; only interior `i` are used.
    a1: Vec<Stencil>,
    /// `A2` stencils per `j`; row 0 is the one-sided trace.
    a2: Vec<Stencil>,
    /// `ρσ v_j` times the x and v first-derivative weights.
    mixed: Vec<f64>,
    wx: Vec<[f64; 3]>,
    wv: Vec<[f64; 3]>,
    /// Extrapolation ratio at `v_max`.
    rho_v: f64,
    /// Weight of `u[j = 2]` in the `v = 0` row (second-order trace only).
    trace2: f64,
}

impl Operators {
    fn new(m: &ModelCoefficients, xs: &[f64], vs: &[f64], trace: TraceStencil) -> Self {
        let (nx, nv) = (xs.len(), vs.len());
        let mut wx = vec![[0.0; 3]; nx];
        for i in 1..nx - 1 {
            wx[i] = d1_weights(xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        }
        let mut wv = vec![[0.0; 3]; nv];
        for j in 1..nv - 1 {
            wv[j] = d1_weights(vs[j] - vs[j - 1], vs[j + 1] - vs[j]);
        }
        let zero = Stencil { l: 0.0, d: 0.0, u: 0.0 };
        let mut a1 = vec![zero; nx * nv];
        for i in 1..nx - 1 {
            let (hm, hp) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            for j in 0..nv {
                let v = vs[j];
                // central even where v vanishes: the x drift is small and
                // upwinding it costs an O(h) error along the whole v = 0 line
                a1[i * nv + j] = row(0.5 * v, m.spot_drift - 0.5 * v, 0.5 * m.r, hm, hp, false);
            }
        }
        let mut a2 = vec![zero; nv];
        let b0 = m.omega;
        let h0 = vs[1] - vs[0];
        let mut trace2 = 0.0;
        match trace {
            TraceStencil::FirstOrder => a2[0] = Stencil { l: 0.0, d: -b0 / h0 - 0.5 * m.r, u: b0 / h0 },
            TraceStencil::SecondOrder => {
                let w = fd_weights(vs[0], &vs[..3], 1);
                a2[0] = Stencil { l: 0.0, d: b0 * w[0] - 0.5 * m.r, u: b0 * w[1] };
                trace2 = b0 * w[2];
            }
        }
        for j in 1..nv - 1 {
            let v = vs[j];
            a2[j] = row(0.5 * m.sigma * m.sigma * v, m.omega - m.mean_reversion * v, 0.5 * m.r, vs[j] - vs[j - 1], vs[j + 1] - vs[j], true);
        }
        let mixed = vs.iter().map(|&v| m.rho * m.sigma * v).collect();
        let rho_v = (vs[nv - 1] - vs[nv - 2]) / (vs[nv - 2] - vs[nv - 3]);
        Self { nx, nv, a1, a2, mixed, wx, wv, rho_v, trace2 }
    }

    fn a1u(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let nv = self.nv;
        let s = self.a1[i * nv + j];
        s.l * u[(i - 1) * nv + j] + s.d * u[i * nv + j] + s.u * u[(i + 1) * nv + j]
    }

    fn a2u(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let nv = self.nv;
        let s = self.a2[j];
        let c = i * nv + j;
        let lower = if j > 0 { s.l * u[c - 1] } else { self.trace2 * u[c + 2] };
        lower + s.d * u[c] + s.u * u[c + 1]
    }

    fn a0u(&self, u: &[f64], i: usize, j: usize) -> f64 {
        if j == 0 || self.mixed[j] == 0.0 {
            return 0.0;
        }
        let nv = self.nv;
        let (wx, wv) = (self.wx[i], self.wv[j]);
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let ii = i + a - 1;
            for (b, wb) in wv.iter().enumerate() {
                acc += wa * wb * u[ii * nv + j + b - 1];
            }
        }
        self.mixed[j] * acc
    }
}

struct Problem<'a> {
    ops: Operators,
    xs: &'a [f64],
    payoff: &'a Payoff,
    r: f64,
    drift: f64,
    exec: Execution,
}

impl Problem<'_> {
    fn boundary(&self, x: f64, tau: f64) -> f64 {
        (-self.r * tau).exp() * payoff_eval(self.payoff, x.exp() * (self.drift * tau).exp(), 0.0)
    }

    /// `A0 u + A1 u + A2 u` on the PDE rows; zero elsewhere.
    fn explicit(&self, u: &[f64]) -> Vec<f64> {
        let ops = &self.ops;
        let (nx, nv) = (ops.nx, ops.nv);
        let mut f = vec![0.0; nx * nv];
        par::for_each_chunk_mut(self.exec, &mut f, nv, |i, row| {
            if i == 0 || i == nx - 1 {
                return;
            }
            for (j, out) in row.iter_mut().enumerate().take(nv - 1) {
                *out = ops.a0u(u, i, j) + ops.a1u(u, i, j) + ops.a2u(u, i, j);
            }
        });
        f
    }

    /// Implicit x then v corrections: solves
    /// `(I - θΔτ A1) y1 = y0 - θΔτ A1 base`, `(I - θΔτ A2) y2 = y1 - θΔτ A2 base`.
    fn sweeps(&self, y0: &[f64], base: &[f64], dt: f64, theta: f64, g: (f64, f64)) -> Vec<f64> {
        let ops = &self.ops;
        let (nx, nv) = (ops.nx, ops.nv);
        let nvp = nv - 1; // PDE rows in v: 0..nv-2

        // x sweeps on v-major lines: line j holds i = 0..nx
        let mut y1 = vec![0.0; nvp * nx];
        par::for_each_chunk_mut(self.exec, &mut y1, nx, |j, line| {
            let mut lo = vec![0.0; nx];
            let mut di = vec![1.0; nx];
            let mut up = vec![0.0; nx];
            line[0] = g.0;
            line[nx - 1] = g.1;
            for i in 1..nx - 1 {
                let s = ops.a1[i * nv + j];
                line[i] = y0[i * nv + j] - theta * dt * ops.a1u(base, i, j);
                lo[i] = -theta * dt * s.l;
                di[i] = 1.0 - theta * dt * s.d;
                up[i] = -theta * dt * s.u;
            }
            let mut scratch = Vec::new();
            tridiag::solve_in_place(&lo, &di, &up, line, &mut scratch);
        });

        // v sweeps on x-major lines, interior i only
        let mut out = vec![0.0; nx * nv];
        let rho = ops.rho_v;
        par::for_each_chunk_mut(self.exec, &mut out, nv, |i, line| {
            if i == 0 || i == nx - 1 {
                let v = if i == 0 { g.0 } else { g.1 };
                line.iter_mut().for_each(|x| *x = v);
                return;
            }
            let mut lo = vec![0.0; nvp];
            let mut di = vec![1.0; nvp];
            let mut up = vec![0.0; nvp];
            for j in 0..nvp {
                let s = ops.a2[j];
                line[j] = y1[j * nx + i] - theta * dt * ops.a2u(base, i, j);
                lo[j] = -theta * dt * s.l;
                di[j] = 1.0 - theta * dt * s.d;
                up[j] = -theta * dt * s.u;
            }
            if ops.trace2 != 0.0 {
                // fold the third entry of the v = 0 row into a tridiagonal row
                let f = -theta * dt * ops.trace2 / up[1];
                di[0] -= f * lo[1];
                up[0] -= f * di[1];
                line[0] -= f * line[1];
            }
            let last = nvp - 1;
            di[last] += up[last] * (1.0 + rho);
            lo[last] -= up[last] * rho;
            up[last] = 0.0;
            let mut scratch = Vec::new();
            tridiag::solve_in_place(&lo, &di, &up, &mut line[..nvp], &mut scratch);
            line[nv - 1] = (1.0 + rho) * line[nv - 2] - rho * line[nv - 3];
        });
        out
    }

    /// One ADI step from `tau` to `tau + dt`.
    fn step(&self, u: &mut [f64], tau: f64, dt: f64, theta: f64, scheme: AdiScheme) {
        let nx = self.ops.nx;
        let tau_new = tau + dt;
        let g = (self.boundary(self.xs[0], tau_new), self.boundary(self.xs[nx - 1], tau_new));
        let f0 = self.explicit(u);
        let y0: Vec<f64> = u.iter().zip(&f0).map(|(a, b)| a + dt * b).collect();
        let y2 = self.sweeps(&y0, u, dt, theta, g);
        match scheme {
            AdiScheme::Douglas => u.copy_from_slice(&y2),
            AdiScheme::HundsdorferVerwer => {
                let f2 = self.explicit(&y2);
                let z0: Vec<f64> = y0.iter().zip(f2.iter().zip(&f0)).map(|(y, (a, b))| y + 0.5 * dt * (a - b)).collect();
                let z2 = self.sweeps(&z0, &y2, dt, theta, g);
                u.copy_from_slice(&z2);
            }
        }
    }
}

/// Marches the payoff from `t = T` to `t = 0`.
pub fn solve_heston_pde(
    params: &HestonParams,
    form: OperatorForm,
    payoff: &Payoff,
    grid: &Grid2D,
    cfg: &SolverConfig2D,
) -> Result<HestonSolution> {
    let m = params.coefficients(form)?;
    payoff.validate()?;
    let grid = Grid2D::new(grid.x.clone(), grid.v.clone())?;
    if !(0.0..=1.0).contains(&cfg.theta) || cfg.n_time == 0 {
        return Err(Error::InvalidConfig(format!("need theta in [0, 1] and n_time >= 1, got {} and {}", cfg.theta, cfg.n_time)));
    }
    let xs = grid.x.nodes();
    let vs = grid.v.nodes();
    let (nx, nv) = grid.dims();
    let problem = Problem { ops: Operators::new(&m, xs, vs, cfg.trace), xs, payoff, r: m.r, drift: m.spot_drift, exec: cfg.exec };

    let mut u = vec![0.0; nx * nv];
    for i in 0..nx {
        for j in 0..nv {
            u[i * nv + j] = payoff_eval(payoff, xs[i].exp(), vs[j]);
        }
    }
    let maturity = params.maturity;
    let dt = maturity / cfg.n_time as f64;
    let mut times = vec![maturity];
    let mut slices = vec![u.clone()];
    for k in 0..cfg.n_time {
        let tau = k as f64 * dt;
        if k < cfg.rannacher_steps && cfg.theta != 1.0 {
            problem.step(&mut u, tau, 0.5 * dt, 1.0, AdiScheme::Douglas);
            problem.step(&mut u, tau + 0.5 * dt, 0.5 * dt, 1.0, AdiScheme::Douglas);
        } else {
            problem.step(&mut u, tau, dt, cfg.theta, cfg.scheme);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::UnstableStep { step: k + 1 });
        }
        let last = k + 1 == cfg.n_time;
        if last || cfg.slices == SliceStore::All {
            times.push(if last { 0.0 } else { maturity - (k + 1) as f64 * dt });
            slices.push(u.clone());
        }
    }
    let surface = GridFunction::new(Frame::LogSpotVar, vec![grid.x.clone(), grid.v.clone()], times, slices)?;
    Ok(HestonSolution {
        surface,
        params: *params,
        form,
        payoff: payoff.clone(),
        metadata: SolveMetadata {
            scheme: format!("{:?} ADI, theta = {}, {} steps, {} implicit start-up steps", cfg.scheme, cfg.theta, cfg.n_time, cfg.rannacher_steps),
            x_boundaries: "discounted payoff of the forward (numerical surrogate)".into(),
            v_max_boundary: "zero second v-derivative (numerical surrogate for the growth class)".into(),
            v_zero_boundary: "none imposed: one-sided discretisation of the first-order trace".into(),
        },
    })
}

/// Sub-rectangle of `(x or S, v, t)` over which residuals are summarised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualWindow {
    pub axis0: (f64, f64),
    pub axis1: (f64, f64),
    pub time: (f64, f64),
}

impl ResidualWindow {
    pub fn everything() -> Self {
        let inf = f64::INFINITY;
        Self { axis0: (-inf, inf), axis1: (-inf, inf), time: (-inf, inf) }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        inside(p[0], self.axis0) && inside(p[1], self.axis1) && inside(p[2], self.time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max_abs: f64,
    pub rms: f64,
    pub count: usize,
    /// `(axis0, axis1, t)` of the largest residual.
    pub argmax: [f64; 3],
}

/// Central-difference residual `Σ a_ij ∂_ij V + Σ b_i ∂_i V + cV` of a 2-D
/// grid function against an assembled operator (coordinates
/// `(axis0, axis1, t)`), over interior nodes and time levels inside `window`.
pub fn residual_fd_2d(f: &GridFunction, op: &DegenerateOperator, window: &ResidualWindow, exec: Execution) -> Result<ResidualStats> {
    let expected = match op.form() {
        Some(OperatorForm::LogSpot) => Frame::LogSpotVar,
        Some(_) => Frame::SpotVar,
        None => f.frame,
    };
    if f.frame != expected || f.axes.len() != 2 || op.dim() != 3 {
        return Err(Error::FrameMismatch { expected: expected.to_string(), found: f.frame.to_string() });
    }
    if f.times.len() < 3 {
        return Err(Error::TooFewSlices(f.times.len()));
    }
    let xs = f.axes[0].nodes();
    let vs = f.axes[1].nodes();
    let (nx, nv) = (xs.len(), vs.len());
    let per_slice: Vec<(f64, f64, usize, [f64; 3])> = par::map_range(exec, f.times.len() - 2, |km1| {
        let k = km1 + 1;
        let (um, u, up) = (&f.values[k - 1], &f.values[k], &f.values[k + 1]);
        let dt = f.times[k + 1] - f.times[k - 1];
        let mut best = (0.0f64, 0.0f64, 0usize, [0.0; 3]);
        for i in 1..nx - 1 {
            let wx1 = d1_weights(xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let wx2 = d2_weights(xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            for j in 1..nv - 1 {
                let p = [xs[i], vs[j], f.times[k]];
                if !window.contains(p) {
                    continue;
                }
                let wv1 = d1_weights(vs[j] - vs[j - 1], vs[j + 1] - vs[j]);
                let wv2 = d2_weights(vs[j] - vs[j - 1], vs[j + 1] - vs[j]);
                let at = |a: usize, b: usize| u[(i + a - 1) * nv + j + b - 1];
                let (mut vx, mut vxx, mut vv, mut vvv, mut vxv) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for a in 0..3 {
                    vx += wx1[a] * at(a, 1);
                    vxx += wx2[a] * at(a, 1);
                    vv += wv1[a] * at(1, a);
                    vvv += wv2[a] * at(1, a);
                    for b in 0..3 {
                        vxv += wx1[a] * wv1[b] * at(a, b);
                    }
                }
                let vt = (up[i * nv + j] - um[i * nv + j]) / dt;
                let res = op.a(&p, 0, 0) * vxx
                    + 2.0 * op.a(&p, 0, 1) * vxv
                    + op.a(&p, 1, 1) * vvv
                    + op.b(&p, 0) * vx
                    + op.b(&p, 1) * vv
                    + op.b(&p, 2) * vt
                    + op.c(&p) * at(1, 1);
                best.1 += res * res;
                best.2 += 1;
                if res.abs() > best.0 {
                    best.0 = res.abs();
                    best.3 = p;
                }
            }
        }
        best
    });
    let mut stats = ResidualStats { max_abs: 0.0, rms: 0.0, count: 0, argmax: [f64::NAN; 3] };
    let mut sq = 0.0;
    for (m, s, c, p) in per_slice {
        sq += s;
        stats.count += c;
        if m > stats.max_abs {
            stats.max_abs = m;
            stats.argmax = p;
        }
    }
    if stats.count > 0 {
        stats.rms = (sq / stats.count as f64).sqrt();
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionReport {
    pub lambda: f64,
    pub window: ResidualWindow,
    pub v1_residual: ResidualStats,
    pub v2_residual: ResidualStats,
    /// `max |R(V2)| / max |R(V1)|` over the window.
    pub residual_ratio: f64,
    /// Smallest retained variance node.
    pub v_min: f64,
    /// `max_x v_min·|V2 − V1|` at `t = 0`.
    pub edge_scaled_gap: f64,
    /// `e^{−2 v_min/(σ²T)}`.
    pub edge_reference: f64,
    /// `max |V2 − V1|` over the first retained variance column, all times.
    pub edge_max_gap: f64,
    /// `max |V2 − V1|` on the terminal slice.
    pub terminal_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superposition {
    /// `V1` restricted to `v ≥ v_1`.
    pub v1: GridFunction,
    pub v2: GridFunction,
    pub report: SuperpositionReport,
}

/// `V2 = V1 + λ·Π(v, t)` on the nodes with `v > 0` (the witness is singular
/// at `v = 0`, so that column is dropped from both surfaces).
pub fn superpose_witness(sol: &HestonSolution, kind: WitnessKind, lam: f64, window: &ResidualWindow, exec: Execution) -> Result<Superposition> {
    if kind != WitnessKind::PiHeston {
        return Err(Error::InvalidParams(format!("only the variance witness can be superposed, got {kind:?}")));
    }
    if sol.form == OperatorForm::FullHeston {
        return Err(Error::FrameMismatch { expected: "SpecialModel".into(), found: "FullHeston".into() });
    }
    if sol.surface.frame != Frame::LogSpotVar {
        return Err(Error::FrameMismatch { expected: Frame::LogSpotVar.to_string(), found: sol.surface.frame.to_string() });
    }
    if sol.surface.times.len() < 3 {
        return Err(Error::MissingTimeSlices(format!("superposition needs stored time slices, got {}", sol.surface.times.len())));
    }
    let p = &sol.params;
    let wp = WitnessParams::new(p.sigma, p.r, p.maturity)?;
    let x_axis = sol.surface.axes[0].clone();
    let v_full = sol.surface.axes[1].nodes();
    let v_axis = Grid1D::new(v_full[1..].to_vec(), Frame::LogSpotVar, EndKind::FarField, EndKind::FarField)?;
    let nv_full = v_full.len();
    let nv = nv_full - 1;
    let nx = x_axis.len();
    let mut v1_vals = Vec::with_capacity(sol.surface.times.len());
    let mut v2_vals = Vec::with_capacity(sol.surface.times.len());
    for (t, slice) in sol.surface.times.iter().zip(&sol.surface.values) {
        let pi: Vec<f64> = v_full[1..].iter().map(|&v| eval_witness(kind, &wp, v, *t).map(|w| w.value)).collect::<Result<_>>()?;
        let mut a = Vec::with_capacity(nx * nv);
        let mut b = Vec::with_capacity(nx * nv);
        for i in 0..nx {
            for j in 0..nv {
                let v1 = slice[i * nv_full + j + 1];
                a.push(v1);
                b.push(v1 + lam * pi[j]);
            }
        }
        v1_vals.push(a);
        v2_vals.push(b);
    }
    let axes = vec![x_axis, v_axis];
    let v1 = GridFunction::new(Frame::LogSpotVar, axes.clone(), sol.surface.times.clone(), v1_vals)?;
    let v2 = GridFunction::new(Frame::LogSpotVar, axes, sol.surface.times.clone(), v2_vals)?;

    let op = assemble_operator(p, OperatorForm::LogSpot)?;
    let r1 = residual_fd_2d(&v1, &op, window, exec)?;
    let r2 = residual_fd_2d(&v2, &op, window, exec)?;
    let v_min = v_full[1];
    let last = v1.values.len() - 1;
    let mut edge_scaled_gap: f64 = 0.0;
    let mut edge_max_gap: f64 = 0.0;
    for k in 0..v1.values.len() {
        for i in 0..nx {
            let gap = (v2.values[k][i * nv] - v1.values[k][i * nv]).abs();
            edge_max_gap = edge_max_gap.max(gap);
            if k == last {
                edge_scaled_gap = edge_scaled_gap.max(v_min * gap);
            }
        }
    }
    let terminal_gap = v2.values[0].iter().zip(&v1.values[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let report = SuperpositionReport {
        lambda: lam,
        window: *window,
        v1_residual: r1,
        v2_residual: r2,
        residual_ratio: if r1.max_abs > 0.0 { r2.max_abs / r1.max_abs } else if r2.max_abs == 0.0 { 1.0 } else { f64::INFINITY },
        v_min,
        edge_scaled_gap,
        edge_reference: (-2.0 * v_min / (p.sigma * p.sigma * p.maturity)).exp(),
        edge_max_gap,
        terminal_gap,
    };
    Ok(Superposition { v1, v2, report })
}
