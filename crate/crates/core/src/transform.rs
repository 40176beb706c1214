//! Changes of variables between the frames of the degenerate equations, and
//! resampling of grid functions across them.
//!
//! All supported maps are separable: each spatial axis and the time axis are
//! transformed independently. Elementary maps are
//!
//! * `SpotVar ↔ LogSpotVar`: `x = ln S`;
//! * `VarTime ↔ FellerX`: `x = 4v/σ²`, `τ = T − t` (only for `r = 0`);
//! * `FellerX ↔ InvY`: `y = 1/x`;
//! * `Cev{α, a} ↔ FellerX`: `x = y^{2(1−α)} / (2a(1−α)²)`;
//!
//! and anything reachable by composing them.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::grid::Frame;
use crate::error::{Error, Result};
use crate::grid::{EndKind, Grid1D, GridFunction};
use crate::interp::{fourth_difference_bound, MonotoneCubic};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Parameters some maps depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub sigma: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
}

impl MapParams {
    pub fn new(sigma: f64, r: f64, maturity: f64) -> Self {
        Self { sigma, r, maturity }
    }
}

/// Bijection of one axis.
#[derive(Clone)]
pub struct AxisMap {
    pub forward: ScalarFn,
    pub inverse: ScalarFn,
    pub increasing: bool,
}

impl AxisMap {
    pub fn identity() -> Self {
        Self { forward: Arc::new(|x| x), inverse: Arc::new(|x| x), increasing: true }
    }

    fn new(forward: impl Fn(f64) -> f64 + Send + Sync + 'static, inverse: impl Fn(f64) -> f64 + Send + Sync + 'static, increasing: bool) -> Self {
        Self { forward: Arc::new(forward), inverse: Arc::new(inverse), increasing }
    }

    fn then(self, next: AxisMap) -> AxisMap {
        let (f1, f2) = (self.forward, next.forward.clone());
        let (i1, i2) = (self.inverse, next.inverse);
        AxisMap {
            forward: Arc::new(move |x| f2(f1(x))),
            inverse: Arc::new(move |y| i1(i2(y))),
            increasing: self.increasing == next.increasing,
        }
    }

    fn reversed(self) -> AxisMap {
        AxisMap { forward: self.inverse, inverse: self.forward, increasing: self.increasing }
    }
}

#[derive(Clone)]
pub struct CoordMap {
    pub source: Frame,
    pub target: Frame,
    pub space: Vec<AxisMap>,
    pub time: AxisMap,
    pub jacobian_note: String,
}

impl fmt::Debug for CoordMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordMap")
            .field("source", &self.source)
            .field("target", &self.target)
            .field("jacobian_note", &self.jacobian_note)
            .finish()
    }
}

impl CoordMap {
    fn identity(frame: Frame) -> Self {
        Self {
            source: frame,
            target: frame,
            space: vec![AxisMap::identity(); frame.spatial_dims()],
            time: AxisMap::identity(),
            jacobian_note: "identity".into(),
        }
    }

    /// Maps a point given as spatial coordinates followed by time.
    pub fn forward(&self, point: &[f64]) -> Vec<f64> {
        self.apply(point, true)
    }

    pub fn inverse(&self, point: &[f64]) -> Vec<f64> {
        self.apply(point, false)
    }

    fn apply(&self, point: &[f64], fwd: bool) -> Vec<f64> {
        assert_eq!(point.len(), self.space.len() + 1, "point must carry spatial coordinates and time");
        let pick = |m: &AxisMap, x: f64| if fwd { (m.forward)(x) } else { (m.inverse)(x) };
        let mut out: Vec<f64> = self.space.iter().zip(point).map(|(m, &x)| pick(m, x)).collect();
        out.push(pick(&self.time, point[point.len() - 1]));
        out
    }

    pub fn inverted(&self) -> CoordMap {
        CoordMap {
            source: self.target,
            target: self.source,
            space: self.space.iter().cloned().map(AxisMap::reversed).collect(),
            time: self.time.clone().reversed(),
            jacobian_note: format!("inverse of ({})", self.jacobian_note),
        }
    }

    fn then(self, next: CoordMap) -> CoordMap {
        CoordMap {
            source: self.source,
            target: next.target,
            space: self.space.into_iter().zip(next.space).map(|(a, b)| a.then(b)).collect(),
            time: self.time.then(next.time),
            jacobian_note: format!("{}; then {}", self.jacobian_note, next.jacobian_note),
        }
    }
}

fn same_kind(a: Frame, b: Frame) -> bool {
    std::mem::discriminant(&a) == std::mem::discriminant(&b)
}

fn check_frame(f: Frame) -> Result<()> {
    if let Frame::Cev { alpha, a } = f {
        if alpha == 1.0 {
            return Err(Error::AlphaOne);
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParams(format!("power-law frame needs alpha > 0 and a > 0, got alpha={alpha}, a={a}")));
        }
    }
    Ok(())
}

/// Elementary map along one edge, or `None` when the two frames are not
/// adjacent.
fn edge(from: Frame, to: Frame, p: &MapParams) -> Option<Result<CoordMap>> {
    use Frame::*;
    let forward_of = |from: Frame, to: Frame| -> Option<Result<CoordMap>> {
        match (from, to) {
            (SpotVar, LogSpotVar) => Some(Ok(CoordMap {
                source: from,
                target: to,
                space: vec![AxisMap::new(f64::ln, f64::exp, true), AxisMap::identity()],
                time: AxisMap::identity(),
                jacobian_note: "x = ln S: S∂_S = ∂_x, S²∂_SS = ∂_xx − ∂_x".into(),
            })),
            (VarTime, FellerX) => Some((|| {
                if p.r != 0.0 {
                    return Err(Error::InvalidParams(format!("the variance-to-Feller reduction needs r = 0, got r = {}", p.r)));
                }
                if !(p.sigma > 0.0) || !(p.maturity > 0.0) {
                    return Err(Error::InvalidParams("the variance-to-Feller reduction needs sigma > 0 and T > 0".into()));
                }
                let k = 4.0 / (p.sigma * p.sigma);
                let t_end = p.maturity;
                Ok(CoordMap {
                    source: from,
                    target: to,
                    space: vec![AxisMap::new(move |v| k * v, move |x| x / k, true)],
                    time: AxisMap::new(move |t| t_end - t, move |tau| t_end - tau, false),
                    jacobian_note: format!("x = 4v/sigma^2 (dx/dv = {k}), tau = T - t (d/dt = -d/dtau)"),
                })
            })()),
            (FellerX, InvY) => Some(Ok(CoordMap {
                source: from,
                target: to,
                space: vec![AxisMap::new(|x| 1.0 / x, |y| 1.0 / y, false)],
                time: AxisMap::identity(),
                jacobian_note: "y = 1/x: d/dx = -y^2 d/dy".into(),
            })),
            (Cev { alpha, a }, FellerX) => Some((|| {
                check_frame(from)?;
                let e = 2.0 * (1.0 - alpha);
                let c = 2.0 * a * (1.0 - alpha) * (1.0 - alpha);
                Ok(CoordMap {
                    source: from,
                    target: to,
                    space: vec![AxisMap::new(move |y| y.powf(e) / c, move |x| (c * x).powf(1.0 / e), e > 0.0)],
                    time: AxisMap::identity(),
                    jacobian_note: format!("x = y^{e} / {c}"),
                })
            })()),
            _ => None,
        }
    };
    forward_of(from, to).or_else(|| forward_of(to, from).map(|m| m.map(|m| m.inverted())))
}

fn neighbours(f: Frame, endpoints: [Frame; 2]) -> Vec<Frame> {
    use Frame::*;
    let mut out = match f {
        SpotVar => vec![LogSpotVar],
        LogSpotVar => vec![SpotVar],
        VarTime => vec![FellerX],
        FellerX => vec![VarTime, InvY],
        InvY => vec![FellerX],
        Cev { .. } => vec![FellerX],
    };
    if f == FellerX {
        out.extend(endpoints.into_iter().filter(|e| matches!(e, Cev { .. })));
    }
    out
}

/// Map from `source` to `target`, composed along the shortest chain of
/// elementary maps.
pub fn make_map(source: Frame, target: Frame, params: &MapParams) -> Result<CoordMap> {
    check_frame(source)?;
    check_frame(target)?;
    if source == target {
        return Ok(CoordMap::identity(source));
    }
    let unsupported = || Error::UnsupportedPair { from: source.to_string(), to: target.to_string() };
    let ends = [source, target];
    let mut prev: Vec<(Frame, Frame)> = Vec::new();
    let mut seen = vec![source];
    let mut queue = VecDeque::from([source]);
    while let Some(f) = queue.pop_front() {
        if f == target {
            break;
        }
        for n in neighbours(f, ends) {
            if !seen.contains(&n) {
                seen.push(n);
                prev.push((n, f));
                queue.push_back(n);
            }
        }
    }
    if !seen.contains(&target) {
        return Err(unsupported());
    }
    let mut path = vec![target];
    while let Some(&(_, p)) = prev.iter().find(|(n, _)| n == path.last().unwrap()) {
        path.push(p);
        if p == source {
            break;
        }
    }
    path.reverse();
    let mut map: Option<CoordMap> = None;
    for w in path.windows(2) {
        let step = edge(w[0], w[1], params).ok_or_else(unsupported)??;
        map = Some(match map {
            None => step,
            Some(m) => m.then(step),
        });
    }
    let map = map.ok_or_else(unsupported)?;
    debug_assert!(same_kind(map.source, source) && same_kind(map.target, target));
    Ok(map)
}

enum Plan {
    /// Output node `m` takes input node `idx[m]`.
    Permute(Vec<usize>),
    /// Output node `m` interpolates the input at source coordinate `q[m]`.
    Interp(Vec<f64>),
}

fn axis_plan(src: &Grid1D, map: &AxisMap, target: Option<&Grid1D>, frame: Frame) -> Result<(Grid1D, Plan)> {
    match target {
        None => {
            let mapped: Vec<f64> = src.nodes().iter().map(|&x| (map.forward)(x)).collect();
            if mapped.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonMonotoneMap);
            }
            let mut idx: Vec<usize> = (0..mapped.len()).collect();
            if !map.increasing {
                idx.reverse();
            }
            let nodes: Vec<f64> = idx.iter().map(|&k| mapped[k]).collect();
            if nodes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::NonMonotoneMap);
            }
            let (left, right) = if map.increasing { (src.left, src.right) } else { (EndKind::FarField, EndKind::FarField) };
            Ok((Grid1D::new(nodes, frame, left, right)?, Plan::Permute(idx)))
        }
        Some(t) => {
            let q: Vec<f64> = t.nodes().iter().map(|&y| (map.inverse)(y)).collect();
            if q.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonMonotoneMap);
            }
            let ordered = if map.increasing { q.windows(2).all(|w| w[1] > w[0]) } else { q.windows(2).all(|w| w[1] < w[0]) };
            if !ordered {
                return Err(Error::NonMonotoneMap);
            }
            let tol = 1e-12 * (src.max() - src.min());
            if q.iter().any(|&x| x < src.min() - tol || x > src.max() + tol) {
                return Err(Error::DomainError("target grid reaches outside the sampled source range".into()));
            }
            let mut g = t.clone();
            g.frame = frame;
            Ok((g, Plan::Interp(q)))
        }
    }
}

/// Resamples `f` into `map.target`. Without `target_axes` the mapped source
/// nodes are used and values are carried over exactly; otherwise values are
/// interpolated with the monotone cubic along each axis and the heuristic
/// error bound is accumulated in `interp_error_bound`.
pub fn pushforward(f: &GridFunction, map: &CoordMap, target_axes: Option<&[Grid1D]>) -> Result<GridFunction> {
    if !same_kind(f.frame, map.source) || f.frame != map.source {
        return Err(Error::FrameMismatch { expected: map.source.to_string(), found: f.frame.to_string() });
    }
    if let Some(t) = target_axes {
        if t.len() != f.axes.len() {
            return Err(Error::BadSpec(format!("expected {} target axes, got {}", f.axes.len(), t.len())));
        }
    }
    let mut axes = Vec::new();
    let mut plans = Vec::new();
    for (d, src) in f.axes.iter().enumerate() {
        let (g, plan) = axis_plan(src, &map.space[d], target_axes.map(|t| &t[d]), map.target)?;
        axes.push(g);
        plans.push(plan);
    }
    let times: Vec<f64> = f.times.iter().map(|&t| (map.time.forward)(t)).collect();
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonMonotoneMap);
    }
    let mut bound: f64 = 0.0;
    let mut values = Vec::with_capacity(f.values.len());
    for slice in &f.values {
        let (v, b) = match (f.axes.len(), plans.as_slice()) {
            (1, [p]) => resample_line(f.axes[0].nodes(), slice, p),
            (2, [p0, p1]) => {
                let (n0, n1) = (f.axes[0].len(), f.axes[1].len());
                // along axis 1 (contiguous rows) first
                let mut rows = Vec::new();
                let mut b1: f64 = 0.0;
                for i in 0..n0 {
                    let (r, b) = resample_line(f.axes[1].nodes(), &slice[i * n1..(i + 1) * n1], p1);
                    rows.push(r);
                    b1 = b1.max(b);
                }
                let m1 = rows[0].len();
                let mut cols = Vec::with_capacity(m1);
                let mut b0: f64 = 0.0;
                for j in 0..m1 {
                    let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    let (c, b) = resample_line(f.axes[0].nodes(), &col, p0);
                    cols.push(c);
                    b0 = b0.max(b);
                }
                let m0 = cols[0].len();
                let mut out = Vec::with_capacity(m0 * m1);
                for i in 0..m0 {
                    for c in &cols {
                        out.push(c[i]);
                    }
                }
                (out, b0 + b1)
            }
            _ => unreachable!("validated dimensions"),
        };
        bound = bound.max(b);
        values.push(v);
    }
    let mut out = GridFunction::new(map.target, axes, times, values)?;
    out.interp_error_bound = f.interp_error_bound + bound;
    Ok(out)
}

fn resample_line(xs: &[f64], ys: &[f64], plan: &Plan) -> (Vec<f64>, f64) {
    match plan {
        Plan::Permute(idx) => (idx.iter().map(|&k| ys[k]).collect(), 0.0),
        Plan::Interp(q) => {
            let c = MonotoneCubic::new(xs, ys);
            (q.iter().map(|&x| c.eval(x)).collect(), fourth_difference_bound(xs, ys))
        }
    }
}
