//! Grids, coordinate frames and sampled grid functions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 16;

/// Coordinate frame of a sampled function. Spatial coordinates come first,
/// time last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum Frame {
    /// `(S, v, t)`.
    SpotVar,
    /// `(x, v, t)` with `x = ln S`.
    LogSpotVar,
    /// `(v, t)`: spot-independent functions of variance and calendar time.
    VarTime,
    /// `(x, τ)` with `x = 4v/σ²`, `τ = T − t`.
    FellerX,
    /// `(y, τ)` with `y = 1/x`.
    InvY,
    /// `(y, τ)` for `u_τ = a y^{2α} u_yy`.
    Cev { alpha: f64, a: f64 },
}

impl Frame {
    pub fn spatial_dims(self) -> usize {
        match self {
            Frame::SpotVar | Frame::LogSpotVar => 2,
            _ => 1,
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Frame::SpotVar => &["S", "v", "t"],
            Frame::LogSpotVar => &["x", "v", "t"],
            Frame::VarTime => &["v", "t"],
            Frame::FellerX => &["x", "tau"],
            Frame::InvY | Frame::Cev { .. } => &["y", "tau"],
        }
    }

    /// Parses `spot_var`, `log_spot_var`, `var_time`, `feller_x`, `inv_y`
    /// or `cev:<alpha>:<a>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::BadSpec(format!("unknown frame '{s}'"));
        Ok(match s {
            "spot_var" => Frame::SpotVar,
            "log_spot_var" => Frame::LogSpotVar,
            "var_time" => Frame::VarTime,
            "feller_x" => Frame::FellerX,
            "inv_y" => Frame::InvY,
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                if parts.len() != 3 || parts[0] != "cev" {
                    return Err(bad());
                }
                let alpha = parts[1].parse().map_err(|_| bad())?;
                let a = parts[2].parse().map_err(|_| bad())?;
                Frame::Cev { alpha, a }
            }
        })
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::SpotVar => write!(f, "spot_var"),
            Frame::LogSpotVar => write!(f, "log_spot_var"),
            Frame::VarTime => write!(f, "var_time"),
            Frame::FellerX => write!(f, "feller_x"),
            Frame::InvY => write!(f, "inv_y"),
            Frame::Cev { alpha, a } => write!(f, "cev:{alpha}:{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndKind {
    /// The end sits on the degeneracy locus of the equation.
    Degenerate,
    FarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    nodes: Vec<f64>,
    pub frame: Frame,
    pub left: EndKind,
    pub right: EndKind,
}

impl Grid1D {
    pub fn new(nodes: Vec<f64>, frame: Frame, left: EndKind, right: EndKind) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::BadSpec(format!("need at least {MIN_NODES} nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadSpec("non-finite node".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadSpec("nodes must be strictly increasing".into()));
        }
        if right == EndKind::Degenerate {
            return Err(Error::BadSpec("only the left end can be degenerate".into()));
        }
        Ok(Self { nodes, frame, left, right })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the node equal to `x` (exact match), if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&n| n == x)
    }

    /// Nodes with `k` entries halved: every cell is split at its midpoint.
    pub fn refined(&self) -> Result<Self> {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.max());
        Self::new(nodes, self.frame, self.left, self.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// Ratio of the uniform cell width to the first cell at the clustered
    /// end; 1 gives a uniform grid.
    pub stretch: f64,
    pub frame: Frame,
    pub left: EndKind,
    pub right: EndKind,
}

impl GridSpec {
    /// Grid in the `VarTime` frame; the left end is marked degenerate when it
    /// sits at zero.
    pub fn new(min: f64, max: f64, n: usize, stretch: f64) -> Self {
        let left = if min == 0.0 { EndKind::Degenerate } else { EndKind::FarField };
        Self { min, max, n, stretch, frame: Frame::VarTime, left, right: EndKind::FarField }
    }

    pub fn uniform(min: f64, max: f64, n: usize) -> Self {
        Self::new(min, max, n, 1.0)
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_ends(mut self, left: EndKind, right: EndKind) -> Self {
        self.left = left;
        self.right = right;
        self
    }

    /// Same span with every cell halved.
    pub fn refined(&self) -> Self {
        Self { n: 2 * (self.n - 1) + 1, ..*self }
    }

    /// Parses `min:max:n` or `min:max:n:stretch`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::BadSpec(format!("grid spec '{s}' is not min:max:n[:stretch]"));
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let stretch = match parts.get(3) {
            Some(p) => p.trim().parse().map_err(|_| bad())?,
            None => 1.0,
        };
        Ok(Self::new(min, max, n, stretch))
    }
}

/// Uniform (`stretch = 1`) or geometric grid. Geometric grids cluster toward
/// the degenerate end, or the left end when neither end is degenerate, with
/// a constant ratio between adjacent spacings.
pub fn build_grid(spec: &GridSpec) -> Result<Grid1D> {
    if !(spec.min < spec.max) || !spec.min.is_finite() || !spec.max.is_finite() {
        return Err(Error::BadSpec(format!("need min < max, got [{}, {}]", spec.min, spec.max)));
    }
    if spec.n < MIN_NODES {
        return Err(Error::BadSpec(format!("need n >= {MIN_NODES}, got {}", spec.n)));
    }
    if !(spec.stretch >= 1.0) || !spec.stretch.is_finite() {
        return Err(Error::BadSpec(format!("stretch must be >= 1, got {}", spec.stretch)));
    }
    let cells = spec.n - 1;
    let len = spec.max - spec.min;
    let mut nodes = Vec::with_capacity(spec.n);
    if spec.stretch == 1.0 {
        for k in 0..spec.n {
            nodes.push(spec.min + len * k as f64 / cells as f64);
        }
    } else {
        let ratio = geometric_ratio(cells, spec.stretch);
        let first = len / (cells as f64 * spec.stretch);
        let mut offsets = Vec::with_capacity(spec.n);
        offsets.push(0.0);
        let mut h = first;
        let mut acc = 0.0;
        for _ in 0..cells {
            acc += h;
            offsets.push(acc);
            h *= ratio;
        }
        // normalise so the last node lands exactly on max
        let scale = len / acc;
        let cluster_right = spec.right == EndKind::Degenerate;
        for k in 0..spec.n {
            let x = if cluster_right {
                spec.max - offsets[cells - k] * scale
            } else {
                spec.min + offsets[k] * scale
            };
            nodes.push(x);
        }
    }
    nodes[0] = spec.min;
    nodes[cells] = spec.max;
    Grid1D::new(nodes, spec.frame, spec.left, spec.right)
}

/// Solves `(q^m − 1)/(q − 1) = m·stretch` for `q > 1`.
fn geometric_ratio(m: usize, stretch: f64) -> f64 {
    let target = m as f64 * stretch;
    let sum = |q: f64| -> f64 {
        if (q - 1.0).abs() < 1e-14 {
            m as f64
        } else {
            (q.powi(m as i32) - 1.0) / (q - 1.0)
        }
    };
    let mut lo = 1.0;
    let mut hi = target.powf(1.0 / (m as f64 - 1.0)).max(1.0) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Three-point weights for `u'` at a node with left spacing `hm` and right
/// spacing `hp`, ordered (left, centre, right).
pub(crate) fn d1_weights(hm: f64, hp: f64) -> [f64; 3] {
    [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
}

/// Three-point weights for `u''`.
pub(crate) fn d2_weights(hm: f64, hp: f64) -> [f64; 3] {
    [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))]
}

/// Values of a function on a tensor grid, optionally over several time
/// slices. Each slice is stored with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub frame: Frame,
    pub axes: Vec<Grid1D>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Heuristic bound on the error introduced by resampling, 0 when the
    /// values were never interpolated.
    pub interp_error_bound: f64,
}

impl GridFunction {
    pub fn new(frame: Frame, axes: Vec<Grid1D>, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let gf = Self { frame, axes, times, values, interp_error_bound: 0.0 };
        gf.validate()?;
        Ok(gf)
    }

    /// Samples `f(coords, t)` on the grid at each time.
    pub fn sample<F>(frame: Frame, axes: Vec<Grid1D>, times: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let mut values = Vec::with_capacity(times.len());
        let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        for &t in &times {
            let mut slice = Vec::with_capacity(dims.iter().product());
            match axes.len() {
                1 => {
                    for &x in axes[0].nodes() {
                        slice.push(f(&[x], t));
                    }
                }
                2 => {
                    for &x in axes[0].nodes() {
                        for &y in axes[1].nodes() {
                            slice.push(f(&[x, y], t));
                        }
                    }
                }
                d => return Err(Error::BadSpec(format!("unsupported dimension {d}"))),
            }
            values.push(slice);
        }
        Self::new(frame, axes, times, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() != self.frame.spatial_dims() {
            return Err(Error::FrameMismatch {
                expected: format!("{} spatial axes for {}", self.frame.spatial_dims(), self.frame),
                found: format!("{} axes", self.axes.len()),
            });
        }
        if self.times.len() != self.values.len() {
            return Err(Error::BadSpec("one value slice per time required".into()));
        }
        let n = self.slice_len();
        for s in &self.values {
            if s.len() != n {
                return Err(Error::BadSpec(format!("slice length {} != grid size {n}", s.len())));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::BadSpec("grid function values must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn slice_len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn dims(&self) -> (usize, usize) {
        match self.axes.len() {
            1 => (self.axes[0].len(), 1),
            _ => (self.axes[0].len(), self.axes[1].len()),
        }
    }

    /// Value at node `(i, j)` of slice `k`; `j` is ignored for 1-D functions.
    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        let (_, n1) = self.dims();
        self.values[k][i * n1 + j]
    }

    pub fn last_slice(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Pointwise `self + scale·other`; frames and grids must agree.
    pub fn axpy(&self, scale: f64, other: &GridFunction) -> Result<GridFunction> {
        if self.frame != other.frame {
            return Err(Error::FrameMismatch { expected: self.frame.to_string(), found: other.frame.to_string() });
        }
        if self.axes != other.axes || self.times != other.times {
            return Err(Error::BadSpec("grid functions live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + scale * y).collect())
            .collect();
        Ok(GridFunction { values, interp_error_bound: self.interp_error_bound + scale.abs() * other.interp_error_bound, ..self.clone() })
    }
}
