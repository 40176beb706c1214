//! Shape-preserving cubic interpolation and finite-difference weights.

/// Fornberg weights for the `m`-th derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Start index of a `width`-point stencil centred on `i` and kept inside `0..n`.
pub(crate) fn stencil_start(i: usize, n: usize, width: usize) -> usize {
    let half = width / 2;
    i.saturating_sub(half).min(n - width)
}

/// Piecewise cubic Hermite interpolant with fourth-order derivative estimates,
/// limited so that monotone data stay monotone and local extrema are not
/// overshot.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` strictly increasing, at least two points.
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        assert!(xs.len() == ys.len() && xs.len() >= 2);
        let n = xs.len();
        let secant: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let width = n.min(5);
        let mut ds = vec![0.0; n];
        for i in 0..n {
            let s = stencil_start(i, n, width);
            let w = fd_weights(xs[i], &xs[s..s + width], 1);
            ds[i] = w.iter().zip(&ys[s..s + width]).map(|(w, y)| w * y).sum();
        }
        // Fritsch–Carlson style limiting
        for i in 0..n {
            let left = if i > 0 { Some(secant[i - 1]) } else { None };
            let right = if i < n - 1 { Some(secant[i]) } else { None };
            let (lo, hi) = match (left, right) {
                (Some(l), Some(r)) => (l, r),
                (Some(l), None) => (l, l),
                (None, Some(r)) => (r, r),
                (None, None) => unreachable!(),
            };
            if lo * hi <= 0.0 || ds[i] * lo <= 0.0 {
                ds[i] = 0.0;
                continue;
            }
            let cap = 3.0 * lo.abs().min(hi.abs());
            if ds[i].abs() > cap {
                ds[i] = cap * ds[i].signum();
            }
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), ds }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.ys[k],
            Err(k) => k - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.ds[k] + h01 * self.ys[k + 1] + h11 * h * self.ds[k + 1]
    }
}

/// Heuristic interpolation error bound `max|f[x_k..x_{k+4}]|·h_max⁴`, i.e. a
/// generous multiple of the leading Hermite error term.
pub fn fourth_difference_bound(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 5 {
        return 0.0;
    }
    let h = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut dd_max: f64 = 0.0;
    for s in 0..=n - 5 {
        let mut dd: Vec<f64> = ys[s..s + 5].to_vec();
        for order in 1..5 {
            for k in 0..5 - order {
                dd[k] = (dd[k + 1] - dd[k]) / (xs[s + k + order] - xs[s + k]);
            }
        }
        dd_max = dd_max.max(dd[0].abs());
    }
    dd_max * h.powi(4)
}

/// Cubic Lagrange interpolation on the four nodes nearest to `x`.
pub fn lagrange4(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    assert!(n >= 4 && ys.len() == n);
    let k = xs.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
    let s = k.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for i in s..s + 4 {
        let mut li = 1.0;
        for j in s..s + 4 {
            if i != j {
                li *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += li * ys[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_matches_known_stencils() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reproduces_cubics_and_is_fourth_order() {
        let f = |x: f64| (2.0 * x).exp();
        let mut prev = 0.0;
        for (level, n) in [21usize, 41, 81].into_iter().enumerate() {
            let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let c = MonotoneCubic::new(&xs, &ys);
            let err = (0..1000).map(|k| {
                let x = (k as f64 + 0.5) / 1000.0;
                (c.eval(x) - f(x)).abs()
            }).fold(0.0, f64::max);
            assert!(err <= fourth_difference_bound(&xs, &ys));
            if level > 0 {
                assert!((prev / err).log2() > 3.5, "order {}", (prev / err).log2());
            }
            prev = err;
        }
    }

    #[test]
    fn no_overshoot_on_step() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x < 10.0 { 0.0 } else { 1.0 }).collect();
        let c = MonotoneCubic::new(&xs, &ys);
        for k in 0..1900 {
            let v = c.eval(k as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn lagrange_exact_on_cubics() {
        let xs = [0.0, 0.3, 0.7, 1.2, 2.0, 2.1];
        let f = |x: f64| 1.0 - x + 2.0 * x * x * x;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for x in [0.0, 0.1, 0.5, 1.0, 1.9, 2.05, 2.1] {
            assert!((lagrange4(&xs, &ys, x) - f(x)).abs() < 1e-12);
        }
    }
}
