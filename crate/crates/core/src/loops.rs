//! Discretised loop space `C^inf(S^1, C^n x R)`.
//!
//! A [`LoopPoint`] holds a sampled loop `x(theta)` and the connection
//! coefficient `eta(theta)` of `A = d + eta dtheta`. The action is only
//! exposed through differences along paths, plus its lift relative to the
//! zero loop, which is canonical here because `C^n` is contractible.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, Result, VortexError};
use crate::space::{riemannian_pairing, symplectic_form, CircleSpace, Point};
use crate::spectral::PeriodicGrid;

/// Default sup-norm threshold between consecutive loops of a path.
pub const HOMOTOPY_THRESHOLD: f64 = 0.5;

/// Relative residual allowed in the linear fit of the action period.
pub const PERIOD_FIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopPoint {
    grid: PeriodicGrid,
    n: usize,
    /// Row-major samples: `x[k * n + j]` is coordinate `j` at `theta_k`.
    pub x: Vec<Complex64>,
    pub eta: Vec<f64>,
}

/// Tangent vector `(v, xi)` at a loop, on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentAtLoop {
    pub v: Vec<Complex64>,
    pub xi: Vec<f64>,
}

/// A loop in `U(1)`, `g(theta) = exp(i angle(theta))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeLoop {
    angles: Vec<f64>,
    winding: i64,
    // angle - winding * theta, unwrapped to a smooth periodic function
    periodic: Vec<f64>,
}

impl LoopPoint {
    pub fn new(grid: PeriodicGrid, n: usize, x: Vec<Complex64>, eta: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("loop.n", "dimension must be positive"));
        }
        if x.len() != grid.len() * n || eta.len() != grid.len() {
            return Err(invalid(
                "loop",
                format!(
                    "expected {} x samples and {} eta samples, got {} and {}",
                    grid.len() * n,
                    grid.len(),
                    x.len(),
                    eta.len()
                ),
            ));
        }
        Ok(Self { grid, n, x, eta })
    }

    /// The constant loop at `p` with constant `eta`.
    pub fn constant(grid: PeriodicGrid, p: &Point, eta: f64) -> Self {
        let n = p.0.len();
        let len = grid.len();
        let x = (0..len).flat_map(|_| p.0.iter().copied()).collect();
        Self { grid, n, x, eta: vec![eta; len] }
    }

    /// Samples `f(theta)` for the loop and `g(theta)` for the connection.
    pub fn from_fn(
        grid: PeriodicGrid,
        n: usize,
        mut f: impl FnMut(f64) -> Vec<Complex64>,
        mut g: impl FnMut(f64) -> f64,
    ) -> Result<Self> {
        let thetas = grid.thetas();
        let mut x = Vec::with_capacity(thetas.len() * n);
        for &t in &thetas {
            let z = f(t);
            if z.len() != n {
                return Err(VortexError::DimensionMismatch { expected: n, found: z.len() });
            }
            x.extend(z);
        }
        let eta = thetas.iter().map(|&t| g(t)).collect();
        Self::new(grid, n, x, eta)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n_theta(&self) -> usize {
        self.grid.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sample(&self, k: usize) -> &[Complex64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn check_same_grid(&self, other: &LoopPoint) -> Result<()> {
        if self.n_theta() != other.n_theta() {
            return Err(VortexError::GridMismatch { left: self.n_theta(), right: other.n_theta() });
        }
        if self.n != other.n {
            return Err(VortexError::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && self.eta.iter().all(|e| e.is_finite())
    }

    /// Spectral derivative of `x` in `theta`.
    pub fn dx_dtheta(&self) -> Vec<Complex64> {
        self.grid.derivative_complex(&self.x, self.n)
    }

    /// `self + s * t`.
    pub fn add_scaled(&self, t: &TangentAtLoop, s: f64) -> LoopPoint {
        let mut out = self.clone();
        for (a, b) in out.x.iter_mut().zip(&t.v) {
            *a += b * s;
        }
        for (a, b) in out.eta.iter_mut().zip(&t.xi) {
            *a += b * s;
        }
        out
    }

    /// `other - self` as a tangent vector.
    pub fn difference(&self, other: &LoopPoint) -> TangentAtLoop {
        TangentAtLoop {
            v: other.x.iter().zip(&self.x).map(|(a, b)| a - b).collect(),
            xi: other.eta.iter().zip(&self.eta).map(|(a, b)| a - b).collect(),
        }
    }

    /// Pointwise sup of `sqrt(|dx|^2 + deta^2)`.
    pub fn sup_distance(&self, other: &LoopPoint) -> f64 {
        (0..self.n_theta())
            .map(|k| {
                let dx: f64 = self.sample(k).iter().zip(other.sample(k)).map(|(a, b)| (a - b).norm_sqr()).sum();
                (dx + (self.eta[k] - other.eta[k]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// L2 distance `||other - self||`.
    pub fn l2_distance(&self, other: &LoopPoint) -> f64 {
        self.difference(other).norm(&self.grid)
    }

    /// Writes the columnar text format:
    /// a header line, then `theta re(x_1) im(x_1) ... eta` per sample.
    pub fn to_columnar(&self) -> String {
        let mut out = format!("# vortexflow-loop n_theta={} n={}\n", self.n_theta(), self.n);
        for k in 0..self.n_theta() {
            let _ = write!(out, "{:?}", self.grid.theta(k));
            for z in self.sample(k) {
                let _ = write!(out, " {:?} {:?}", z.re, z.im);
            }
            let _ = writeln!(out, " {:?}", self.eta[k]);
        }
        out
    }

    pub fn from_columnar(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(VortexError::Parse { line: 1, reason: "empty input".into() })?;
        let mut n_theta = None;
        let mut n = None;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("#") || fields.next() != Some("vortexflow-loop") {
            return Err(VortexError::Parse { line: 1, reason: "missing `# vortexflow-loop` header".into() });
        }
        for f in fields {
            let parse =
                |v: &str| v.parse::<usize>().map_err(|e| VortexError::Parse { line: 1, reason: format!("{f}: {e}") });
            if let Some(v) = f.strip_prefix("n_theta=") {
                n_theta = Some(parse(v)?);
            } else if let Some(v) = f.strip_prefix("n=") {
                n = Some(parse(v)?);
            } else {
                return Err(VortexError::Parse { line: 1, reason: format!("unknown header field `{f}`") });
            }
        }
        let (n_theta, n) = match (n_theta, n) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(VortexError::Parse { line: 1, reason: "header needs n_theta and n".into() }),
        };
        let grid = PeriodicGrid::new(n_theta)?;
        let mut x = Vec::with_capacity(n_theta * n);
        let mut eta = Vec::with_capacity(n_theta);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| VortexError::Parse { line: idx + 1, reason: e.to_string() })?;
            if values.len() != 2 * n + 2 {
                return Err(VortexError::Parse {
                    line: idx + 1,
                    reason: format!("expected {} columns, found {}", 2 * n + 2, values.len()),
                });
            }
            let k = eta.len();
            if k >= n_theta || values[0].to_bits() != grid.theta(k).to_bits() {
                return Err(VortexError::Parse {
                    line: idx + 1,
                    reason: "theta column does not match the grid".into(),
                });
            }
            for j in 0..n {
                x.push(Complex64::new(values[1 + 2 * j], values[2 + 2 * j]));
            }
            eta.push(values[2 * n + 1]);
        }
        if eta.len() != n_theta {
            return Err(VortexError::Parse {
                line: eta.len() + 2,
                reason: format!("expected {n_theta} samples, found {}", eta.len()),
            });
        }
        Self::new(grid, n, x, eta)
    }
}

impl TangentAtLoop {
    pub fn zeros(n_theta: usize, n: usize) -> Self {
        Self { v: vec![Complex64::new(0.0, 0.0); n_theta * n], xi: vec![0.0; n_theta] }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { v: self.v.iter().map(|z| z * s).collect(), xi: self.xi.iter().map(|e| e * s).collect() }
    }

    pub fn add(&self, other: &Self, s: f64) -> Self {
        Self {
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + b * s).collect(),
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a + b * s).collect(),
        }
    }

    /// Unweighted dot product of the real coordinates.
    fn raw_dot(&self, other: &Self) -> f64 {
        riemannian_pairing(&self.v, &other.v) + self.xi.iter().zip(&other.xi).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self, grid: &PeriodicGrid) -> f64 {
        (grid.spacing() * self.raw_dot(self)).sqrt()
    }

    /// Real coordinates `(re v_j, im v_j)` per sample, then `xi`.
    pub fn to_real(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.v.iter().flat_map(|z| [z.re, z.im]).collect();
        out.extend_from_slice(&self.xi);
        out
    }

    pub fn from_real(values: &[f64], n_theta: usize, n: usize) -> Self {
        let m = n_theta * n;
        Self {
            v: (0..m).map(|i| Complex64::new(values[2 * i], values[2 * i + 1])).collect(),
            xi: values[2 * m..2 * m + n_theta].to_vec(),
        }
    }
}

impl GaugeLoop {
    /// Builds a gauge loop from sampled angles. The total phase increment
    /// around the circle must equal `2 pi * winding`.
    pub fn new(grid: &PeriodicGrid, angles: Vec<f64>, winding: i64) -> Result<Self> {
        if angles.len() != grid.len() {
            return Err(VortexError::GridMismatch { left: grid.len(), right: angles.len() });
        }
        let n = angles.len();
        let increments: f64 = (0..n).map(|k| wrap_pi(angles[(k + 1) % n] - angles[k])).sum();
        let measured = (increments / TAU).round() as i64;
        if measured != winding {
            return Err(invalid(
                "gauge.winding",
                format!("angles wind {measured} times but winding {winding} was given"),
            ));
        }
        let mut periodic = Vec::with_capacity(n);
        let mut prev = angles[0];
        periodic.push(prev);
        for k in 1..n {
            let r = angles[k] - winding as f64 * grid.theta(k);
            prev += wrap_pi(r - prev);
            periodic.push(prev);
        }
        Ok(Self { angles, winding, periodic })
    }

    pub fn identity(grid: &PeriodicGrid) -> Self {
        Self { angles: vec![0.0; grid.len()], winding: 0, periodic: vec![0.0; grid.len()] }
    }

    /// `g(theta) = exp(i (winding * theta + f(theta)))` with `f` periodic.
    pub fn from_periodic(grid: &PeriodicGrid, winding: i64, f: impl Fn(f64) -> f64) -> Self {
        let periodic: Vec<f64> = grid.thetas().iter().map(|&t| f(t)).collect();
        let angles = grid.thetas().iter().zip(&periodic).map(|(&t, p)| winding as f64 * t + p).collect();
        Self { angles, winding, periodic }
    }

    /// Constant rotation by `angle`.
    pub fn constant(grid: &PeriodicGrid, angle: f64) -> Self {
        Self::from_periodic(grid, 0, |_| angle)
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn inverse(&self) -> Self {
        Self {
            angles: self.angles.iter().map(|a| -a).collect(),
            winding: -self.winding,
            periodic: self.periodic.iter().map(|a| -a).collect(),
        }
    }

    /// `g^{-1} dg/dtheta`, divided by `i`.
    pub fn log_derivative(&self, grid: &PeriodicGrid) -> Vec<f64> {
        grid.derivative(&self.periodic).into_iter().map(|d| d + self.winding as f64).collect()
    }
}

fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// `integral (omega(v1, J v2) + xi1 xi2) dtheta` by the trapezoid rule.
pub fn l2_inner(base: &LoopPoint, a: &TangentAtLoop, b: &TangentAtLoop) -> Result<f64> {
    let len = base.n_theta() * base.dim();
    for t in [a, b] {
        if t.v.len() != len || t.xi.len() != base.n_theta() {
            return Err(VortexError::GridMismatch { left: base.n_theta(), right: t.xi.len() });
        }
    }
    Ok(base.grid.spacing() * a.raw_dot(b))
}

/// `grad L (x, eta) = (J(dx/dtheta + eta~_x), mu(x))`.
///
/// With `J = i` and `eta~_x = -i eta w x` the loop part is
/// `i dx/dtheta + eta w x`.
pub fn grad_action(space: &CircleSpace, y: &LoopPoint) -> TangentAtLoop {
    assert_eq!(space.dim(), y.dim(), "loop dimension does not match the space");
    let n = y.dim();
    let dx = y.dx_dtheta();
    let weights = space.weights();
    let i = Complex64::new(0.0, 1.0);
    let mut v = Vec::with_capacity(dx.len());
    let mut xi = Vec::with_capacity(y.n_theta());
    for k in 0..y.n_theta() {
        let eta = y.eta[k];
        for j in 0..n {
            let idx = k * n + j;
            v.push(i * dx[idx] + y.x[idx] * (eta * weights[j] as f64));
        }
        xi.push(space.moment_of(y.sample(k)));
    }
    TangentAtLoop { v, xi }
}

/// Action lifted relative to the zero loop `(0, 0)`:
/// `-1/2 integral omega(x, dx/dtheta) + integral mu(x) eta`.
///
/// This equals [`action_relative`] along the straight path from the zero
/// loop to `y`.
pub fn action_from_origin(space: &CircleSpace, y: &LoopPoint) -> f64 {
    let n = y.dim();
    let dx = y.dx_dtheta();
    let mut area = 0.0;
    let mut coupling = 0.0;
    for k in 0..y.n_theta() {
        let xk = y.sample(k);
        area += symplectic_form(xk, &dx[k * n..(k + 1) * n]);
        coupling += space.moment_of(xk) * y.eta[k];
    }
    y.grid.spacing() * (-0.5 * area + coupling)
}

/// Action difference `L(end) - L(start)` along a sampled path.
///
/// The swept-area term is integrated over each straight segment with the
/// midpoint rule, which is exact because the integrand is affine along the
/// segment. The sign is fixed so that the differential of the result is
/// `l2_inner(grad_action, .)`, hence downward flows give negative values.
pub fn action_relative(space: &CircleSpace, path: &[LoopPoint], threshold: f64) -> Result<f64> {
    if path.len() < 2 {
        return Err(VortexError::PathTooShort(path.len()));
    }
    let first = &path[0];
    for (idx, pair) in path.windows(2).enumerate() {
        first.check_same_grid(&pair[1])?;
        let d = pair[0].sup_distance(&pair[1]);
        if d >= threshold {
            return Err(VortexError::HomotopyAmbiguity { index: idx, next: idx + 1, distance: d, threshold });
        }
    }
    let swept: f64 = path.windows(2).map(|pair| swept_area(&pair[0], &pair[1])).sum();
    let last = &path[path.len() - 1];
    Ok(first.grid().spacing() * swept + coupling(space, last) - coupling(space, first))
}

/// Action difference `L(b) - L(a)` along the straight segment, without the
/// homotopy check of [`action_relative`].
pub fn action_step(space: &CircleSpace, a: &LoopPoint, b: &LoopPoint) -> f64 {
    a.grid().spacing() * swept_area(a, b) + coupling(space, b) - coupling(space, a)
}

fn swept_area(a: &LoopPoint, b: &LoopPoint) -> f64 {
    let n = a.dim();
    let mid: Vec<Complex64> = a.x.iter().zip(&b.x).map(|(p, q)| (p + q) * 0.5).collect();
    let dmid = a.grid().derivative_complex(&mid, n);
    let delta: Vec<Complex64> = b.x.iter().zip(&a.x).map(|(p, q)| p - q).collect();
    (0..a.n_theta()).map(|k| symplectic_form(&dmid[k * n..(k + 1) * n], &delta[k * n..(k + 1) * n])).sum()
}

/// `integral mu(x) eta dtheta`.
fn coupling(space: &CircleSpace, y: &LoopPoint) -> f64 {
    let s: f64 = (0..y.n_theta()).map(|k| space.moment_of(y.sample(k)) * y.eta[k]).sum();
    y.grid().spacing() * s
}

/// `x_j -> g^{w_j} x_j`, `eta -> eta + g^{-1} dg/dtheta`.
pub fn gauge_apply(space: &CircleSpace, g: &GaugeLoop, y: &LoopPoint) -> Result<LoopPoint> {
    if g.angles.len() != y.n_theta() {
        return Err(VortexError::GridMismatch { left: y.n_theta(), right: g.angles.len() });
    }
    let n = y.dim();
    let shift = g.log_derivative(y.grid());
    let mut out = y.clone();
    for k in 0..y.n_theta() {
        for (j, &w) in space.weights().iter().enumerate() {
            out.x[k * n + j] *= Complex64::from_polar(1.0, w as f64 * g.angles[k]);
        }
        out.eta[k] += shift[k];
    }
    Ok(out)
}

/// Holonomy angle `integral eta dtheta` reduced to `[0, 2 pi)`.
pub fn holonomy(y: &LoopPoint) -> f64 {
    let a = y.grid.integrate(&y.eta).rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Measured action period.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodFit {
    /// Positive period, the magnitude of the fitted slope.
    pub period: f64,
    /// Fitted slope of the increment against the winding.
    pub slope: f64,
    /// `(winding, L(g_k y) - L(y))` for `k = 0..=max_winding`.
    pub increments: Vec<(i64, f64)>,
    /// Largest fit residual relative to the largest increment.
    pub relative_residual: f64,
}

/// Measures the action period by following straight paths from `y` to
/// `g_k . y` with `g_k = exp(i k theta)`.
pub fn action_period_probe(space: &CircleSpace, y: &LoopPoint, max_winding: i64) -> Result<PeriodFit> {
    if max_winding < 1 {
        return Err(invalid("period.max_winding", "must be at least 1"));
    }
    let mut increments = Vec::new();
    for k in 0..=max_winding {
        let g = GaugeLoop::from_periodic(y.grid(), k, |_| 0.0);
        let target = gauge_apply(space, &g, y)?;
        let path = straight_path(y, &target, HOMOTOPY_THRESHOLD * 0.5);
        let inc = action_relative(space, &path, HOMOTOPY_THRESHOLD)?;
        increments.push((k, inc));
    }
    // least squares for inc = a + b k
    let m = increments.len() as f64;
    let sk: f64 = increments.iter().map(|(k, _)| *k as f64).sum();
    let skk: f64 = increments.iter().map(|(k, _)| (*k as f64).powi(2)).sum();
    let sv: f64 = increments.iter().map(|(_, v)| v).sum();
    let skv: f64 = increments.iter().map(|(k, v)| *k as f64 * v).sum();
    let slope = (m * skv - sk * sv) / (m * skk - sk * sk);
    let intercept = (sv - slope * sk) / m;
    let scale = increments.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let relative_residual =
        increments.iter().map(|(k, v)| (v - intercept - slope * *k as f64).abs() / scale).fold(0.0, f64::max);
    if relative_residual > PERIOD_FIT_TOL {
        return Err(VortexError::NonlinearPeriod { residual: relative_residual });
    }
    Ok(PeriodFit { period: slope.abs(), slope, increments, relative_residual })
}

/// Straight-line interpolation subdivided so consecutive loops stay within
/// `max_step` in sup norm.
pub fn straight_path(a: &LoopPoint, b: &LoopPoint, max_step: f64) -> Vec<LoopPoint> {
    let d = a.sup_distance(b);
    let steps = ((d / max_step).ceil() as usize).max(1);
    let delta = a.difference(b);
    (0..=steps).map(|s| a.add_scaled(&delta, s as f64 / steps as f64)).collect()
}
