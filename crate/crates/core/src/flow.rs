//! Downward gradient flow of the action. In temporal gauge this is the
//! symplectic vortex equation on the cylinder
//! `du/dt + J(du/dtheta + eta~_u) = 0`, `d eta/dt + mu(u) = 0`.
//!
//! The linearised loop part `dx/dt = -i dx/dtheta` grows like `e^{k t}` on
//! Fourier mode `k`, so the forward problem is only well posed on data
//! without positive modes. The discrete derivative sends constants to
//! exactly zero, which keeps theta-independent loops theta-independent to
//! the last bit; long flows are run on that class, started on the stable
//! manifold of a critical loop with [`stable_manifold_seed`].

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::critical::{critical_datum, enumerate_sectors, CriticalDatum};
use crate::error::{invalid, Result, VortexError};
use crate::loops::{
    action_from_origin, action_relative, action_step, grad_action, straight_path, LoopPoint, TangentAtLoop,
    HOMOTOPY_THRESHOLD,
};
use crate::space::{CircleSpace, Point};
use crate::spectral::PeriodicGrid;

/// `grad_norm` below which a trajectory counts as converged.
pub const CONVERGENCE_FLOOR: f64 = 1e-9;
/// Largest action increase tolerated over one step.
pub const MONOTONE_TOL: f64 = 1e-10;
/// State sup norm treated as a blow-up.
pub const EXPLOSION_NORM: f64 = 1e8;
/// Largest distance at which a limit is matched to a critical datum.
pub const LIMIT_MATCH_DISTANCE: f64 = 0.5;
/// Samples of `grad_norm` below this are ignored by decay fits.
pub const ARITHMETIC_FLOOR: f64 = 1e-12;
pub const DECAY_MIN_SAMPLES: usize = 20;
pub const DECAY_MAX_RESIDUAL: f64 = 0.1;
/// Samples with `|Delta L|` below this are dropped by the crucial scan.
pub const ZERO_ACTION_GUARD: f64 = 1e-14;
pub const MAX_SCAN_EPS: f64 = 0.2;
/// Highest Fourier mode of random scan directions.
pub const SCAN_MAX_MODE: i64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub floor: f64,
    /// Keep every `record_stride`-th step, plus the last one.
    pub record_stride: usize,
    pub monotone_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { floor: CONVERGENCE_FLOOR, record_stride: 1, monotone_tol: MONOTONE_TOL }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub record_stride: usize,
    pub times: Vec<f64>,
    pub states: Vec<LoopPoint>,
    pub grad_norm: Vec<f64>,
    /// `L(y(0)) - L(y(t))`, summed step by step along the flow.
    pub action_drop: Vec<f64>,
    /// Yang-Mills-Higgs energy of the swept cylinder on `[0, t]`.
    pub ymh_energy: Vec<f64>,
    /// Trapezoid integral of `grad_norm^2` over every step.
    pub grad_sq_integral: Vec<f64>,
    pub converged: bool,
}

impl Trajectory {
    fn start(y: LoopPoint, grad_norm: f64, dt: f64, record_stride: usize) -> Self {
        Self {
            dt,
            record_stride,
            times: vec![0.0],
            states: vec![y],
            grad_norm: vec![grad_norm],
            action_drop: vec![0.0],
            ymh_energy: vec![0.0],
            grad_sq_integral: vec![0.0],
            converged: false,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &LoopPoint {
        self.states.last().expect("trajectory has a start")
    }

    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norm.last().expect("trajectory has a start")
    }

    /// `L(y(0)) - L(y(T))` from the closed-form action at the two ends.
    pub fn topological_energy(&self, space: &CircleSpace) -> f64 {
        action_from_origin(space, &self.states[0]) - action_from_origin(space, self.final_state())
    }

    /// Trapezoid sum of `grad_norm^2` over recorded samples in `[t0, t1]`.
    pub fn energy_between(&self, t0: f64, t1: f64) -> f64 {
        let mut e = 0.0;
        for i in 1..self.len() {
            let (a, b) = (self.times[i - 1], self.times[i]);
            if a >= t0 && b <= t1 {
                e += 0.5 * (b - a) * (self.grad_norm[i - 1].powi(2) + self.grad_norm[i].powi(2));
            }
        }
        e
    }

    /// `t,grad_norm,action_drop,ymh_energy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,grad_norm,action_drop,ymh_energy\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                self.times[i], self.grad_norm[i], self.action_drop[i], self.ymh_energy[i]
            ));
        }
        out
    }
}

/// `dt` bound for the explicit scheme, `0.5 / (highest resolved mode)`.
pub fn stability_bound(grid: &PeriodicGrid) -> f64 {
    0.5 / (grid.len() / 2 - 1) as f64
}

fn check_dt(grid: &PeriodicGrid, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("flow.dt", format!("must be positive and finite, found {dt}")));
    }
    let bound = stability_bound(grid);
    if dt > bound {
        return Err(VortexError::StepTooLarge { dt, bound });
    }
    Ok(())
}

fn state_sup(y: &LoopPoint) -> f64 {
    let x = y.x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let e = y.eta.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let s = x.max(e);
    if y.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

fn rk4(space: &CircleSpace, y: &LoopPoint, dt: f64) -> LoopPoint {
    let k1 = grad_action(space, y);
    let k2 = grad_action(space, &y.add_scaled(&k1, -0.5 * dt));
    let k3 = grad_action(space, &y.add_scaled(&k2, -0.5 * dt));
    let k4 = grad_action(space, &y.add_scaled(&k3, -dt));
    let incr = k1.add(&k2, 2.0).add(&k3, 2.0).add(&k4, 1.0);
    y.add_scaled(&incr, -dt / 6.0)
}

fn checked_step(space: &CircleSpace, y: &LoopPoint, dt: f64, time: f64) -> Result<LoopPoint> {
    let next = rk4(space, y, dt);
    let norm = state_sup(&next);
    if norm > EXPLOSION_NORM {
        return Err(VortexError::FlowDiverged { time, norm });
    }
    Ok(next)
}

/// One RK4 step of `dy/dt = -grad L(y)`.
pub fn flow_step(space: &CircleSpace, y: &LoopPoint, dt: f64) -> Result<LoopPoint> {
    check_dt(y.grid(), dt)?;
    checked_step(space, y, dt, dt)
}

/// Integrates the flow up to `t_end`, stopping early once `grad_norm`
/// drops below `opts.floor`.
pub fn integrate(space: &CircleSpace, y0: &LoopPoint, t_end: f64, dt: f64, opts: &FlowOptions) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(invalid("flow.t_end", format!("must be finite and non-negative, found {t_end}")));
    }
    if opts.record_stride == 0 {
        return Err(invalid("flow.record_stride", "must be at least 1"));
    }
    check_dt(y0.grid(), dt)?;
    let grid = y0.grid().clone();
    let mut y = y0.clone();
    let mut g = grad_action(space, &y).norm(&grid);
    let mut traj = Trajectory::start(y.clone(), g, dt, opts.record_stride);
    if g < opts.floor {
        traj.converged = true;
        return Ok(traj);
    }
    let steps = (t_end / dt).round() as usize;
    let (mut drop, mut ymh, mut gsq) = (0.0, 0.0, 0.0);
    for step in 1..=steps {
        let t = step as f64 * dt;
        let next = checked_step(space, &y, dt, t)?;
        let delta = action_step(space, &y, &next);
        if delta > opts.monotone_tol {
            return Err(VortexError::NonMonotoneAction { time: t, increase: delta });
        }
        let g_next = grad_action(space, &next).norm(&grid);
        let chord = y.difference(&next);
        let mid = y.add_scaled(&chord, 0.5);
        let speed = chord.norm(&grid) / dt;
        let w = grad_action(space, &mid).norm(&grid);
        ymh += 0.5 * dt * (speed * speed + w * w);
        drop -= delta;
        gsq += 0.5 * dt * (g * g + g_next * g_next);
        y = next;
        g = g_next;
        let done = g < opts.floor;
        if step % opts.record_stride == 0 || done || step == steps {
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.grad_norm.push(g);
            traj.action_drop.push(drop);
            traj.ymh_energy.push(ymh);
            traj.grad_sq_integral.push(gsq);
        }
        if done {
            traj.converged = true;
            break;
        }
    }
    Ok(traj)
}

/// `e^x - 1 - x` without cancellation near zero.
fn exp_remainder(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..10 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// The theta-independent loop `(p, eta)` on the stable manifold of the
/// zero level.
///
/// On constant loops the flow reduces to `x_j = p_j e^{w_j s}`,
/// `s' = -eta`, `s'' = mu`, which conserves `eta^2/2 - V(s)` with
/// `V(s) = 1/4 sum |p_j|^2 e^{2 w_j s} - tau s`. The returned `eta` puts the
/// orbit on the branch ending at the minimum `s*` of `V`.
pub fn stable_manifold_seed(space: &CircleSpace, grid: &PeriodicGrid, p: &Point) -> Result<LoopPoint> {
    space.check_point(p)?;
    let r2: Vec<f64> = p.0.iter().map(|z| z.norm_sqr()).collect();
    if r2.iter().all(|&r| r == 0.0) {
        return Err(invalid("flow.seed", "the seed point must be nonzero"));
    }
    let w: Vec<f64> = space.weights().iter().map(|&w| w as f64).collect();
    let tau = space.tau();
    let mu = |s: f64| -> f64 { 0.5 * w.iter().zip(&r2).map(|(w, r)| w * r * (2.0 * w * s).exp()).sum::<f64>() - tau };
    let dmu = |s: f64| -> f64 { w.iter().zip(&r2).map(|(w, r)| w * w * r * (2.0 * w * s).exp()).sum() };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mu(lo) > 0.0 {
        lo *= 2.0;
    }
    while mu(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut s = 0.0_f64.clamp(lo, hi);
    for _ in 0..200 {
        let f = mu(s);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = s - f / dmu(s);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == s {
            break;
        }
        s = next;
    }
    let dv: f64 = w.iter().zip(&r2).map(|(w, r)| 0.25 * r * (2.0 * w * s).exp() * exp_remainder(-2.0 * w * s)).sum();
    let eta = -s.signum() * (2.0 * dv.max(0.0)).sqrt();
    Ok(LoopPoint::constant(grid.clone(), p, eta))
}

#[derive(Clone, Debug)]
pub struct LimitMatch {
    pub datum: CriticalDatum,
    pub distance: f64,
}

/// Nearest critical datum to the end of a converged trajectory.
pub fn limit_point(space: &CircleSpace, traj: &Trajectory) -> Result<LimitMatch> {
    if !traj.converged {
        return Err(VortexError::NotConverged { grad_norm: traj.final_grad_norm() });
    }
    nearest_critical(space, traj.final_state())
}

/// Nearest point of `{ (1/2) sum w_j |p_j|^2 = tau }` to `q`, or `None`
/// when `q` is zero up to roundoff.
fn nearest_on_level(space: &CircleSpace, q: &Point) -> Option<Point> {
    if q.norm() <= 1e-10 {
        return None;
    }
    let w: Vec<f64> = space.weights().iter().map(|&w| w as f64).collect();
    let wmax = q.0.iter().zip(&w).filter(|(z, _)| z.norm_sqr() > 0.0).map(|(_, &w)| w).fold(0.0, f64::max);
    let h = |lam: f64| -> f64 {
        0.5 * q.0.iter().zip(&w).map(|(z, w)| w * z.norm_sqr() / (1.0 + lam * w).powi(2)).sum::<f64>() - space.tau()
    };
    // h decreases from +inf at -1/wmax to -tau at +inf
    let (mut lo, mut hi) = if h(0.0) > 0.0 { (0.0, 1.0) } else { (-1.0 / wmax, 0.0) };
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    let p = Point(q.0.iter().zip(&w).map(|(z, w)| if z.norm_sqr() > 0.0 { z / (1.0 + lam * w) } else { *z }).collect());
    let scale = (space.tau() / (space.moment_map(&p).0 + space.tau())).sqrt();
    Some(Point(p.0.iter().map(|z| z * scale).collect()))
}

/// Nearest critical datum to `y` over all sectors, minimising over the
/// constant gauge rotations and theta shifts that act on each sector.
pub fn nearest_critical(space: &CircleSpace, y: &LoopPoint) -> Result<LimitMatch> {
    let grid = y.grid();
    let n = y.dim();
    let nt = y.n_theta();
    let thetas = grid.thetas();
    let mean_eta = grid.integrate(&y.eta) / TAU;
    let mut best: Option<LimitMatch> = None;
    for sector in enumerate_sectors(space) {
        let eta0 = sector.eta0() + (mean_eta - sector.eta0()).round();
        let mut proj = Point::zeros(n);
        for &j in &sector.fixed_dims {
            let w = space.weights()[j] as f64;
            let s: Complex64 =
                (0..nt).map(|k| Complex64::from_polar(1.0, -w * eta0 * thetas[k]) * y.x[k * n + j]).sum();
            proj.0[j] = s / nt as f64;
        }
        let Some(base) = nearest_on_level(space, &proj) else { continue };
        let datum = critical_datum(space, &sector, base, eta0, grid)?;
        let distance = y.l2_distance(&datum.loop_point);
        if best.as_ref().is_none_or(|b| distance < b.distance) {
            best = Some(LimitMatch { datum, distance });
        }
    }
    match best {
        Some(m) if m.distance <= LIMIT_MATCH_DISTANCE => Ok(m),
        Some(m) => Err(VortexError::Unclassified { distance: m.distance }),
        None => Err(VortexError::Unclassified { distance: f64::INFINITY }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub residual: f64,
}

/// Log-linear fit of `grad_norm` over the last `tail_fraction` of the
/// recorded samples.
pub fn decay_fit(traj: &Trajectory, tail_fraction: f64) -> Result<DecayFit> {
    fit_exponential_tail(&traj.times, &traj.grad_norm, tail_fraction)
}

/// Fits `values ~ C e^{-rate t}` over the tail of a series.
pub fn fit_exponential_tail(times: &[f64], values: &[f64], tail_fraction: f64) -> Result<DecayFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(invalid("flow.tail_fraction", format!("must lie in (0, 1], found {tail_fraction}")));
    }
    let len = times.len().min(values.len());
    let start = ((1.0 - tail_fraction) * len as f64).floor() as usize;
    let pts: Vec<(f64, f64)> =
        (start..len).filter(|&i| values[i] > ARITHMETIC_FLOOR).map(|i| (times[i], values[i].ln())).collect();
    if pts.len() < DECAY_MIN_SAMPLES {
        return Err(VortexError::TooFewSamples { needed: DECAY_MIN_SAMPLES, found: pts.len() });
    }
    let m = pts.len() as f64;
    let st: f64 = pts.iter().map(|p| p.0).sum();
    let sl: f64 = pts.iter().map(|p| p.1).sum();
    let (tm, lm) = (st / m, sl / m);
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let slope = stl / stt;
    let residual = (pts.iter().map(|p| (p.1 - lm - slope * (p.0 - tm)).powi(2)).sum::<f64>() / m).sqrt();
    if !residual.is_finite() || residual > DECAY_MAX_RESIDUAL || slope >= 0.0 {
        return Err(VortexError::NotAsymptotic { residual, limit: DECAY_MAX_RESIDUAL });
    }
    Ok(DecayFit { rate: -slope, window: (pts[0].0, pts[pts.len() - 1].0), residual })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrucialScan {
    pub eps: f64,
    pub samples: usize,
    pub rng_seed: u64,
    pub min_ratio: f64,
    /// Samples dropped by the `0/0` guard.
    pub excluded: usize,
    /// Samples with a non-positive ratio.
    pub nonpositive: usize,
}

/// Lower bound on `||grad||^2 / |Delta L|` from the quadratic model at a
/// Morse-Bott critical point with normal spectral gap `gap`.
pub fn quadratic_prediction(gap: f64) -> f64 {
    2.0 * gap
}

/// Discrete `W^{1,2}` norm of a tangent vector.
pub fn sobolev_norm(t: &TangentAtLoop, grid: &PeriodicGrid) -> f64 {
    let n = t.v.len() / grid.len();
    let dv = grid.derivative_complex(&t.v, n);
    let dxi = grid.derivative(&t.xi);
    let d = TangentAtLoop { v: dv, xi: dxi };
    (t.norm(grid).powi(2) + d.norm(grid).powi(2)).sqrt()
}

/// `||grad L(y)||^2 / |L(y) - L(crit)|`, or `None` under the `0/0` guard.
pub fn crucial_ratio(space: &CircleSpace, crit: &LoopPoint, y: &LoopPoint) -> Result<Option<f64>> {
    let path = straight_path(crit, y, 0.5 * HOMOTOPY_THRESHOLD);
    let delta = action_relative(space, &path, HOMOTOPY_THRESHOLD)?;
    if delta.abs() < ZERO_ACTION_GUARD {
        return Ok(None);
    }
    let g = grad_action(space, y).norm(y.grid());
    Ok(Some(g * g / delta.abs()))
}

fn random_direction(rng: &mut ChaCha8Rng, grid: &PeriodicGrid, n: usize) -> TangentAtLoop {
    let thetas = grid.thetas();
    let mut v = vec![Complex64::new(0.0, 0.0); grid.len() * n];
    for j in 0..n {
        for m in -SCAN_MAX_MODE..=SCAN_MAX_MODE {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for (k, &t) in thetas.iter().enumerate() {
                v[k * n + j] += c * Complex64::from_polar(1.0, m as f64 * t);
            }
        }
    }
    let mut xi = vec![rng.random_range(-1.0..1.0); grid.len()];
    for m in 1..=SCAN_MAX_MODE {
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for (k, &t) in thetas.iter().enumerate() {
            xi[k] += a * (m as f64 * t).cos() + b * (m as f64 * t).sin();
        }
    }
    TangentAtLoop { v, xi }
}

/// Minimum of [`crucial_ratio`] over `samples` random loops in the
/// `W^{1,2}` ball of radius `eps` around a critical datum.
pub fn crucial_inequality_scan(
    space: &CircleSpace,
    crit: &CriticalDatum,
    eps: f64,
    samples: usize,
    rng_seed: u64,
) -> Result<CrucialScan> {
    if !(eps > 0.0 && eps <= MAX_SCAN_EPS) {
        return Err(invalid("scan.eps", format!("must lie in (0, {MAX_SCAN_EPS}], found {eps}")));
    }
    if samples == 0 {
        return Err(invalid("scan.samples", "must be at least 1"));
    }
    let base = &crit.loop_point;
    let grid = base.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut min_ratio = f64::INFINITY;
    let (mut excluded, mut nonpositive) = (0, 0);
    for _ in 0..samples {
        let dir = random_direction(&mut rng, grid, base.dim());
        let radius = eps * (1.0 - rng.random::<f64>());
        let y = base.add_scaled(&dir, radius / sobolev_norm(&dir, grid));
        match crucial_ratio(space, base, &y)? {
            None => excluded += 1,
            Some(r) => {
                if r <= 0.0 {
                    nonpositive += 1;
                }
                min_ratio = min_ratio.min(r);
            }
        }
    }
    if excluded == samples {
        return Err(VortexError::AllSamplesExcluded);
    }
    Ok(CrucialScan { eps, samples, rng_seed, min_ratio, excluded, nonpositive })
}

/// A field `(u, eta)` on `S^1 x [t0, t0 + (n_t - 1) dt]` in temporal gauge,
/// stored as one loop per time node.
#[derive(Clone, Debug)]
pub struct CylinderField {
    pub t0: f64,
    pub dt: f64,
    pub slices: Vec<LoopPoint>,
}

/// Fewest time nodes accepted by [`CylinderField`].
pub const MIN_TIME_NODES: usize = 16;

impl CylinderField {
    pub fn from_slices(t0: f64, dt: f64, slices: Vec<LoopPoint>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("cylinder.dt", format!("must be positive, found {dt}")));
        }
        if slices.len() < MIN_TIME_NODES {
            return Err(invalid(
                "cylinder.n_t",
                format!("need at least {MIN_TIME_NODES} time nodes, found {}", slices.len()),
            ));
        }
        for s in &slices[1..] {
            slices[0].check_same_grid(s)?;
            if s.dim() != slices[0].dim() {
                return Err(VortexError::DimensionMismatch { expected: slices[0].dim(), found: s.dim() });
            }
        }
        Ok(Self { t0, dt, slices })
    }

    /// Samples `u(t, theta)` and `eta(t, theta)` on `n_t` nodes of `[t0, t1]`.
    pub fn from_fn(
        grid: &PeriodicGrid,
        n: usize,
        (t0, t1): (f64, f64),
        n_t: usize,
        mut u: impl FnMut(f64, f64) -> Vec<Complex64>,
        mut eta: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        if n_t < 2 || !(t1 > t0) {
            return Err(invalid("cylinder", "need t1 > t0 and at least two nodes"));
        }
        let dt = (t1 - t0) / (n_t - 1) as f64;
        let slices = (0..n_t)
            .map(|a| {
                let t = t0 + a as f64 * dt;
                LoopPoint::from_fn(grid.clone(), n, |th| u(t, th), |th| eta(t, th))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_slices(t0, dt, slices)
    }

    /// The critical datum pulled back to `[t0, t1]`.
    pub fn constant(datum: &CriticalDatum, (t0, t1): (f64, f64), n_t: usize) -> Result<Self> {
        if n_t < 2 || !(t1 > t0) {
            return Err(invalid("cylinder", "need t1 > t0 and at least two nodes"));
        }
        let dt = (t1 - t0) / (n_t - 1) as f64;
        Self::from_slices(t0, dt, vec![datum.loop_point.clone(); n_t])
    }

    /// The swept cylinder of a trajectory, on its evenly spaced records.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let spacing = traj.dt * traj.record_stride as f64;
        let count = traj
            .times
            .iter()
            .enumerate()
            .take_while(|(i, &t)| (t - *i as f64 * spacing).abs() <= 1e-9 * spacing.max(t))
            .count();
        Self::from_slices(traj.times[0], spacing, traj.states[..count].to_vec())
    }

    pub fn n_t(&self) -> usize {
        self.slices.len()
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.slices[0].grid()
    }

    /// Fourth-order finite difference in `t` at node `a`.
    fn t_derivative(&self, a: usize) -> TangentAtLoop {
        let nt = self.n_t();
        let (start, c): (usize, [f64; 5]) = if a == 0 {
            (0, [-25.0, 48.0, -36.0, 16.0, -3.0])
        } else if a == 1 {
            (0, [-3.0, -10.0, 18.0, -6.0, 1.0])
        } else if a == nt - 2 {
            (nt - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
        } else if a == nt - 1 {
            (nt - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
        } else {
            (a - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
        };
        let s0 = &self.slices[start];
        let mut out = TangentAtLoop::zeros(s0.n_theta(), s0.dim());
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                let s = &self.slices[start + i];
                out = out.add(&TangentAtLoop { v: s.x.clone(), xi: s.eta.clone() }, ci);
            }
        }
        out.scale(1.0 / (12.0 * self.dt))
    }

    /// Fourth-order end-corrected trapezoid weights in `t`.
    fn t_weights(&self) -> Vec<f64> {
        let nt = self.n_t();
        let mut w = vec![self.dt; nt];
        for (i, c) in [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0].into_iter().enumerate() {
            w[i] = c * self.dt;
            w[nt - 1 - i] = c * self.dt;
        }
        w
    }
}

/// `(||du/dt + J(du/dtheta + eta~_u)||, ||d eta/dt + mu(u)||)` in `L^2` of
/// the cylinder.
pub fn vortex_residual(space: &CircleSpace, f: &CylinderField) -> (f64, f64) {
    let grid = f.grid();
    let weights = f.t_weights();
    let (mut dbar, mut curv) = (0.0, 0.0);
    for (a, y) in f.slices.iter().enumerate() {
        // du/dt + grad L(u) is (dbar u, *F + mu)
        let r = f.t_derivative(a).add(&grad_action(space, y), 1.0);
        let h = grid.spacing();
        dbar += weights[a] * h * r.v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        curv += weights[a] * h * r.xi.iter().map(|e| e * e).sum::<f64>();
    }
    (dbar.sqrt(), curv.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyIdentity {
    /// Yang-Mills-Higgs energy.
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `int |dbar u|^2 / 2 + |*F + mu|^2 / 2`.
    pub residual: f64,
    /// `L(u(t0)) - L(u(t1))`.
    pub topological: f64,
}

/// Evaluates both sides of the energy identity
/// `E_YMH = int (|dbar u|^2 + |*F + mu|^2) / 2 + L(t0) - L(t1)`.
pub fn energy_identity_check(space: &CircleSpace, f: &CylinderField) -> EnergyIdentity {
    let grid = f.grid();
    let weights = f.t_weights();
    let (mut lhs, mut residual) = (0.0, 0.0);
    for (a, y) in f.slices.iter().enumerate() {
        let ut = f.t_derivative(a);
        let g = grad_action(space, y);
        // |grad L|^2 = |du/dtheta + eta~_u|^2 + mu^2
        lhs += weights[a] * 0.5 * (ut.norm(grid).powi(2) + g.norm(grid).powi(2));
        residual += weights[a] * 0.5 * ut.add(&g, 1.0).norm(grid).powi(2);
    }
    let topological = action_from_origin(space, &f.slices[0]) - action_from_origin(space, &f.slices[f.n_t() - 1]);
    let rhs = residual + topological;
    EnergyIdentity { lhs, rhs, gap: (lhs - rhs).abs(), residual, topological }
}

/// A seeded smooth field on `[0, 1] x S^1` built from low Fourier modes in
/// theta with smooth time profiles.
pub fn random_smooth_field(n: usize, grid: &PeriodicGrid, n_t: usize, seed: u64) -> Result<CylinderField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = move || rng.random_range(-1.0..1.0);
    let modes: Vec<(usize, i64, [Complex64; 3], f64)> = (0..n)
        .flat_map(|j| (-2..=2).map(move |m| (j, m)))
        .map(|(j, m)| {
            let amp = 0.6 / (1.0 + (m * m) as f64);
            let c = [Complex64::new(r(), r()) * amp, Complex64::new(r(), r()) * amp, Complex64::new(r(), r()) * amp];
            (j, m, c, 3.0 * r())
        })
        .collect();
    let etas: Vec<(i64, [f64; 4])> = (0..=2).map(|m| (m, [r(), r(), r(), r()])).collect();
    CylinderField::from_fn(
        grid,
        n,
        (0.0, 1.0),
        n_t,
        |t, th| {
            let mut u = vec![Complex64::new(0.0, 0.0); n];
            for &(j, m, c, om) in &modes {
                let profile = c[0] + c[1] * t + c[2] * (om * t).sin();
                u[j] += profile * Complex64::from_polar(1.0, m as f64 * th);
            }
            u
        },
        |t, th| {
            etas.iter()
                .map(|&(m, a)| {
                    let profile = 0.5 * (a[0] + a[1] * (2.0 * t + a[2]).cos()) / (1.0 + (m * m) as f64);
                    profile * (m as f64 * th + a[3]).cos()
                })
                .sum()
        },
    )
}
