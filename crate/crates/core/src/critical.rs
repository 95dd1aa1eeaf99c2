//! Critical loops by holonomy sector, the discretised Hessian and its
//! spectrum, and degree shifts of twisted sectors.
//!
//! For the weighted circle action every critical loop is gauge equivalent to
//! `(exp(theta eta0) . p, eta0)` with `p` on the zero level and
//! `exp(2 pi eta0)` fixing `p`. The sector element is `e^{2 pi i k/m}`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Result, VortexError};
use crate::loops::{grad_action, LoopPoint, TangentAtLoop};
use crate::space::{CircleSpace, LieValue, Point};
use crate::spectral::PeriodicGrid;

/// Residual allowed for a constructed critical loop.
pub const CRITICAL_RESIDUAL_TOL: f64 = 1e-8;

/// Default relative rank tolerance, scaled by the largest eigenvalue.
pub const DEFAULT_RELATIVE_RANK_TOL: f64 = 1e-6;

/// A twisted sector `e^{2 pi i k/m}` with its fixed coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SectorLabel {
    pub m: u32,
    pub k: u32,
    /// Zero-based coordinates `j` with `w_j k = 0 mod m`.
    pub fixed_dims: Vec<usize>,
}

impl SectorLabel {
    pub fn trivial(n: usize) -> Self {
        Self { m: 1, k: 0, fixed_dims: (0..n).collect() }
    }

    /// The sector of `e^{2 pi i k/m}` for the given weights, reduced to
    /// lowest terms. Returns `None` when no coordinate is fixed.
    pub fn for_element(m: u32, k: u32, weights: &[i64]) -> Option<Self> {
        if m == 0 {
            return None;
        }
        let k = k % m;
        let d = (k as u64).gcd(&(m as u64)) as u32;
        let (m, k) = if k == 0 { (1, 0) } else { (m / d, k / d) };
        let fixed_dims: Vec<usize> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| (w * k as i64).rem_euclid(m as i64) == 0)
            .map(|(j, _)| j)
            .collect();
        (!fixed_dims.is_empty()).then_some(Self { m, k, fixed_dims })
    }

    pub fn is_trivial(&self) -> bool {
        self.k == 0
    }

    /// The inverse element `e^{-2 pi i k/m}`.
    pub fn inverse(&self) -> Self {
        Self { m: self.m, k: (self.m - self.k) % self.m, fixed_dims: self.fixed_dims.clone() }
    }

    /// Lie algebra element with `exp(2 pi eta0)` the sector element.
    pub fn eta0(&self) -> f64 {
        self.k as f64 / self.m as f64
    }

    /// Exponents `m_j` with `g` acting on coordinate `j` by `e^{2 pi i m_j/m}`.
    pub fn exponents(&self, weights: &[i64]) -> Vec<i64> {
        weights.iter().map(|&w| (w * self.k as i64).rem_euclid(self.m as i64)).collect()
    }
}

/// A critical loop realised on a grid.
#[derive(Clone, Debug)]
pub struct CriticalDatum {
    pub sector: SectorLabel,
    pub base: Point,
    pub eta0: LieValue,
    pub loop_point: LoopPoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub gap: f64,
    pub rank_tol: f64,
}

impl HessianReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// All sectors `e^{2 pi i k/m}` with nonempty fixed locus on the zero level.
///
/// With positive weights and `tau > 0` every nonzero coordinate subspace
/// meets the zero level, so a sector exists iff `m` divides some weight.
pub fn enumerate_sectors(space: &CircleSpace) -> Vec<SectorLabel> {
    let weights = space.weights();
    let max_w = *weights.iter().max().expect("nonempty weights");
    let mut out = Vec::new();
    for m in 1..=max_w as u32 {
        if !weights.iter().any(|&w| w % m as i64 == 0) {
            continue;
        }
        for k in 0..m {
            if (k as u64).gcd(&(m as u64)) != 1 && !(m == 1 && k == 0) {
                continue;
            }
            if let Some(s) = SectorLabel::for_element(m, k, weights) {
                if s.m == m && s.k == k {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Critical loop in `sector` obtained from `seed`.
///
/// The seed is projected to the sector's fixed subspace and scaled radially
/// onto the zero level, then polished by Newton steps along the gradient of
/// the moment map. The loop is `theta -> exp(theta eta0) . base`.
pub fn find_critical(
    space: &CircleSpace,
    sector: &SectorLabel,
    seed: &Point,
    grid: &PeriodicGrid,
) -> Result<CriticalDatum> {
    space.check_point(seed)?;
    let mut p = Point::zeros(space.dim());
    for &j in &sector.fixed_dims {
        p.0[j] = seed.0[j];
    }
    let q = space.moment_map(&p).0 + space.tau();
    if !(q > 0.0 && q.is_finite()) {
        return Err(VortexError::EmptySector { m: sector.m, k: sector.k });
    }
    let scale = (space.tau() / q).sqrt();
    for z in p.0.iter_mut() {
        *z *= scale;
    }
    // Newton along the moment gradient, halving on overshoot.
    for _ in 0..20 {
        let mu = space.moment_map(&p).0;
        if mu.abs() <= 1e-15 {
            break;
        }
        let grad = space.moment_gradient(&p);
        let g2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
        let mut step = -mu / g2;
        for _ in 0..30 {
            let trial = Point(p.0.iter().zip(&grad).map(|(z, g)| z + g * step).collect());
            if space.moment_map(&trial).0.abs() < mu.abs() {
                p = trial;
                break;
            }
            step *= 0.5;
        }
    }
    critical_datum(space, sector, p, sector.eta0(), grid)
}

/// The loop `theta -> exp(theta eta0) . base` as a checked critical datum.
///
/// `eta0` may differ from the sector's representative by an integer.
pub fn critical_datum(
    space: &CircleSpace,
    sector: &SectorLabel,
    base: Point,
    eta0: f64,
    grid: &PeriodicGrid,
) -> Result<CriticalDatum> {
    let weights = space.weights();
    let loop_point = LoopPoint::from_fn(
        grid.clone(),
        space.dim(),
        |t| base.0.iter().zip(weights).map(|(z, &w)| Complex64::from_polar(1.0, w as f64 * eta0 * t) * z).collect(),
        |_| eta0,
    )?;
    let residual = grad_action(space, &loop_point).norm(grid);
    if residual > CRITICAL_RESIDUAL_TOL {
        return Err(VortexError::CriticalResidual { residual });
    }
    Ok(CriticalDatum { sector: sector.clone(), base, eta0: LieValue(eta0), loop_point })
}

/// Jacobian of [`grad_action`] at `y` in the real coordinates of
/// [`TangentAtLoop::to_real`], without symmetrisation.
///
/// The L2 pairing is `spacing * (coordinate dot product)`, so symmetry of
/// the operator is literal symmetry of this matrix.
pub fn hessian_raw(space: &CircleSpace, y: &LoopPoint) -> DMatrix<f64> {
    let n = y.dim();
    let nt = y.n_theta();
    let grid = y.grid();
    let size = (2 * n + 1) * nt;
    let mut h = DMatrix::<f64>::zeros(size, size);
    let re = |k: usize, j: usize| 2 * (k * n + j);
    let im = |k: usize, j: usize| 2 * (k * n + j) + 1;
    let xi = |k: usize| 2 * nt * n + k;
    for k in 0..nt {
        let eta = y.eta[k];
        let xk = y.sample(k);
        for (j, &w) in space.weights().iter().enumerate() {
            let w = w as f64;
            // i D v
            for l in 0..nt {
                let d = grid.matrix_entry(k, l);
                if d != 0.0 {
                    h[(re(k, j), im(l, j))] -= d;
                    h[(im(k, j), re(l, j))] += d;
                }
            }
            // eta w v
            h[(re(k, j), re(k, j))] += eta * w;
            h[(im(k, j), im(k, j))] += eta * w;
            // xi w x and d mu(v)
            h[(re(k, j), xi(k))] += w * xk[j].re;
            h[(im(k, j), xi(k))] += w * xk[j].im;
            h[(xi(k), re(k, j))] += w * xk[j].re;
            h[(xi(k), im(k, j))] += w * xk[j].im;
        }
    }
    h
}

/// `max |H - H^T|`.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    (h - h.transpose()).amax()
}

/// Symmetrised Hessian at a critical datum.
pub fn hessian_matrix(space: &CircleSpace, crit: &CriticalDatum) -> DMatrix<f64> {
    let h = hessian_raw(space, &crit.loop_point);
    (&h + h.transpose()) * 0.5
}

/// Applies a Hessian matrix to a tangent vector.
pub fn hessian_apply(h: &DMatrix<f64>, t: &TangentAtLoop, n_theta: usize, n: usize) -> TangentAtLoop {
    let v = nalgebra::DVector::from_vec(t.to_real());
    let out = h * v;
    TangentAtLoop::from_real(out.as_slice(), n_theta, n)
}

/// Eigenvalues, kernel dimension and spectral gap of a symmetric matrix.
///
/// `rank_tol` defaults to `1e-6 * max |lambda|`. Fails when the gap is
/// below ten times the tolerance.
pub fn spectral_report(h: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<HessianReport> {
    let eig = SymmetricEigen::new(h.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let largest = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let rank_tol = rank_tol.unwrap_or(DEFAULT_RELATIVE_RANK_TOL * largest);
    let kernel_dim = eigenvalues.iter().filter(|l| l.abs() <= rank_tol).count();
    let gap = eigenvalues.iter().map(|l| l.abs()).filter(|&l| l > rank_tol).fold(f64::INFINITY, f64::min);
    if !(gap >= 10.0 * rank_tol) || !gap.is_finite() {
        return Err(VortexError::IllSeparatedSpectrum { gap, rank_tol });
    }
    Ok(HessianReport { eigenvalues, kernel_dim, gap, rank_tol })
}

/// Tangent to the based gauge orbit generated by `zeta`:
/// `(-zeta~_x, d zeta/dtheta)`.
pub fn gauge_tangent(space: &CircleSpace, y: &LoopPoint, zeta: &[f64]) -> TangentAtLoop {
    let n = y.dim();
    let mut v = Vec::with_capacity(y.x.len());
    for k in 0..y.n_theta() {
        for (j, &w) in space.weights().iter().enumerate() {
            v.push(Complex64::new(0.0, zeta[k] * w as f64) * y.x[k * n + j]);
        }
    }
    TangentAtLoop { v, xi: y.grid().derivative(zeta) }
}

/// Kernel direction transported from `v0` in the tangent space of the
/// fixed locus: `v(theta) = exp(theta eta0) v0`, `xi = 0`.
pub fn level_tangent(space: &CircleSpace, crit: &CriticalDatum, v0: &[Complex64]) -> TangentAtLoop {
    let grid = crit.loop_point.grid();
    let eta0 = crit.eta0.0;
    let mut v = Vec::with_capacity(crit.loop_point.x.len());
    for t in grid.thetas() {
        for (j, &w) in space.weights().iter().enumerate() {
            v.push(Complex64::from_polar(1.0, w as f64 * eta0 * t) * v0[j]);
        }
    }
    TangentAtLoop { v, xi: vec![0.0; grid.len()] }
}

/// `iota(g, C^n) = sum_j m_j / m`.
pub fn degree_shift(sector: &SectorLabel, rep_weights: &[i64]) -> Ratio<i64> {
    sector.exponents(rep_weights).into_iter().map(|mj| Ratio::new(mj, sector.m as i64)).sum()
}

/// Chen-Ruan degree shift of the sector on the reduced orbifold.
///
/// `T_p X` splits as `g + g^* + T X_0`; the first two summands form the
/// complex line through the moment gradient at a fixed point, on which the
/// abelian sector element acts trivially. Removing one zero exponent for it
/// leaves the exponents on `T X_0`.
pub fn degree_shift_cr(space: &CircleSpace, sector: &SectorLabel) -> Ratio<i64> {
    reduced_exponents(space, sector).into_iter().map(|mj| Ratio::new(mj, sector.m as i64)).sum()
}

/// Number of complex directions of `T X_0` moved by the sector element.
pub fn non_fixed_directions(space: &CircleSpace, sector: &SectorLabel) -> usize {
    reduced_exponents(space, sector).into_iter().filter(|&e| e != 0).count()
}

fn reduced_exponents(space: &CircleSpace, sector: &SectorLabel) -> Vec<i64> {
    let mut exps = sector.exponents(space.weights());
    let zero = exps.iter().position(|&e| e == 0).expect("a sector has at least one fixed direction");
    exps.remove(zero);
    exps
}
