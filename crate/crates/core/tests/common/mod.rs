//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the numerical parts of the library: spectra are
//! assembled mode by mode from the closed-form linearisation, degree shifts
//! from modular arithmetic and web counts from compositions.

#![allow(dead_code)]

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalue of `i d/dtheta` on Fourier mode `m` of an `n_theta`-point
/// grid, with the Nyquist mode sent to zero.
pub fn i_derivative_symbol(m: i64, n_theta: usize) -> f64 {
    let n = n_theta as i64;
    let r = m.rem_euclid(n);
    if 2 * r == n {
        0.0
    } else if 2 * r < n {
        -(r as f64)
    } else {
        -((r - n) as f64)
    }
}

/// Eigenvalues of the Hermitian arrowhead `[[0, r^*], [r, diag(d)]]` by
/// bisection on the secular equation `lambda = sum |r_i|^2 / (lambda - d_i)`.
pub fn arrowhead_eigenvalues(entries: &[(f64, f64)]) -> Vec<f64> {
    // group equal diagonal entries
    let mut groups: Vec<(f64, f64, usize)> = Vec::new();
    for &(d, r2) in entries {
        match groups.iter_mut().find(|g| (g.0 - d).abs() < 1e-12) {
            Some(g) => {
                g.1 += r2;
                g.2 += 1;
            }
            None => groups.push((d, r2, 1)),
        }
    }
    let mut out = Vec::new();
    let mut poles: Vec<(f64, f64)> = Vec::new();
    for &(d, r2, mult) in &groups {
        if r2 > 1e-300 {
            poles.push((d, r2));
            out.extend(std::iter::repeat_n(d, mult - 1));
        } else {
            out.extend(std::iter::repeat_n(d, mult));
        }
    }
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let f = |l: f64| l - poles.iter().map(|(d, r2)| r2 / (l - d)).sum::<f64>();
    let reach = 1.0 + poles.iter().map(|p| p.0.abs() + p.1.sqrt()).sum::<f64>();
    let mut edges = vec![-reach];
    edges.extend(poles.iter().map(|p| p.0));
    edges.push(reach);
    for w in edges.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// Full Hessian spectrum at the critical loop `x_j = e^{i w_j eta0 theta} p_j`
/// with `eta0 = k/m`, assembled from per-mode blocks.
///
/// Coordinates with `w_j k/m` integral and `p_j != 0` couple to `eta` mode
/// `q` through their modes `q + s_j` and `s_j - q`; every other coordinate
/// mode is an eigenvector of `i d/dtheta + eta0 w_j`.
pub fn hessian_oracle(weights: &[i64], p: &[Complex64], k: i64, m: i64, n_theta: usize) -> Vec<f64> {
    let eta0 = k as f64 / m as f64;
    let n = n_theta as i64;
    let mut coupled = Vec::new();
    let mut out = Vec::new();
    for (j, (&w, z)) in weights.iter().zip(p).enumerate() {
        if (w * k) % m == 0 && z.norm() > 0.0 {
            coupled.push(j);
        } else {
            for mode in -(n / 2) + 1..=n / 2 {
                let ev = eta0 * w as f64 + i_derivative_symbol(mode, n_theta);
                out.extend([ev, ev]);
            }
        }
    }
    let s = |j: usize| weights[j] * k / m;
    let c2 = |j: usize| (weights[j] as f64 * p[j].norm()).powi(2);
    // eta modes 0 and n/2 are real: each coupled complex coordinate gives
    // two real entries of the same diagonal value
    for q in [0, n / 2] {
        let mut entries = Vec::new();
        for &j in &coupled {
            let d = s(j) as f64 + i_derivative_symbol(q + s(j), n_theta);
            entries.push((d, c2(j)));
            entries.push((d, 0.0));
        }
        out.extend(arrowhead_eigenvalues(&entries));
    }
    for q in 1..n / 2 {
        let mut entries = Vec::new();
        for &j in &coupled {
            entries.push((s(j) as f64 + i_derivative_symbol(q + s(j), n_theta), 0.5 * c2(j)));
            entries.push((s(j) as f64 + i_derivative_symbol(s(j) - q, n_theta), 0.5 * c2(j)));
        }
        // complex block: each eigenvalue twice over the reals
        for ev in arrowhead_eigenvalues(&entries) {
            out.extend([ev, ev]);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// `sum_j ((w_j k) mod m) / m`.
pub fn modular_degree_shift(weights: &[i64], k: i64, m: i64) -> Ratio<i64> {
    weights.iter().map(|&w| Ratio::new((w * k).rem_euclid(m), m)).sum()
}

/// Number of coordinates moved by `e^{2 pi i k/m}`.
pub fn moved_coordinates(weights: &[i64], k: i64, m: i64) -> usize {
    weights.iter().filter(|&&w| (w * k) % m != 0).count()
}

/// Webs with trivial sphere classes: a principal weight plus one
/// composition per end, with the empty composition allowed.
pub fn composition_count(class: usize, ends: usize) -> u64 {
    // chain[r]: compositions of r, with one empty composition of 0
    let chain: Vec<u64> = (0..=class).map(|r| if r == 0 { 1 } else { 1 << (r - 1) }).collect();
    // principal root takes any weight
    let mut total = vec![1u64; class + 1];
    for _ in 0..ends {
        let mut next = vec![0u64; class + 1];
        for (a, &x) in total.iter().enumerate() {
            for (b, &y) in chain.iter().enumerate().take(class + 1 - a) {
                next[a + b] += x * y;
            }
        }
        total = next;
    }
    total[class]
}

/// Seeded smooth sample values `(x, eta)` on an `n_theta` grid from Fourier
/// modes up to `max_mode`, flattened sample-major.
pub fn smooth_samples(
    rng: &mut ChaCha8Rng,
    n_theta: usize,
    n: usize,
    max_mode: i64,
    amplitude: f64,
) -> (Vec<Complex64>, Vec<f64>) {
    let thetas: Vec<f64> = (0..n_theta).map(|i| std::f64::consts::TAU * i as f64 / n_theta as f64).collect();
    let mut x = vec![Complex64::new(0.0, 0.0); n_theta * n];
    for j in 0..n {
        for m in -max_mode..=max_mode {
            let scale = amplitude / (1.0 + (m * m) as f64);
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            for (i, &t) in thetas.iter().enumerate() {
                x[i * n + j] += c * Complex64::from_polar(1.0, m as f64 * t);
            }
        }
    }
    let mut eta = vec![amplitude * rng.random_range(-1.0..1.0); n_theta];
    for m in 1..=max_mode {
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for (i, &t) in thetas.iter().enumerate() {
            eta[i] += amplitude * (a * (m as f64 * t).cos() + b * (m as f64 * t).sin()) / (1.0 + (m * m) as f64);
        }
    }
    (x, eta)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn oracle_self_checks() {
    // 2x2 arrowhead [[0, 1], [1, 0]]
    let mut ev = arrowhead_eigenvalues(&[(0.0, 1.0)]);
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    assert_eq!(composition_count(3, 1), 8);
    assert_eq!(composition_count(1, 2), 3);
    assert_eq!(modular_degree_shift(&[1, 2], 1, 2), Ratio::new(1, 2));
    assert_eq!(i_derivative_symbol(3, 16), -3.0);
    assert_eq!(i_derivative_symbol(-3, 16), 3.0);
    assert_eq!(i_derivative_symbol(8, 16), 0.0);
}
