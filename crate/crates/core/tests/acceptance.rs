//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Ratio;

use vortexflow::critical::{
    asymmetry, degree_shift_cr, enumerate_sectors, find_critical, hessian_matrix, hessian_raw, non_fixed_directions,
    spectral_report, CriticalDatum, SectorLabel,
};
use vortexflow::flow::{
    crucial_inequality_scan, decay_fit, energy_identity_check, integrate, quadratic_prediction, random_smooth_field,
    stable_manifold_seed, CylinderField, FlowOptions, Trajectory,
};
use vortexflow::index::{resolve_sector, virtual_dimension, IndexQuery};
use vortexflow::loops::{action_relative, grad_action, l2_inner, LoopPoint, TangentAtLoop, HOMOTOPY_THRESHOLD};
use vortexflow::space::{CircleSpace, Point};
use vortexflow::spectral::PeriodicGrid;
use vortexflow::webs::{enumerate_webs, poset_check, EnergyModel};

/// `(weights, genus, B, sectors, dimension)`.
type IndexCase = (Vec<i64>, u32, i64, Vec<(u32, u32)>, Ratio<i64>);
/// `(m, k, shift)`.
type ShiftCase = (u32, u32, Ratio<i64>);
type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn space(weights: &[i64], tau: f64) -> CircleSpace {
    CircleSpace::new(weights.to_vec(), tau).unwrap()
}

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(n).unwrap()
}

fn ones(n: usize) -> Point {
    Point(vec![Complex64::new(1.0, 0.0); n])
}

/// The models whose critical data ship with the example configs.
fn shipped_models() -> Vec<(CircleSpace, Point)> {
    vec![
        (space(&[1], 0.5), ones(1)),
        (space(&[2], 0.5), ones(1)),
        (space(&[1, 2], 0.75), Point(vec![Complex64::new(0.6, 0.1), Complex64::new(0.4, -0.3)])),
        (space(&[1, 2, 3], 1.0), ones(3)),
    ]
}

fn shipped_data(n_theta: usize) -> Vec<(CircleSpace, CriticalDatum)> {
    let g = grid(n_theta);
    let mut out = Vec::new();
    for (s, seed) in shipped_models() {
        for sector in enumerate_sectors(&s) {
            out.push((s.clone(), find_critical(&s, &sector, &seed, &g).unwrap()));
        }
    }
    out
}

fn name(s: &CircleSpace, sector: &SectorLabel) -> String {
    format!("{:?} {}:{}", s.weights(), sector.m, sector.k)
}

fn unit_flow(n_theta: usize, offset: f64, t_end: f64, stride: usize) -> (CircleSpace, CriticalDatum, Trajectory) {
    let s = space(&[1], 0.5);
    let g = grid(n_theta);
    let datum = find_critical(&s, &SectorLabel::trivial(1), &ones(1), &g).unwrap();
    let p = Point(datum.base.0.iter().map(|z| z * (1.0 + offset)).collect());
    let y0 = stable_manifold_seed(&s, &g, &p).unwrap();
    let opts = FlowOptions { record_stride: stride, ..FlowOptions::default() };
    let traj = integrate(&s, &y0, t_end, 1e-3, &opts).unwrap();
    (s, datum, traj)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let g = grid(64);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for pair in 0..50u64 {
        let s = if pair % 2 == 0 { space(&[1], 0.5) } else { space(&[1, 2], 0.75) };
        let n = s.dim();
        let mut rng = common::rng(1000 + pair);
        let (x, eta) = common::smooth_samples(&mut rng, 64, n, 3, 1.0);
        let y = LoopPoint::new(g.clone(), n, x, eta).unwrap();
        let (v, xi) = common::smooth_samples(&mut rng, 64, n, 3, 1.0);
        let dir = TangentAtLoop { v, xi };
        let path = [y.add_scaled(&dir, -h), y.add_scaled(&dir, h)];
        let fd = action_relative(&s, &path, HOMOTOPY_THRESHOLD).unwrap() / (2.0 * h);
        let exact = l2_inner(&y, &grad_action(&s, &y), &dir).unwrap();
        worst = worst.max((fd - exact).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-5 && secs < 10.0, format!("max |fd - <grad, v>| = {worst:.2e} over 50 pairs, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (s, _, traj) = unit_flow(64, 3e-5, 40.0, 10);
    let last = traj.len() - 1;
    let q = [
        ("action_drop", traj.action_drop[last]),
        ("topological", traj.topological_energy(&s)),
        ("ymh", traj.ymh_energy[last]),
        ("grad_sq", traj.grad_sq_integral[last]),
    ];
    let mut worst: f64 = 0.0;
    for a in &q {
        for b in &q {
            worst = worst.max((a.1 - b.1).abs() / a.1.abs().max(b.1.abs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = traj.converged && worst <= 1e-3 && secs < 60.0;
    outcome(
        pass,
        format!(
            "converged={} E={:.6e}, max pairwise relative difference {worst:.2e}, {secs:.2}s",
            traj.converged, q[0].1
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rates = Vec::new();
    let mut gaps = Vec::new();
    for n_theta in [64, 128] {
        let (s, datum, traj) = unit_flow(n_theta, 3e-5, 40.0, 10);
        let fit = decay_fit(&traj, 0.5).unwrap();
        let gap = spectral_report(&hessian_matrix(&s, &datum), None).unwrap().gap;
        rates.push(fit.rate);
        gaps.push(gap);
    }
    let agree = (rates[0] / gaps[0] - 1.0).abs();
    let shift = (rates[1] - rates[0]).abs() / rates[0];
    // on (1,2) the flow does not excite the gap modes, so only the lower bound applies
    let s = space(&[1, 2], 0.75);
    let g = grid(64);
    let datum = find_critical(
        &s,
        &SectorLabel::trivial(2),
        &Point(vec![Complex64::new(0.6, 0.1), Complex64::new(0.4, -0.3)]),
        &g,
    )
    .unwrap();
    let p = Point(datum.base.0.iter().map(|z| z * (1.0 + 3e-5)).collect());
    let traj = integrate(
        &s,
        &stable_manifold_seed(&s, &g, &p).unwrap(),
        40.0,
        1e-3,
        &FlowOptions { record_stride: 10, ..FlowOptions::default() },
    )
    .unwrap();
    let rate12 = decay_fit(&traj, 0.5).unwrap().rate;
    let gap12 = spectral_report(&hessian_matrix(&s, &datum), None).unwrap().gap;
    let pass = agree <= 0.15 && shift < 0.02 && rate12 >= 0.85 * gap12;
    outcome(
        pass,
        format!(
            "rate {:.5} vs gap {:.5} (off by {:.2}%), N_theta 64->128 moves rate by {:.2e}; (1,2): rate {rate12:.4} >= 0.85 gap {gap12:.4}",
            rates[0],
            gaps[0],
            100.0 * agree,
            shift
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (s, datum)) in shipped_data(64).into_iter().enumerate() {
        let gap = spectral_report(&hessian_matrix(&s, &datum), None).unwrap().gap;
        let scan = crucial_inequality_scan(&s, &datum, 0.1, 1000, 7 + i as u64).unwrap();
        let bound = 0.5 * quadratic_prediction(gap);
        let ok = scan.min_ratio >= bound && scan.nonpositive == 0;
        pass &= ok;
        parts.push(format!(
            "{} min {:.3} >= {:.3}{}",
            name(&s, &datum.sector),
            scan.min_ratio,
            bound,
            if ok { "" } else { " FAILED" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let (mut worst_asym, mut worst_low, mut worst_all): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for n_theta in [32, 64] {
        for (s, datum) in shipped_data(n_theta) {
            let raw = hessian_raw(&s, &datum.loop_point);
            worst_asym = worst_asym.max(asymmetry(&raw));
            let report = spectral_report(&hessian_matrix(&s, &datum), None).unwrap();
            let oracle = common::hessian_oracle(
                s.weights(),
                &datum.base.0,
                datum.sector.k as i64,
                datum.sector.m as i64,
                n_theta,
            );
            let oracle_kernel = oracle.iter().filter(|e| e.abs() <= report.rank_tol).count();
            if oracle.len() != report.eigenvalues.len() || oracle_kernel != report.kernel_dim {
                pass = false;
                parts.push(format!(
                    "{} N={n_theta}: kernel {} vs oracle {oracle_kernel}",
                    name(&s, &datum.sector),
                    report.kernel_dim
                ));
                continue;
            }
            for (a, b) in report.eigenvalues.iter().zip(&oracle) {
                let d = (a - b).abs();
                worst_all = worst_all.max(d);
                if b.abs() <= 10.0 {
                    worst_low = worst_low.max(d);
                }
            }
        }
    }
    pass &= worst_asym <= 1e-10 && worst_low <= 1e-8;
    parts.insert(
        0,
        format!(
            "asymmetry {worst_asym:.1e}, kernel dims match oracle, |lambda|<=10 max error {worst_low:.1e} (full spectrum {worst_all:.1e})"
        ),
    );
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let g = grid(64);
    let mut worst: f64 = 0.0;
    for (idx, s) in [space(&[1], 0.5), space(&[1, 2], 0.75)].iter().enumerate() {
        for seed in 0..20 {
            let f = random_smooth_field(s.dim(), &g, 64, 100 * idx as u64 + seed).unwrap();
            let e = energy_identity_check(s, &f);
            worst = worst.max(e.gap / (1.0 + e.lhs.abs()));
        }
    }
    // flow-generated vortices: the residual part vanishes
    let mut flow_worst: f64 = 0.0;
    let mut energies = Vec::new();
    for offset in [3e-5, 0.3] {
        let (s, _, traj) = unit_flow(64, offset, 2.0, 10);
        let f = CylinderField::from_trajectory(&traj).unwrap();
        let e = energy_identity_check(&s, &f);
        flow_worst = flow_worst.max((e.residual / e.lhs).max((e.lhs - e.topological).abs() / e.lhs));
        energies.push(e.lhs);
    }
    let pass = worst <= 1e-3 && flow_worst <= 1e-6;
    outcome(
        pass,
        format!(
            "random fields: max |lhs-rhs|/(1+|lhs|) = {worst:.2e} over 40; flows (E = {:.2e}, {:.2e}): relative residual and E-topological <= {flow_worst:.2e}",
            energies[0], energies[1]
        ),
    )
}

fn criterion_7() -> Outcome {
    // (weights, genus, B, sectors, expected) expanded by hand
    let fixture: Vec<IndexCase> = vec![
        (vec![1], 0, 1, vec![(1, 0)], Ratio::from(2)),
        (vec![1], 0, 5, vec![(1, 0)], Ratio::from(10)),
        (vec![1], 2, 3, vec![(1, 0), (1, 0)], Ratio::from(6)),
        (vec![1, 2], 0, 1, vec![(2, 1)], Ratio::from(7)),
        (vec![1, 2], 0, 1, vec![(1, 0)], Ratio::from(8)),
        (vec![1, 2], 1, 2, vec![(2, 1)], Ratio::from(11)),
        (vec![1, 2], 2, 1, vec![(2, 1), (2, 1)], Ratio::from(2)),
        (vec![1, 3], 0, 1, vec![(3, 1)], Ratio::new(28, 3)),
        (vec![1, 3], 0, 1, vec![(3, 2)], Ratio::new(26, 3)),
        (vec![2, 3], 0, 2, vec![(2, 1), (3, 1)], Ratio::new(59, 3)),
        (vec![1, 2, 3], 0, 1, vec![(2, 1)], Ratio::from(14)),
        (vec![1, 4], 1, 1, vec![(4, 1), (4, 3)], Ratio::from(8)),
        (vec![1, 2, 3], 3, 2, vec![(3, 1), (3, 2), (1, 0)], Ratio::from(12)),
    ];
    let mut mismatches = Vec::new();
    let mut invariants = true;
    for (weights, genus, class, labels, expected) in &fixture {
        let s = space(weights, 1.0);
        let sectors: Vec<SectorLabel> = labels.iter().map(|&(m, k)| resolve_sector(&s, m, k).unwrap()).collect();
        let q = IndexQuery { space: s.clone(), genus: *genus, class: *class, sectors: sectors.clone() };
        let d = virtual_dimension(&q).unwrap();
        if d != *expected {
            mismatches.push(format!("{weights:?} g={genus} B={class} {labels:?}: {d} != {expected}"));
        }
        let n = weights.len() as i64;
        let up = virtual_dimension(&IndexQuery { genus: genus + 1, ..q.clone() }).unwrap();
        let mut extra = sectors.clone();
        extra.push(SectorLabel::trivial(weights.len()));
        let more = virtual_dimension(&IndexQuery { sectors: extra, ..q.clone() }).unwrap();
        invariants &= up - d == Ratio::from(-2 * (n - 1)) && more == d;
    }
    let pass = mismatches.is_empty() && invariants;
    outcome(
        pass,
        if pass {
            format!("{} fixture queries exact, genus and trivial-sector invariants exact", fixture.len())
        } else {
            format!("mismatches: {}; invariants hold: {invariants}", mismatches.join(", "))
        },
    )
}

fn criterion_8() -> Outcome {
    let expected: Vec<(Vec<i64>, Vec<ShiftCase>)> = vec![
        (vec![1], vec![(1, 0, Ratio::from(0))]),
        (vec![2], vec![(1, 0, Ratio::from(0)), (2, 1, Ratio::from(0))]),
        (vec![1, 2], vec![(1, 0, Ratio::from(0)), (2, 1, Ratio::new(1, 2))]),
        (
            vec![1, 2, 3],
            vec![(1, 0, Ratio::from(0)), (2, 1, Ratio::from(1)), (3, 1, Ratio::from(1)), (3, 2, Ratio::from(1))],
        ),
    ];
    let mut problems = Vec::new();
    let mut count = 0;
    for (weights, sectors) in &expected {
        let s = space(weights, 1.0);
        let found: Vec<(u32, u32)> = enumerate_sectors(&s).iter().map(|x| (x.m, x.k)).collect();
        let listed: Vec<(u32, u32)> = sectors.iter().map(|x| (x.0, x.1)).collect();
        if found != listed {
            problems.push(format!("{weights:?}: sectors {found:?}"));
        }
        for &(m, k, iota) in sectors {
            count += 1;
            let sector = resolve_sector(&s, m, k).unwrap();
            let got = degree_shift_cr(&s, &sector);
            let oracle = common::modular_degree_shift(weights, k as i64, m as i64);
            if got != iota || oracle != iota {
                problems.push(format!("{weights:?} {m}:{k}: {got} (oracle {oracle}, hand {iota})"));
            }
            let inv = sector.inverse();
            let sum = degree_shift_cr(&s, &sector) + degree_shift_cr(&s, &inv);
            let moved = common::moved_coordinates(weights, k as i64, m as i64);
            if sum != Ratio::from(moved as i64) || non_fixed_directions(&s, &sector) != moved {
                problems.push(format!("{weights:?} {m}:{k}: iota(g) + iota(g^-1) = {sum}, moved {moved}"));
            }
        }
    }
    let pass = problems.is_empty();
    outcome(
        pass,
        if pass {
            format!("{count} sectors exact; iota(g) + iota(g^-1) = #moved coordinates on all")
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let model = EnergyModel::linear();
    let mut problems = Vec::new();
    for d in 1..=6 {
        let len = enumerate_webs(model, d, 1, 0).unwrap().len();
        if len != 1 << d {
            problems.push(format!("B={d} k=1: {len} != {}", 1 << d));
        }
    }
    let (mut total, mut largest) = (0usize, 0usize);
    for b in 1..=8i64 {
        for k in 1..=3usize {
            let webs = enumerate_webs(model, b, k, 0).unwrap();
            let oracle = common::composition_count(b as usize, k);
            if webs.len() as u64 != oracle {
                problems.push(format!("B={b} k={k}: {} != {oracle}", webs.len()));
            }
            let report = poset_check(&webs);
            if !report.is_poset() {
                problems.push(format!("B={b} k={k}: poset check failed at {:?}", report.violation));
            }
            total += webs.len();
            largest = largest.max(webs.len());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = problems.is_empty() && secs < 30.0;
    outcome(
        pass,
        if problems.is_empty() {
            format!("2^d for d=1..6, composition oracle for B<=8 k<=3 ({total} webs, largest set {largest}), posets verified, {secs:.2}s")
        } else {
            problems.join("; ")
        },
    )
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_determinism");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let config = root.join("run.toml");
    std::fs::write(
        &config,
        "[space]\nweights = [1, 2]\ntau = 0.75\n[grid]\nn_theta = 32\n[flow]\nt_end = 20.0\n\
         [scan]\nsamples = 100\n[energy]\nfields = 3\n[webs]\nclasses = [1, 2, 3]\nends = [1, 2]\n\
         [output]\nsnapshot_stride = 100\n",
    )
    .unwrap();
    let out = root.join("out");
    let commands = ["flow", "crit", "hessian", "scan", "index", "webs", "energy-check", "period"];
    let run = || -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
        let _ = std::fs::remove_dir_all(&out);
        for c in commands {
            let status = Command::new(env!("CARGO_BIN_EXE_vortexflow"))
                .args([c, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(out.join(c))
                .args(["--seed", "42"])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{c}: {}", String::from_utf8_lossy(&status.stderr).trim()));
            }
        }
        Ok(read_tree(&out))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<String> =
                a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).map(|k| k.display().to_string()).collect();
            let pass = differing.is_empty() && !a.is_empty();
            outcome(
                pass,
                if pass {
                    format!("{} artifacts from {} subcommands byte-identical", a.len(), commands.len())
                } else {
                    format!("differing: {}", differing.join(", "))
                },
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("run failed: {e}")),
    }
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("gradient correctness", criterion_1),
        ("four-way energy equality", criterion_2),
        ("exponential decay", criterion_3),
        ("crucial inequality", criterion_4),
        ("hessian structure", criterion_5),
        ("energy identity", criterion_6),
        ("index formulas", criterion_7),
        ("degree shifts", criterion_8),
        ("webs", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (label, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.1}s) {}",
            i + 1,
            label,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
