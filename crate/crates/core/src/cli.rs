//! Command line front end: `vortexflow <subcommand> --config <path>
//! [--out <dir>] [--seed <u64>]`.
//!
//! Every run writes `config.effective.toml` next to its artifacts. On
//! failure all files written by the run are removed again.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::critical::{
    asymmetry, enumerate_sectors, find_critical, hessian_matrix, hessian_raw, spectral_report, CriticalDatum,
    SectorLabel,
};
use crate::error::{Result, VortexError};
use crate::flow::{
    crucial_inequality_scan, decay_fit, energy_identity_check, integrate, limit_point, quadratic_prediction,
    random_smooth_field, stable_manifold_seed, vortex_residual, CylinderField, FlowOptions, Trajectory, MIN_TIME_NODES,
    MONOTONE_TOL,
};
use crate::index::{format_csv, format_table, IndexRow};
use crate::loops::{action_period_probe, grad_action};
use crate::space::{CircleSpace, Point};
use crate::spectral::PeriodicGrid;
use crate::webs::{enumerate_webs, hasse_dot, poset_check};

#[derive(Parser, Debug, Clone)]
#[command(name = "vortexflow", version, about = "Vortex flow experiments on C^n with a weighted circle action")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed, overriding `scan.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Flow,
    Crit,
    Hessian,
    Scan,
    Index,
    Webs,
    EnergyCheck,
    Period,
}

/// The configuration file with command line overrides applied.
pub fn effective_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.scan.rng_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One line: `error kind=<kind> field=<field> message="<text>"`.
pub fn error_line(e: &VortexError) -> String {
    let message = match e {
        VortexError::InvalidParameter { reason, .. } => reason.clone(),
        other => other.to_string(),
    };
    let message = message.replace('\\', "\\\\").replace('"', "\\\"").replace(['\n', '\r'], " ");
    format!("error kind={} field={} message=\"{message}\"", e.kind(), e.field().unwrap_or("-"))
}

/// Files written by a run, removed again by [`Artifacts::rollback`].
struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        let mut out = Self { dir: dir.to_path_buf(), files: Vec::new(), created_dirs: Vec::new() };
        out.ensure_dir(dir)?;
        Ok(out)
    }

    fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        let missing: Vec<PathBuf> =
            dir.ancestors().take_while(|d| !d.as_os_str().is_empty() && !d.exists()).map(Path::to_path_buf).collect();
        fs::create_dir_all(dir)?;
        self.created_dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json serialises");
        text.push('\n');
        self.write(name, text)
    }

    fn rollback(self) {
        for f in self.files.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Runs one subcommand and returns the paths it wrote.
pub fn run(args: &Args) -> Result<Vec<PathBuf>> {
    let cfg = effective_config(args)?;
    let mut out = Artifacts::new(&cfg.output.dir)?;
    let result = out.write("config.effective.toml", cfg.to_toml()).and_then(|_| dispatch(args.command, &cfg, &mut out));
    match result {
        Ok(()) => Ok(out.files),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

fn dispatch(command: Command, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    match command {
        Command::Flow => run_flow(cfg, out),
        Command::Crit => run_crit(cfg, out),
        Command::Hessian => run_hessian(cfg, out),
        Command::Scan => run_scan(cfg, out),
        Command::Index => run_index(cfg, out),
        Command::Webs => run_webs(cfg, out),
        Command::EnergyCheck => run_energy(cfg, out),
        Command::Period => run_period(cfg, out),
    }
}

fn model(cfg: &ExperimentConfig) -> Result<(CircleSpace, PeriodicGrid)> {
    Ok((cfg.circle_space()?, cfg.periodic_grid()?))
}

fn label(s: &SectorLabel) -> String {
    format!("{}:{}", s.m, s.k)
}

fn point_json(p: &Point) -> Value {
    json!(p.0.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn error_json(e: &VortexError) -> Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

fn critical_data(cfg: &ExperimentConfig, space: &CircleSpace, grid: &PeriodicGrid) -> Result<Vec<CriticalDatum>> {
    let seed = cfg.crit_seed()?;
    enumerate_sectors(space).iter().map(|s| find_critical(space, s, &seed, grid)).collect()
}

/// The flow from a point just off the trivial critical orbit, on its
/// stable manifold.
fn seeded_flow(cfg: &ExperimentConfig, t_end: f64) -> Result<(CircleSpace, Trajectory)> {
    let (space, grid) = model(cfg)?;
    let datum = find_critical(&space, &SectorLabel::trivial(space.dim()), &cfg.crit_seed()?, &grid)?;
    let start = Point(datum.base.0.iter().map(|z| z * (1.0 + cfg.flow.offset)).collect());
    let y0 = stable_manifold_seed(&space, &grid, &start)?;
    let opts = FlowOptions { floor: cfg.flow.floor, record_stride: cfg.flow.record_stride, monotone_tol: MONOTONE_TOL };
    let traj = integrate(&space, &y0, t_end, cfg.flow.dt, &opts)?;
    Ok((space, traj))
}

fn run_flow(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, traj) = seeded_flow(cfg, cfg.flow.t_end)?;
    out.write("trajectory.csv", traj.to_csv())?;
    if cfg.output.snapshot_stride > 0 {
        for (i, s) in traj.states.iter().enumerate().step_by(cfg.output.snapshot_stride) {
            out.write(&format!("snapshots/state_{i:06}.loop"), s.to_columnar())?;
        }
    }
    let decay = decay_fit(&traj, cfg.flow.tail_fraction).map_or_else(|e| error_json(&e), |d| json!(d));
    let limit = if traj.converged {
        let m = limit_point(&space, &traj)?;
        json!({
            "sector": label(&m.datum.sector),
            "eta0": m.datum.eta0.0,
            "base": point_json(&m.datum.base),
            "distance": m.distance,
        })
    } else {
        Value::Null
    };
    let last = traj.len() - 1;
    let summary = json!({
        "converged": traj.converged,
        "final_time": traj.times[last],
        "final_grad_norm": traj.final_grad_norm(),
        "records": traj.len(),
        "energy": {
            "action_drop": traj.action_drop[last],
            "topological": traj.topological_energy(&space),
            "ymh": traj.ymh_energy[last],
            "grad_sq_integral": traj.grad_sq_integral[last],
        },
        "decay": decay,
        "limit": limit,
    });
    out.write_json("flow.json", &summary)
}

fn run_crit(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, grid) = model(cfg)?;
    let data = critical_data(cfg, &space, &grid)?;
    let mut table = format!("{:<8} {:<12} {:>10} {:>12}\n", "sector", "fixed", "eta0", "residual");
    let mut rows = Vec::new();
    for d in &data {
        let residual = grad_action(&space, &d.loop_point).norm(&grid);
        let fixed: Vec<String> = d.sector.fixed_dims.iter().map(|j| (j + 1).to_string()).collect();
        let _ =
            writeln!(table, "{:<8} {:<12} {:>10.6} {:>12.3e}", label(&d.sector), fixed.join(","), d.eta0.0, residual);
        rows.push(json!({
            "sector": label(&d.sector),
            "fixed_coordinates": d.sector.fixed_dims.iter().map(|j| j + 1).collect::<Vec<_>>(),
            "eta0": d.eta0.0,
            "base": point_json(&d.base),
            "residual": residual,
        }));
        out.write(&format!("critical_m{}_k{}.loop", d.sector.m, d.sector.k), d.loop_point.to_columnar())?;
    }
    out.write("sectors.txt", table)?;
    out.write_json("critical.json", &json!(rows))
}

fn run_hessian(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, grid) = model(cfg)?;
    let mut csv = String::from("sector,size,kernel_dim,gap,asymmetry,min_eigenvalue,max_eigenvalue\n");
    for d in critical_data(cfg, &space, &grid)? {
        let raw = hessian_raw(&space, &d.loop_point);
        let asym = asymmetry(&raw);
        let report = spectral_report(&hessian_matrix(&space, &d), None)?;
        let ev = &report.eigenvalues;
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{:e},{:e},{:e}",
            label(&d.sector),
            ev.len(),
            report.kernel_dim,
            report.gap,
            asym,
            ev[0],
            ev[ev.len() - 1]
        );
        let value = json!({ "sector": label(&d.sector), "asymmetry": asym, "spectrum": report });
        out.write_json(&format!("hessian_m{}_k{}.json", d.sector.m, d.sector.k), &value)?;
    }
    out.write("hessian.csv", csv)
}

fn run_scan(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, grid) = model(cfg)?;
    let mut rows = Vec::new();
    for d in critical_data(cfg, &space, &grid)? {
        let report = spectral_report(&hessian_matrix(&space, &d), None)?;
        let scan = crucial_inequality_scan(&space, &d, cfg.scan.eps, cfg.scan.samples, cfg.scan.rng_seed)?;
        rows.push(json!({
            "sector": label(&d.sector),
            "gap": report.gap,
            "prediction": quadratic_prediction(report.gap),
            "scan": scan,
        }));
    }
    out.write_json("scan.json", &json!(rows))
}

fn run_index(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let rows = cfg.index_queries()?.iter().map(IndexRow::evaluate).collect::<Result<Vec<_>>>()?;
    out.write("index.txt", format_table(&rows))?;
    out.write("index.csv", format_csv(&rows))
}

fn run_webs(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let model = cfg.energy_model()?;
    let mut csv = String::from("B,k,genus,webs,relations,hasse_edges,maximal,poset\n");
    for &b in &cfg.webs.classes {
        for &k in &cfg.webs.ends {
            for &g in &cfg.webs.genera {
                let webs = enumerate_webs(model, b, k, g)?;
                let report = poset_check(&webs);
                let stem = format!("webs_B{b}_k{k}_g{g}");
                let text: String = webs.iter().map(|w| w.encode() + "\n").collect();
                let trees: String = webs.iter().enumerate().map(|(i, w)| w.to_dot(&format!("w{i}"))).collect();
                out.write(&format!("{stem}.txt"), text)?;
                out.write(&format!("{stem}_trees.dot"), trees)?;
                out.write(&format!("{stem}_hasse.dot"), hasse_dot(&webs))?;
                let _ = writeln!(
                    csv,
                    "{b},{k},{g},{},{},{},{},{}",
                    report.elements,
                    report.relations,
                    report.hasse_edges,
                    report.maximal.len(),
                    report.is_poset()
                );
            }
        }
    }
    out.write("webs.csv", csv)
}

fn run_energy(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, grid) = model(cfg)?;
    let mut csv = String::from("field,lhs,rhs,gap,residual,topological,dbar,curvature\n");
    let mut row = |name: String, f: &CylinderField| {
        let e = energy_identity_check(&space, f);
        let (dbar, curv) = vortex_residual(&space, f);
        let _ = writeln!(
            csv,
            "{name},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            e.lhs, e.rhs, e.gap, e.residual, e.topological, dbar, curv
        );
    };
    for i in 0..cfg.energy.fields {
        let seed = cfg.scan.rng_seed.wrapping_add(i as u64);
        let f = random_smooth_field(space.dim(), &grid, cfg.energy.n_t, seed)?;
        row(format!("random:{seed}"), &f);
    }
    let (_, traj) = seeded_flow(cfg, cfg.energy.t_flow)?;
    let f = CylinderField::from_trajectory(&traj)?;
    row("flow".to_string(), &f);
    out.write("energy_identity.csv", csv)
}

fn run_period(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (space, grid) = model(cfg)?;
    let field = random_smooth_field(space.dim(), &grid, MIN_TIME_NODES, cfg.scan.rng_seed)?;
    let fit = action_period_probe(&space, &field.slices[0], cfg.period.max_winding)?;
    let value = json!({
        "period": fit.period,
        "slope": fit.slope,
        "increments": fit.increments,
        "relative_residual": fit.relative_residual,
        "two_pi_tau": TAU * space.tau(),
    });
    out.write_json("period.json", &value)
}
