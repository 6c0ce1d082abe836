//! Offline, reduce, online and analyze stages over a shared output directory.
//!
//! Layout under the output directory (`<s>` is `monolithic` or `partitioned`):
//! `mesh.fsirom`, `mesh_stats.csv`, `<s>/snapshots/*.fsirom`, `<s>/trajectory/*.fsirom`,
//! `<s>/basis/*.fsirom` with `eigenvalues_*.csv` and `energy_*.csv`, `<s>/rom/...` and
//! `<s>/analysis/...`. Every stage updates `manifest.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::analysis::{error_analysis, ErrorReport, SeriesPair};
use super::config::{Config, OnlineConfig};
use super::csv::{energy_csv, error_summary_csv, errors_csv, eigenvalues_csv, iterations_csv, stress_csv};
use super::manifest::OutputDir;
use super::snapfile::{SnapFile, SnapKind};
use crate::error::{FsiError, Result};
use crate::fem::{FeSpace, FieldVec};
use crate::mesh::{generate_benchmark_mesh, write_mesh, Mesh, Subdomain};
use crate::offline_monolithic::{run_offline_monolithic, MonoField, MonolithicProblem, MonolithicSpaces, MonolithicState, SUPREMIZER, U0};
use crate::offline_partitioned::{run_offline_partitioned, PartitionedProblem, PartitionedSpaces, PartitionedState, D_S, P0, Z};
use crate::online_rom::{coefficients_csv, monolithic_norm, MonolithicBases, MonolithicRom, PartitionedBases, PartitionedRom};
use crate::reduction::{pod, InnerProduct, NormKind, ReducedBasis, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Monolithic,
    Partitioned,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Monolithic => "monolithic",
            Scheme::Partitioned => "partitioned",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monolithic" => Ok(Scheme::Monolithic),
            "partitioned" => Ok(Scheme::Partitioned),
            _ => Err(FsiError::Invalid(format!("unknown scheme '{s}' (monolithic|partitioned)"))),
        }
    }
}

/// Monolithic trajectory fields, stored one column per step.
const MONO_TRAJ: [&str; 8] = ["u", "p", "d_f", "d_s", "lambda_u", "lambda_d", "v_s", "a_s"];
const PART_TRAJ: [&str; 4] = ["u", "p", "d_f", "d_s"];
/// Fields compared by `analyze`.
const ANALYZED: [&str; 4] = ["u", "p", "d_f", "d_s"];

fn mesh_of(cfg: &Config) -> Result<Arc<Mesh>> {
    Ok(Arc::new(generate_benchmark_mesh(&cfg.geometry)?))
}

pub fn monolithic_problem(cfg: &Config) -> Result<MonolithicProblem> {
    let sp = MonolithicSpaces::new(&mesh_of(cfg)?, cfg.fem.pressure_order)?;
    MonolithicProblem::new(sp, cfg.physics, cfg.time_monolithic)
}

pub fn partitioned_problem(cfg: &Config) -> Result<PartitionedProblem> {
    if cfg.fem.pressure_order != 1 {
        return Err(FsiError::Invalid("the partitioned scheme uses a P1 pressure".into()));
    }
    PartitionedProblem::new(PartitionedSpaces::new(&mesh_of(cfg)?)?, cfg.physics, cfg.time_partitioned)
}

fn write_snap(out: &mut OutputDir, rel: &str, f: &SnapFile) -> Result<()> {
    out.write(rel, &f.encode()).map(|_| ())
}

fn load_snap(out: &OutputDir, rel: &str) -> Result<SnapFile> {
    SnapFile::load(out.path(rel))
}

fn trajectory_file(name: &str, space: &Arc<FeSpace>, cols: Vec<Vec<f64>>) -> SnapFile {
    SnapFile { field: name.to_string(), kind: SnapKind::Snapshot, space: space.descriptor(), rows: space.n_dofs(), columns: cols }
}

/// Column `k` of a trajectory file as a field.
fn column(f: &SnapFile, space: &Arc<FeSpace>, k: usize) -> Result<FieldVec> {
    let c = f.columns.get(k).ok_or_else(|| FsiError::Invalid(format!("{} has no column for step {k}", f.field)))?;
    FieldVec::from_values(space, c.clone())
}

pub fn run_mesh(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry"])?;
    let mesh = mesh_of(cfg)?;
    out.write("mesh.fsirom", write_mesh(&mesh).as_bytes())?;
    let mut s = String::from("nodes,triangles,fluid_cells,solid_cells,interface_edges,min_angle_deg,fluid_area,solid_area\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{},{:e},{:e},{:e}",
        mesh.nodes().len(),
        mesh.triangles().len(),
        mesh.cells_of(Subdomain::Fluid).count(),
        mesh.cells_of(Subdomain::Solid).count(),
        mesh.interface_edges().len(),
        mesh.min_angle_deg(),
        mesh.subdomain_area(Subdomain::Fluid),
        mesh.subdomain_area(Subdomain::Solid)
    );
    out.write("mesh_stats.csv", s.as_bytes())?;
    Ok(())
}

pub fn run_offline_monolithic_stage(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry", "physics", "time_monolithic"])?;
    let prob = monolithic_problem(cfg)?;
    let run = run_offline_monolithic(&prob, cfg.time_monolithic.n_steps, |s, r| {
        log::info!("monolithic step {} t={:.4} newton {}", s.step, s.t, r.newton.iterations)
    })?;
    for s in run.snapshots.values() {
        write_snap(out, &format!("monolithic/snapshots/{}.fsirom", s.name), &SnapFile::from_snapshots(s))?;
    }
    let sp = &prob.spaces;
    for (name, f) in MONO_TRAJ.iter().zip([MonoField::U, MonoField::P, MonoField::Df, MonoField::Ds, MonoField::Lu, MonoField::Ld]) {
        let cols = run.states.iter().map(|s| s.field(f).values.clone()).collect();
        write_snap(out, &format!("monolithic/trajectory/{name}.fsirom"), &trajectory_file(name, sp.space(f), cols))?;
    }
    let v_s = run.states.iter().map(|s| s.v_s.values.clone()).collect();
    let a_s = run.states.iter().map(|s| s.a_s.values.clone()).collect();
    write_snap(out, "monolithic/trajectory/v_s.fsirom", &trajectory_file("v_s", &sp.es, v_s))?;
    write_snap(out, "monolithic/trajectory/a_s.fsirom", &trajectory_file("a_s", &sp.es, a_s))?;
    out.write("monolithic/newton.csv", iterations_csv(run.reports.iter().enumerate().map(|(k, r)| (k + 1, r.newton.iterations))).as_bytes())?;
    Ok(())
}

pub fn run_offline_partitioned_stage(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry", "physics", "time_partitioned"])?;
    let prob = partitioned_problem(cfg)?;
    let run = run_offline_partitioned(&prob, cfg.time_partitioned.n_steps, |s, r| {
        log::info!("partitioned step {} t={:.5} iterations {}", s.step, s.t, r.iterations)
    })?;
    for s in run.snapshots.values() {
        write_snap(out, &format!("partitioned/snapshots/{}.fsirom", s.name), &SnapFile::from_snapshots(s))?;
    }
    let sp = &prob.spaces;
    let spaces = [&sp.v, &sp.q, &sp.v, &sp.es];
    for (name, space) in PART_TRAJ.iter().zip(spaces) {
        let cols = run
            .states
            .iter()
            .map(|s| match *name {
                "u" => s.u.values.clone(),
                "p" => s.p.values.clone(),
                "d_f" => s.d_f.values.clone(),
                _ => s.d_s.values.clone(),
            })
            .collect();
        write_snap(out, &format!("partitioned/trajectory/{name}.fsirom"), &trajectory_file(name, space, cols))?;
    }
    let mut pb = String::from("step,p_bar\n");
    for (k, v) in run.p_bar.iter().enumerate() {
        let _ = writeln!(pb, "{},{v:e}", k + 1);
    }
    out.write("partitioned/p_bar.csv", pb.as_bytes())?;
    out.write("partitioned/iterations.csv", iterations_csv(run.reports.iter().enumerate().map(|(k, r)| (k + 1, r.iterations))).as_bytes())?;
    Ok(())
}

fn save_basis(out: &mut OutputDir, dir: &str, b: &ReducedBasis) -> Result<()> {
    write_snap(out, &format!("{dir}/{}.fsirom", b.name), &SnapFile::from_basis(b))?;
    out.write(&format!("{dir}/eigenvalues_{}.csv", b.name), eigenvalues_csv(&b.eigenvalues).as_bytes())?;
    if !b.eigenvalues.is_empty() {
        out.write(&format!("{dir}/energy_{}.csv", b.name), energy_csv(&b.eigenvalues)?.as_bytes())?;
    }
    Ok(())
}

fn load_basis(out: &OutputDir, dir: &str, name: &str, space: &Arc<FeSpace>) -> Result<ReducedBasis> {
    let text = std::fs::read_to_string(out.path(&format!("{dir}/eigenvalues_{name}.csv")))
        .map_err(|e| FsiError::io(out.path(&format!("{dir}/eigenvalues_{name}.csv")), e))?;
    let eig = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()).ok_or_else(|| FsiError::Invalid(format!("bad eigenvalue line '{l}'"))))
        .collect::<Result<Vec<f64>>>()?;
    load_snap(out, &format!("{dir}/{name}.fsirom"))?.into_basis(space, eig)
}

fn load_snapshot_set(out: &OutputDir, rel: &str, space: &Arc<FeSpace>) -> Result<SnapshotSet> {
    load_snap(out, rel)?.into_snapshots(space)
}

pub fn run_reduce(cfg: &Config, scheme: Scheme, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry", "physics", "pod"])?;
    match scheme {
        Scheme::Monolithic => {
            let prob = monolithic_problem(cfg)?;
            let sp = &prob.spaces;
            let fields = [(U0, &sp.v), (SUPREMIZER, &sp.v), ("p", &sp.q), ("d_f", &sp.v), ("d_s", &sp.es), ("lambda_u", &sp.l), ("lambda_d", &sp.l)];
            for (name, space) in fields {
                let s = load_snapshot_set(out, &format!("monolithic/snapshots/{name}.fsirom"), space)?;
                let ip = InnerProduct::new(space, monolithic_norm(name).expect("known field"))?;
                save_basis(out, "monolithic/basis", &pod(&s, &ip, cfg.pod.select)?)?;
            }
        }
        Scheme::Partitioned => {
            let prob = partitioned_problem(cfg)?;
            let sp = &prob.spaces;
            let x_z = InnerProduct::new(&sp.v, NormKind::H1Seminorm)?;
            let mut pods = BTreeMap::new();
            for (name, space, ip) in [(Z, &sp.v, &x_z), (P0, &sp.q, &prob.x_p), (D_S, &sp.es, &prob.x_d)] {
                let s = load_snapshot_set(out, &format!("partitioned/snapshots/{name}.fsirom"), space)?;
                let b = pod(&s, ip, cfg.pod.select)?;
                save_basis(out, "partitioned/basis", &b)?;
                pods.insert(name.to_string(), b);
            }
            let all = crate::online_rom::PartSizes::uniform(usize::MAX);
            let bases = PartitionedBases::build(&pods, all, &prob)?;
            save_basis(out, "partitioned/basis", &bases.d_f)?;
        }
    }
    Ok(())
}

/// Applies `--modes`: either one count for every field, or `key=value` pairs separated by commas
/// using the keys of the `[online]` section.
pub fn apply_modes(online: &mut OnlineConfig, modes: &str) -> Result<()> {
    let bad = |m: String| FsiError::Invalid(format!("--modes: {m}"));
    if let Ok(n) = modes.trim().parse::<usize>() {
        let keep = (online.mono.n_lu, online.mono.n_ld, online.mono.n_sup == 0);
        online.mono = crate::online_rom::MonoSizes::uniform(n, 0);
        (online.mono.n_lu, online.mono.n_ld) = (keep.0, keep.1);
        if keep.2 {
            online.mono.n_sup = 0;
        }
        online.part = crate::online_rom::PartSizes::uniform(n);
        return Ok(());
    }
    for item in modes.split(',') {
        let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("expected key=value, got '{item}'")))?;
        let v: usize = v.trim().parse().map_err(|_| bad(format!("'{v}' is not a count")))?;
        let m = &mut online.mono;
        let p = &mut online.part;
        match k.trim() {
            "n_u" => m.n_u = v,
            "n_sup" => m.n_sup = v,
            "n_p" => m.n_p = v,
            "n_df" => m.n_df = v,
            "n_ds" => m.n_ds = v,
            "n_lambda" => (m.n_lu, m.n_ld) = (v, v),
            "n_lambda_u" => m.n_lu = v,
            "n_lambda_d" => m.n_ld = v,
            "n_z" => p.n_z = v,
            "n_p0" => p.n_p = v,
            "n_ds_part" => p.n_ds = v,
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }
    Ok(())
}

fn rom_window(cfg: &Config, available: usize) -> Result<(usize, usize)> {
    let o = &cfg.online;
    if o.start_step >= available {
        return Err(FsiError::Invalid(format!("start_step {} but the offline trajectory has {available} states", o.start_step)));
    }
    Ok((o.start_step, o.n_steps))
}

fn write_rom_run(out: &mut OutputDir, scheme: Scheme, start: usize, n_done: usize) -> Result<()> {
    out.write(&format!("{}/rom/run.csv", scheme.as_str()), format!("start_step,n_steps\n{start},{n_done}\n").as_bytes())?;
    Ok(())
}

pub fn run_online_monolithic(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry", "physics", "time_monolithic", "online"])?;
    let prob = monolithic_problem(cfg)?;
    let sp = &prob.spaces;
    let mut pods = BTreeMap::new();
    for (name, space) in [(U0, &sp.v), (SUPREMIZER, &sp.v), ("p", &sp.q), ("d_f", &sp.v), ("d_s", &sp.es), ("lambda_u", &sp.l), ("lambda_d", &sp.l)] {
        pods.insert(name.to_string(), load_basis(out, "monolithic/basis", name, space)?);
    }
    let bases = MonolithicBases::build(&pods, cfg.online.mono, sp)?;
    log::info!("monolithic reduced dimensions {:?}", bases.dims());
    let traj: Vec<SnapFile> = MONO_TRAJ.iter().map(|n| load_snap(out, &format!("monolithic/trajectory/{n}.fsirom"))).collect::<Result<_>>()?;
    let (k0, n) = rom_window(cfg, traj[0].columns.len())?;
    let spaces = [&sp.v, &sp.q, &sp.v, &sp.es, &sp.l, &sp.l, &sp.es, &sp.es];
    let at = |i: usize, k: usize| column(&traj[i], spaces[i], k);
    let dt = prob.time.dt;
    let fe = MonolithicState {
        step: k0,
        t: k0 as f64 * dt,
        u: at(0, k0)?,
        p: at(1, k0)?,
        d_f: at(2, k0)?,
        d_s: at(3, k0)?,
        l_u: at(4, k0)?,
        l_d: at(5, k0)?,
        u_prev: if k0 > 0 { Some(at(0, k0 - 1)?) } else { None },
        d_f_prev: if k0 > 0 { Some(at(2, k0 - 1)?) } else { None },
        v_s: at(6, k0)?,
        a_s: at(7, k0)?,
    };
    let mut rom = MonolithicRom::new(&prob, bases)?;
    rom.newton.tol = cfg.online.newton_tol;
    if let Some(f) = cfg.online.pressure_limit_factor {
        let x_p = &rom.bases.norms[MonoField::P.index()];
        let max = traj[1].columns.iter().map(|c| x_p.norm(c)).fold(0.0, f64::max);
        rom.pressure_limit = Some(f * max);
    }
    let start = rom.restart(&fe)?;
    let mut states = vec![start.clone()];
    let mut newton = Vec::new();
    let result = rom.run(start, n, |s, r| {
        log::info!("reduced monolithic step {} newton {} |p| {:e}", s.full.step, r.newton.iterations, r.pressure_norm);
        states.push(s.clone());
        newton.push((s.full.step, r.newton.iterations));
    });
    // Whatever was computed is written, also when the run stopped early.
    let mut rows = Vec::new();
    for s in states.iter().step_by(cfg.io.write_every) {
        for f in MonoField::ALL {
            rows.push((s.full.step, f.name(), rom.field_coeffs(s, f)));
        }
    }
    out.write("monolithic/rom/coefficients.csv", coefficients_csv(&rows).as_bytes())?;
    for (i, name) in MONO_TRAJ.iter().enumerate().take(6) {
        let f = MonoField::ALL[i];
        let cols = states.iter().map(|s| s.full.field(f).values.clone()).collect();
        write_snap(out, &format!("monolithic/rom/trajectory/{name}.fsirom"), &trajectory_file(name, spaces[i], cols))?;
    }
    out.write("monolithic/rom/newton.csv", iterations_csv(newton).as_bytes())?;
    write_rom_run(out, Scheme::Monolithic, k0, states.len() - 1)?;
    result.map(|_| ())
}

pub fn run_online_partitioned(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.require(&["geometry", "physics", "time_partitioned", "online"])?;
    let prob = partitioned_problem(cfg)?;
    let sp = &prob.spaces;
    let mut pods = BTreeMap::new();
    for (name, space) in [(Z, &sp.v), (P0, &sp.q), (D_S, &sp.es)] {
        pods.insert(name.to_string(), load_basis(out, "partitioned/basis", name, space)?);
    }
    let bases = PartitionedBases::build(&pods, cfg.online.part, &prob)?;
    let traj: Vec<SnapFile> = PART_TRAJ.iter().map(|n| load_snap(out, &format!("partitioned/trajectory/{n}.fsirom"))).collect::<Result<_>>()?;
    let (k0, n) = rom_window(cfg, traj[0].columns.len())?;
    let spaces = [&sp.v, &sp.q, &sp.v, &sp.es];
    let dt = prob.time.dt;
    let state = |k: usize, prev_ds: usize| -> Result<PartitionedState> {
        Ok(PartitionedState {
            step: k,
            t: k as f64 * dt,
            u: column(&traj[0], spaces[0], k)?,
            p: column(&traj[1], spaces[1], k)?,
            d_f: column(&traj[2], spaces[2], k)?,
            d_s: column(&traj[3], spaces[3], k)?,
            d_s_prev: column(&traj[3], spaces[3], prev_ds)?,
        })
    };
    let cur = state(k0, k0.saturating_sub(1))?;
    let prev = if k0 > 0 { state(k0 - 1, k0.saturating_sub(2))? } else { cur.clone() };
    let p_bar = if k0 > 0 {
        let text = std::fs::read_to_string(out.path("partitioned/p_bar.csv")).map_err(|e| FsiError::io(out.path("partitioned/p_bar.csv"), e))?;
        let line = text.lines().nth(k0).ok_or_else(|| FsiError::Invalid(format!("p_bar.csv has no entry for step {k0}")))?;
        line.split(',').nth(1).and_then(|v| v.parse().ok()).ok_or_else(|| FsiError::Invalid(format!("bad p_bar line '{line}'")))?
    } else {
        0.0
    };
    let mut rom = PartitionedRom::new(&prob, bases)?;
    rom.eps = cfg.online.eps;
    rom.newton.tol = cfg.online.newton_tol;
    let start = rom.restart(&prev, &cur, p_bar)?;
    let mut states = vec![start.clone()];
    let mut iterations = Vec::new();
    let result = rom.run(start, n, |s, r| {
        log::info!("reduced partitioned step {} iterations {}", s.full.step, r.iterations);
        states.push(s.clone());
        iterations.push((s.full.step, r.iterations));
    });
    let mut rows = Vec::new();
    for s in states.iter().step_by(cfg.io.write_every) {
        rows.push((s.full.step, Z, s.z.as_slice()));
        rows.push((s.full.step, P0, s.p.as_slice()));
        rows.push((s.full.step, D_S, s.d_s.as_slice()));
    }
    out.write("partitioned/rom/coefficients.csv", coefficients_csv(&rows).as_bytes())?;
    for (i, name) in PART_TRAJ.iter().enumerate() {
        let cols = states
            .iter()
            .map(|s| match i {
                0 => s.full.u.values.clone(),
                1 => s.full.p.values.clone(),
                2 => s.full.d_f.values.clone(),
                _ => s.full.d_s.values.clone(),
            })
            .collect();
        write_snap(out, &format!("partitioned/rom/trajectory/{name}.fsirom"), &trajectory_file(name, spaces[i], cols))?;
    }
    out.write("partitioned/rom/iterations.csv", iterations_csv(iterations).as_bytes())?;
    write_rom_run(out, Scheme::Partitioned, k0, states.len() - 1)?;
    result.map(|_| ())
}

fn read_run(out: &OutputDir, scheme: Scheme) -> Result<(usize, usize)> {
    let p = out.path(&format!("{}/rom/run.csv", scheme.as_str()));
    let text = std::fs::read_to_string(&p).map_err(|e| FsiError::io(&p, e))?;
    let line = text.lines().nth(1).ok_or_else(|| FsiError::Invalid(format!("{}: empty", p.display())))?;
    let v: Vec<usize> = line.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| FsiError::Invalid(format!("{}: bad line '{line}'", p.display())))?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(FsiError::Invalid(format!("{}: bad line '{line}'", p.display()))),
    }
}

/// Error report of one scheme's reduced run against its offline trajectory. The initial
/// (projected) state is excluded.
pub fn analyze_scheme(cfg: &Config, scheme: Scheme, out: &OutputDir) -> Result<ErrorReport> {
    let (k0, n) = read_run(out, scheme)?;
    let s = scheme.as_str();
    let (v, q, es): (Arc<FeSpace>, Arc<FeSpace>, Arc<FeSpace>) = match scheme {
        Scheme::Monolithic => {
            let sp = MonolithicSpaces::new(&mesh_of(cfg)?, cfg.fem.pressure_order)?;
            (sp.v, sp.q, sp.es)
        }
        Scheme::Partitioned => {
            let sp = PartitionedSpaces::new(&mesh_of(cfg)?)?;
            (sp.v, sp.q, sp.es)
        }
    };
    let spaces = [&v, &q, &v, &es];
    let kinds = [NormKind::H1Seminorm, NormKind::L2Volume, NormKind::H1Seminorm, NormKind::H1Seminorm];
    let steps: Vec<usize> = (k0 + 1..=k0 + n).collect();
    let mut fe_cols = Vec::new();
    let mut rom_cols = Vec::new();
    let mut norms = Vec::new();
    for (i, name) in ANALYZED.iter().enumerate() {
        let fe = load_snap(out, &format!("{s}/trajectory/{name}.fsirom"))?;
        let rom = load_snap(out, &format!("{s}/rom/trajectory/{name}.fsirom"))?;
        for f in [&fe, &rom] {
            if f.space != spaces[i].descriptor() || f.rows != spaces[i].n_dofs() {
                return Err(FsiError::Invalid(format!("{s}/{name}: stored on {} but the configuration gives {}", f.space, spaces[i].descriptor())));
            }
        }
        if fe.columns.len() <= k0 + n || rom.columns.len() != n + 1 {
            return Err(FsiError::Dimension(format!("{s}/{name}: trajectories do not cover steps {}..={}", k0 + 1, k0 + n)));
        }
        fe_cols.push(fe.columns[k0 + 1..=k0 + n].to_vec());
        rom_cols.push(rom.columns[1..].to_vec());
        norms.push(InnerProduct::new(spaces[i], kinds[i])?);
    }
    let pairs: Vec<SeriesPair> = (0..ANALYZED.len())
        .map(|i| SeriesPair { field: ANALYZED[i], steps: &steps, fe: &fe_cols[i], rom: &rom_cols[i], norm: &norms[i] })
        .collect();
    let to_fields = |cols: &[Vec<f64>]| cols.iter().map(|c| FieldVec::from_values(&es, c.clone())).collect::<Result<Vec<_>>>();
    let (fe_d, rom_d) = (to_fields(&fe_cols[3])?, to_fields(&rom_cols[3])?);
    error_analysis(&pairs, Some((&steps, &fe_d, &rom_d, cfg.physics.mu_s, cfg.physics.lambda_s)))
}

/// Analyzes every scheme with a reduced run in the output directory.
pub fn run_analyze(cfg: &Config, out: &mut OutputDir) -> Result<Vec<(Scheme, ErrorReport)>> {
    cfg.require(&["geometry", "physics"])?;
    let mut reports = Vec::new();
    for scheme in [Scheme::Monolithic, Scheme::Partitioned] {
        if !out.path(&format!("{}/rom/run.csv", scheme.as_str())).exists() {
            continue;
        }
        let rep = analyze_scheme(cfg, scheme, out)?;
        let dir = format!("{}/analysis", scheme.as_str());
        out.write(&format!("{dir}/errors.csv"), errors_csv(&rep).as_bytes())?;
        out.write(&format!("{dir}/error_summary.csv"), error_summary_csv(&rep).as_bytes())?;
        if let Some(st) = &rep.stress {
            out.write(&format!("{dir}/stress_errors.csv"), stress_csv(st).as_bytes())?;
        }
        reports.push((scheme, rep));
    }
    if reports.is_empty() {
        return Err(FsiError::Invalid(format!("no reduced runs found under {}", out.root().display())));
    }
    Ok(reports)
}

/// Loads a configuration, or the built-in defaults with every section marked present.
pub fn config_or_default(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => super::config::parse_config(p),
        None => Ok(Config { present: super::config::SECTIONS.iter().map(|s| s.to_string()).collect(), ..Config::default() }),
    }
}
