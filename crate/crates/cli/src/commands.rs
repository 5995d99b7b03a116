use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use polyvem::cahn_hilliard::{run_manufactured_convergence, run_spinodal, write_frame};
use polyvem::convergence::CsvLayout;
use polyvem::elastodynamics::{
    p_refinement_csv, run_benchmark_convergence, run_p_refinement, InitialData, Material, BENCHMARK_DT_MAX, BENCHMARK_T_END,
};
use polyvem::field::{ScalarField, SineBump, SquaredSineBump};
use polyvem::mesh::{
    check_regularity, generate_hexagonal_distorted, generate_nonconvex_octagons, generate_randomized_quads,
    generate_structured_quads, generate_voronoi, read_mesh_file, write_mesh_file, PolygonalMesh, DEFAULT_QUAD_JITTER,
};
use polyvem::poly_basis::BasisKind;
use polyvem::vem_poly::{convergence_study, solve_polyharmonic, PolyOrder};
use polyvem::Vec2;

use crate::config::RunConfig;
use crate::CliError;

pub fn dispatch(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    match name {
        "mesh-gen" => mesh_gen(cfg),
        "solve-poly" => solve_poly(cfg),
        "converge-poly" => converge_poly(cfg),
        "converge-ch" => converge_ch(cfg),
        "spinodal" => spinodal(cfg),
        "converge-elasto" => converge_elasto(cfg),
        "p-refine" => p_refine(cfg),
        "check-mesh" => check_mesh(cfg),
        other => Err(CliError::Usage(format!("unknown subcommand {other}"))),
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

/// The mesh file when one is given, else the generator at resolution
/// `n * 2^level`.
fn mesh_at(cfg: &RunConfig, family_default: &str, n_default: usize, level: usize) -> Result<PolygonalMesh, CliError> {
    if let Some(path) = cfg.get_opt("mesh") {
        return read_mesh_file(&path).map_err(|e| CliError::Mesh(format!("cannot read mesh {path}: {e}")));
    }
    let family = cfg.get("family", family_default.to_owned())?;
    // voronoi resolution is a seed count: quadruple it to halve h
    let n = cfg.get("n", n_default)? << if family == "voronoi" { 2 * level } else { level };
    let seed = cfg.get("seed", 1u64)?;
    let mesh = match family.as_str() {
        "quads" => generate_structured_quads(n),
        "quads-random" => generate_randomized_quads(n, cfg.get("jitter", DEFAULT_QUAD_JITTER)?, seed).map(|r| r.mesh),
        "hexagons" => generate_hexagonal_distorted(n),
        "octagons" => generate_nonconvex_octagons(n),
        "voronoi" => generate_voronoi(n, seed, cfg.get("lloyd-iters", 20usize)?).map(|r| r.mesh),
        f => return Err(CliError::Usage(format!("unknown mesh family '{f}'"))),
    };
    mesh.map_err(|e| CliError::Usage(e.to_string()))
}

/// Meshes at n, 2n, 4n, ... (a single mesh when a file is given).
fn mesh_levels(cfg: &RunConfig, family_default: &str, n_default: usize, levels: usize) -> Result<Vec<PolygonalMesh>, CliError> {
    if cfg.get_opt("mesh").is_some() {
        return Ok(vec![mesh_at(cfg, family_default, n_default, 0)?]);
    }
    (0..levels).map(|i| mesh_at(cfg, family_default, n_default, i)).collect()
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.get("out", "polyvem-out".to_owned())?);
    std::fs::create_dir_all(&dir).map_err(|e| other(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| other(format!("cannot write {}: {e}", path.display())))
}

fn finish(cfg: &RunConfig, dir: &Path, files: &[&str]) -> Result<(), CliError> {
    cfg.write_echo(&dir.join("run.cfg"))?;
    for f in files {
        println!("{}", dir.join(f).display());
    }
    Ok(())
}

fn poly_order(cfg: &RunConfig) -> Result<PolyOrder, CliError> {
    let p = cfg.get("p", 1usize)?;
    let r = cfg.get("r", p)?;
    PolyOrder::new(p, r).map_err(|e| CliError::Discretization(e.to_string()))
}

/// Manufactured solution and load: `sin(pi x) sin(pi y)` for p = 1, its
/// square for p = 2.
fn poly_problem(p: usize) -> (Box<dyn ScalarField + Sync>, fn(Vec2) -> f64) {
    if p == 1 {
        (Box::new(SineBump), |x| 2.0 * std::f64::consts::PI.powi(2) * SineBump.value(x))
    } else {
        (Box::new(SquaredSineBump), SquaredSineBump::bilaplacian)
    }
}

fn basis(cfg: &RunConfig) -> Result<BasisKind, CliError> {
    match cfg.get("basis", "orthogonal".to_owned())?.as_str() {
        "orthogonal" => Ok(BasisKind::Orthogonal),
        "monomial" => Ok(BasisKind::Monomial),
        b => Err(CliError::Usage(format!("unknown basis '{b}'"))),
    }
}

fn material(cfg: &RunConfig) -> Result<Material, CliError> {
    Material::new(cfg.get("rho", 1.0)?, cfg.get("lambda", 1.0)?, cfg.get("mu", 1.0)?).map_err(|e| CliError::Usage(e.to_string()))
}

fn initial_data(cfg: &RunConfig) -> Result<InitialData, CliError> {
    match cfg.get("init", "elastic".to_owned())?.as_str() {
        "elastic" => Ok(InitialData::ElasticProjection),
        "interpolant" => Ok(InitialData::Interpolant),
        i => Err(CliError::Usage(format!("unknown initial data '{i}'"))),
    }
}

fn check_k(k: usize) -> Result<usize, CliError> {
    if k == 0 {
        return Err(CliError::Discretization("k must be at least 1".into()));
    }
    Ok(k)
}

fn mesh_gen(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_at(cfg, "quads", 8, 0)?;
    let out = PathBuf::from(cfg.get("out", "mesh.txt".to_owned())?);
    write_mesh_file(&mesh, &out).map_err(other)?;
    let mut echo = out.clone().into_os_string();
    echo.push(".cfg");
    cfg.write_echo(Path::new(&echo))?;
    println!("{}", out.display());
    Ok(())
}

fn solve_poly(cfg: &RunConfig) -> Result<(), CliError> {
    let order = poly_order(cfg)?;
    let mesh = mesh_at(cfg, "quads", 8, 0)?;
    let (exact, f) = poly_problem(order.p);
    let sol = solve_polyharmonic(&mesh, order.p, order.r, f, None)?;
    let e = sol.errors(exact.as_ref());
    let dir = out_dir(cfg)?;
    let mut values = String::from("x,y,u\n");
    for (v, x) in mesh.vertices().iter().enumerate() {
        let u = sol.u[sol.discretization.dofs().vertex_dof(v, 0)];
        let _ = writeln!(values, "{:.16e},{:.16e},{:.16e}", x.x, x.y, u);
    }
    write(&dir.join("solution.csv"), &values)?;
    let h2 = e.h2.map(|v| format!("{v:.16e}")).unwrap_or_default();
    let errors = format!(
        "h,dofs,errL2,errH1,errH2\n{:.16e},{},{:.16e},{:.16e},{}\n",
        mesh.max_diameter(),
        sol.discretization.n_dofs(),
        e.l2,
        e.h1,
        h2
    );
    write(&dir.join("errors.csv"), &errors)?;
    finish(cfg, &dir, &["solution.csv", "errors.csv"])
}

fn converge_poly(cfg: &RunConfig) -> Result<(), CliError> {
    let order = poly_order(cfg)?;
    let levels = cfg.get("levels", 4usize)?;
    let meshes = mesh_levels(cfg, "quads", 4, levels)?;
    let (exact, f) = poly_problem(order.p);
    let table = convergence_study(&meshes, order.p, order.r, f, exact.as_ref())?;
    let dir = out_dir(cfg)?;
    write(&dir.join("convergence.csv"), &table.to_csv(CsvLayout::Grouped))?;
    finish(cfg, &dir, &["convergence.csv"])
}

fn converge_ch(cfg: &RunConfig) -> Result<(), CliError> {
    let gamma = cfg.get("gamma", 0.1)?;
    let dt = cfg.get("dt", 1e-4)?;
    let t_end = cfg.get("t-end", 0.1)?;
    let levels = cfg.get("levels", 4usize)?;
    let meshes = mesh_levels(cfg, "quads", 16, levels)?;
    let table = run_manufactured_convergence(&meshes, gamma, dt, t_end)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("convergence.csv"), &table.to_csv(CsvLayout::Interleaved))?;
    finish(cfg, &dir, &["convergence.csv"])
}

fn spinodal(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_at(cfg, "voronoi", 64, 0)?;
    let run = run_spinodal(
        &mesh,
        cfg.get("gamma", 0.1)?,
        cfg.get("dt", 1e-4)?,
        cfg.get("steps", 200usize)?,
        cfg.get("state-seed", 1u64)?,
        cfg.get("frame-every", 20usize)?,
    )?;
    let dir = out_dir(cfg)?;
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).map_err(other)?;
    for (step, values) in &run.frames {
        write_frame(&frames.join(format!("frame_{step:06}.txt")), &mesh, values).map_err(other)?;
    }
    let mut history = String::from("step,mass,energy,newton\n");
    for (i, (m, e)) in run.mass.iter().zip(&run.energy).enumerate() {
        let newton = if i == 0 { String::new() } else { run.newton_iterations[i - 1].to_string() };
        let _ = writeln!(history, "{i},{m:.16e},{e:.16e},{newton}");
    }
    write(&dir.join("history.csv"), &history)?;
    finish(cfg, &dir, &["frames", "history.csv"])
}

fn converge_elasto(cfg: &RunConfig) -> Result<(), CliError> {
    let k = check_k(cfg.get("k", 1usize)?)?;
    let levels = cfg.get("levels", 4usize)?;
    let family = cfg.get_opt("family").unwrap_or_else(|| "quads-random".into());
    let n_default = if family == "octagons" { 1 } else { 4 };
    let meshes = mesh_levels(cfg, "quads-random", n_default, levels)?;
    let table = run_benchmark_convergence(
        &meshes,
        k,
        basis(cfg)?,
        material(cfg)?,
        initial_data(cfg)?,
        cfg.get("dt-max", BENCHMARK_DT_MAX)?,
        cfg.get("t-end", BENCHMARK_T_END)?,
    )?;
    let dir = out_dir(cfg)?;
    write(&dir.join("convergence.csv"), &table.to_csv(CsvLayout::Grouped))?;
    finish(cfg, &dir, &["convergence.csv"])
}

fn p_refine(cfg: &RunConfig) -> Result<(), CliError> {
    let k_max = check_k(cfg.get("k-max", 6usize)?)?;
    let mesh = mesh_at(cfg, "quads-random", 5, 0)?;
    let rows = run_p_refinement(
        &mesh,
        k_max,
        basis(cfg)?,
        material(cfg)?,
        initial_data(cfg)?,
        cfg.get("dt-max", BENCHMARK_DT_MAX)?,
        cfg.get("t-end", BENCHMARK_T_END)?,
    )?;
    let dir = out_dir(cfg)?;
    write(&dir.join("p_refinement.csv"), &p_refinement_csv(&rows))?;
    finish(cfg, &dir, &["p_refinement.csv"])
}

fn check_mesh(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = mesh_at(cfg, "quads", 8, 0)?;
    let report = check_regularity(&mesh, cfg.get("gamma", 0.3)?);
    let mut csv = String::from("cell,min_edge_ratio,radius_ratio,star_shaped,m1,m2\n");
    for (c, r) in report.cells.iter().enumerate() {
        let _ =
            writeln!(csv, "{c},{:.16e},{:.16e},{},{},{}", r.min_edge_ratio, r.radius_ratio, r.star_shaped, r.m1_pass, r.m2_pass);
    }
    let dir = out_dir(cfg)?;
    write(&dir.join("regularity.csv"), &csv)?;
    println!(
        "cells {}  measured gamma {:.6}  {} at gamma = {}",
        mesh.num_cells(),
        report.measured_gamma,
        if report.pass { "PASS" } else { "FAIL" },
        report.gamma
    );
    finish(cfg, &dir, &["regularity.csv"])
}
