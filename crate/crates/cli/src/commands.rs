//! Subcommand implementations. Each writes its files into the output directory
//! and returns a short summary for stdout.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use motility_core::acceptance;
use motility_core::model::{chi_c_star, resting_state};
use motility_core::special::newton::NewtonOptions;
use motility_core::stability::{classify, mode_spectrum_with, SpectrumOptions};
use motility_core::traveling_wave::{continue_branch_with, Branch, BranchOptions, TravelingWaveState, TwError};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.output.directory.as_path();
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
struct RestingSummary {
    c0: f64,
    p0: f64,
    r0: f64,
    chi_c: f64,
    chi_c_star: f64,
    verdict: String,
    margin: Option<f64>,
    unstable_modes: Vec<u32>,
    modes_without_roots: Vec<u32>,
}

pub fn resting(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (fa, fu) = cfg.laws()?;
    let rs = resting_state(&params, &fa).map_err(|e| CliError::Solver(e.to_string()))?;
    let star = chi_c_star(&params, &fa, &fu).map_err(|e| CliError::Solver(e.to_string()))?;
    let class = classify(&params, &fa, &fu, cfg.analysis.modes[1]).map_err(|e| CliError::Solver(e.to_string()))?;
    let summary = RestingSummary {
        c0: rs.c0,
        p0: rs.p0,
        r0: rs.r0,
        chi_c: params.chi_c,
        chi_c_star: star,
        verdict: format!("{:?}", class.verdict).to_lowercase(),
        margin: class.margin.is_finite().then_some(class.margin),
        unstable_modes: class.unstable_modes,
        modes_without_roots: class.modes_without_roots,
    };
    let dir = out_dir(cfg)?;
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("resting_state.json"), &summary)?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut w = csv_writer(&dir.join("resting_state.csv"))?;
        w.write_record(["c0", "p0", "r0", "chi_c", "chi_c_star", "verdict"])?;
        w.write_record([
            num(summary.c0),
            num(summary.p0),
            num(summary.r0),
            num(summary.chi_c),
            num(summary.chi_c_star),
            summary.verdict.clone(),
        ])?;
        w.flush()?;
    }
    Ok(format!(
        "c0 = {}, P0 = {}, chi_c* = {}, verdict {}",
        summary.c0, summary.p0, summary.chi_c_star, summary.verdict
    ))
}

#[derive(Serialize)]
struct SpectrumRow {
    chi_c: f64,
    m: u32,
    roots: Vec<[f64; 2]>,
    residuals: Vec<f64>,
    principal: Option<[f64; 2]>,
}

pub fn dispersion(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (fa, fu) = cfg.laws()?;
    let region = cfg.region();
    let opts = SpectrumOptions {
        residual_tol: cfg.analysis.root_tol,
        ..SpectrumOptions::default()
    };
    let [m_min, m_max] = cfg.analysis.modes;
    let mut rows = Vec::new();
    for &chi in &cfg.analysis.chi_c_grid {
        let p = params.with_chi_c(chi).map_err(|e| CliError::Config(e.to_string()))?;
        for m in m_min..=m_max {
            let s = mode_spectrum_with(m, &p, &fa, &fu, &region, &opts).map_err(|e| CliError::Solver(e.to_string()))?;
            rows.push(SpectrumRow {
                chi_c: chi,
                m,
                roots: s.roots.iter().map(|z| [z.re, z.im]).collect(),
                residuals: s.residuals.clone(),
                principal: s.principal.map(|z| [z.re, z.im]),
            });
        }
    }
    let dir = out_dir(cfg)?;
    if cfg.output.wants(Format::Csv) {
        let mut w = csv_writer(&dir.join("dispersion_roots.csv"))?;
        w.write_record(["chi_c", "m", "index", "re", "im", "residual"])?;
        for r in &rows {
            for (i, (z, res)) in r.roots.iter().zip(&r.residuals).enumerate() {
                w.write_record([num(r.chi_c), r.m.to_string(), i.to_string(), num(z[0]), num(z[1]), num(*res)])?;
            }
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("dispersion_principal.csv"))?;
        w.write_record(["chi_c", "m", "principal_re", "principal_im"])?;
        for r in &rows {
            let (re, im) = r.principal.map_or((String::new(), String::new()), |z| (num(z[0]), num(z[1])));
            w.write_record([num(r.chi_c), r.m.to_string(), re, im])?;
        }
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("dispersion.json"), &rows)?;
    }
    let total: usize = rows.iter().map(|r| r.roots.len()).sum();
    Ok(format!(
        "{} chi_c values x {} modes, {total} roots",
        cfg.analysis.chi_c_grid.len(),
        m_max - m_min + 1
    ))
}

fn branch_options(cfg: &RunConfig) -> BranchOptions {
    BranchOptions {
        order: cfg.analysis.order,
        newton: NewtonOptions {
            tol: cfg.analysis.newton_tol,
            ..BranchOptions::default().newton
        },
        ..BranchOptions::default()
    }
}

/// Continues the branch to `v_max`; a stalled run yields its partial branch.
fn compute_branch(cfg: &RunConfig, v_max: f64) -> Result<(Branch, Option<String>), CliError> {
    let params = cfg.params()?;
    let (fa, fu) = cfg.laws()?;
    match continue_branch_with(&params, &fa, &fu, v_max, cfg.analysis.ds, &branch_options(cfg)) {
        Ok(b) => Ok((b, None)),
        Err(TwError::Stalled { partial, v_reached }) => {
            Ok((*partial, Some(format!("continuation stalled at V = {v_reached}"))))
        }
        Err(e) => Err(CliError::Solver(e.to_string())),
    }
}

#[derive(Serialize)]
struct BranchFile<'a> {
    chi_c_star: f64,
    arclength_from: Option<usize>,
    complete: bool,
    states: &'a [TravelingWaveState],
}

pub fn branch(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (fa, _) = cfg.laws()?;
    let (branch, stalled) = compute_branch(cfg, cfg.analysis.v_max)?;
    let dir = out_dir(cfg)?;
    if cfg.output.wants(Format::Csv) {
        let mut w = csv_writer(&dir.join("branch.csv"))?;
        w.write_record(["v", "chi_c", "p1", "pressure_constant", "c1", "rho_0", "rho_2", "rho_3", "max_abs_rho"])?;
        for s in &branch.states {
            let rho = &s.shape.rho_cos;
            let at = |k: usize| rho.get(k).copied().unwrap_or(0.0);
            w.write_record([
                num(s.v),
                num(s.chi_c),
                num(s.p1),
                num(s.pressure_constant(&params, &fa)),
                num(s.c1),
                num(at(0)),
                num(at(2)),
                num(at(3)),
                num(rho.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
            ])?;
        }
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        let star = branch.states.first().map_or(f64::NAN, |s| s.chi_c);
        write_json(
            &dir.join("branch.json"),
            &BranchFile {
                chi_c_star: star,
                arclength_from: branch.arclength_from,
                complete: stalled.is_none(),
                states: &branch.states,
            },
        )?;
    }
    let summary = format!("{} states up to V = {}", branch.states.len(), branch.v_max());
    match stalled {
        None => Ok(summary),
        Some(msg) => Err(CliError::Partial(format!("{msg}; wrote {summary}"))),
    }
}

#[derive(Serialize)]
struct ShapeFile {
    v: f64,
    chi_c: f64,
    p1: f64,
    c1: f64,
    r0: f64,
    rho_cos: Vec<f64>,
}

pub fn shape(cfg: &RunConfig, velocity: Option<f64>) -> Result<String, CliError> {
    let v = velocity.unwrap_or(cfg.analysis.v_max);
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("velocity must be positive, got {v}")));
    }
    let (branch, stalled) = compute_branch(cfg, v)?;
    let state = branch.states.last().ok_or_else(|| CliError::Solver("empty branch".into()))?;
    let dir = out_dir(cfg)?;
    let n = cfg.analysis.contour_points;
    if cfg.output.wants(Format::Csv) {
        let mut w = csv_writer(&dir.join("shape.csv"))?;
        w.write_record(["theta", "radius", "x", "y"])?;
        for j in 0..n {
            let t = 2.0 * PI * j as f64 / n as f64;
            let r = state.shape.radius(t);
            w.write_record([num(t), num(r), num(r * t.cos()), num(r * t.sin())])?;
        }
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        write_json(
            &dir.join("shape.json"),
            &ShapeFile {
                v: state.v,
                chi_c: state.chi_c,
                p1: state.p1,
                c1: state.c1,
                r0: state.shape.r0,
                rho_cos: state.shape.rho_cos.clone(),
            },
        )?;
    }
    let summary = format!("shape at V = {}, chi_c = {}", state.v, state.chi_c);
    match stalled {
        None => Ok(summary),
        Some(msg) => Err(CliError::Partial(format!("{msg}; wrote {summary}"))),
    }
}

pub fn verify(cfg: &RunConfig, only: &[u8]) -> Result<String, CliError> {
    let report = acceptance::run(cfg.analysis.seed, only);
    let dir = out_dir(cfg)?;
    let table = report.table();
    fs::write(dir.join("verify.txt"), &table)?;
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("verify.json"), &report)?;
    }
    print!("{table}");
    if report.all_passed() {
        Ok(format!("{} criteria passed", report.outcomes.len()))
    } else {
        let failed: Vec<String> = report.outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
        Err(CliError::Verification(format!("failed criteria: {}", failed.join(", "))))
    }
}
