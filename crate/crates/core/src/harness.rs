//! Scenario orchestration: parse configs, build fields and initial data,
//! dispatch runs, write CSV/report artifacts, and gate the exit status on
//! monitors and expected outcomes. Identical inputs produce byte-identical
//! outputs; all randomness flows through the seeded generator.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::field_domain::{
    codazzi_residual, make_constant_field, make_holomorphic_patch, make_holomorphic_periodic,
    read_grid, BaseGrid, GridMode,
};
use crate::foliation::{default_c_grid, epsilon_gate, initial_radius, sweep_cmc, SweepConfig};
use crate::graph_flow::{
    angle_monitor, critical_radii, extremum_monitor, fuchsian_ode, height_envelope_monitor,
    mean_convex_monitor, run_to_convergence, DtPolicy, FlowHistory, GraphState, HeightEnvelope,
    MonitorReport,
};
use crate::point_geometry::{
    build_metric_data, christoffels, equidistant_curvatures, radial_ode_residual, ShapeSample,
    MAX_RADIUS,
};
use crate::rng::SplitMix64;
use crate::theta_engine::{theta_rhs_assembled, theta_rhs_closed_form};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum FieldSpec {
    Constant { a: f64, b: f64 },
    Holomorphic { coeffs: Vec<Complex64> },
    Custom { file: PathBuf },
}

#[derive(Clone, Debug)]
pub enum U0Spec {
    Slice(f64),
    Custom(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Simulate,
    Gamma,
    Foliate,
}

/// Optional outcome assertions carried by a scenario config.
#[derive(Clone, Debug, Default)]
pub struct Expectations {
    pub u_inf: Option<(f64, f64)>,
    pub converged: Option<bool>,
    pub min_theta_ge: Option<f64>,
    pub max_rel_err: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub field: FieldSpec,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub c: f64,
    pub eps1: f64,
    pub u0: U0Spec,
    pub dt: Option<f64>,
    pub t_max: f64,
    pub tol: f64,
    pub record_every: usize,
    pub monitors_on: bool,
    pub seed: u64,
    pub samples: usize,
    pub eps: f64,
    pub gamma_tol: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub c_count: usize,
    pub expect: Expectations,
}

fn parse_coeffs(raw: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for part in raw.split(';') {
        let (re, im) = part
            .split_once(',')
            .ok_or_else(|| Error::config(0, format!("bad coefficient `{part}` (want re,im)")))?;
        let re: f64 = re
            .trim()
            .parse()
            .map_err(|_| Error::config(0, format!("bad coefficient `{part}`")))?;
        let im: f64 = im
            .trim()
            .parse()
            .map_err(|_| Error::config(0, format!("bad coefficient `{part}`")))?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

impl Scenario {
    pub fn from_config(cfg: &Config, default_name: &str) -> Result<Scenario> {
        let kind = match cfg.get_or("scenario.kind", "simulate") {
            "simulate" => ScenarioKind::Simulate,
            "gamma" => ScenarioKind::Gamma,
            "foliate" => ScenarioKind::Foliate,
            other => return Err(Error::config(0, format!("unknown scenario.kind `{other}`"))),
        };
        let field = if kind == ScenarioKind::Gamma {
            // pointwise suite; no base field involved
            FieldSpec::Constant { a: 0.0, b: 0.0 }
        } else {
            match cfg.get_or("field.kind", "constant") {
                "constant" => FieldSpec::Constant {
                    a: cfg.require_f64("field.a")?,
                    b: cfg.require_f64("field.b")?,
                },
                "holomorphic" => FieldSpec::Holomorphic {
                    coeffs: parse_coeffs(cfg.require("field.coeffs")?)?,
                },
                "custom" => FieldSpec::Custom {
                    file: PathBuf::from(cfg.require("field.file")?),
                },
                other => return Err(Error::config(0, format!("unknown field.kind `{other}`"))),
            }
        };
        let (c, u0, t_max, tol) = if kind == ScenarioKind::Simulate {
            let c = cfg.require_f64("flow.c")?;
            let raw_u0 = cfg.require("flow.u0")?;
            let u0 = if let Some(r) = raw_u0.strip_prefix("slice:") {
                U0Spec::Slice(r.trim().parse().map_err(|_| {
                    Error::config(0, format!("flow.u0: bad slice radius `{raw_u0}`"))
                })?)
            } else if raw_u0 == "custom" {
                U0Spec::Custom(PathBuf::from(cfg.require("flow.u0_file")?))
            } else {
                return Err(Error::config(
                    0,
                    format!("flow.u0: expected slice:R or custom, got `{raw_u0}`"),
                ));
            };
            (
                c,
                u0,
                cfg.get_f64("flow.t_max")?.unwrap_or(20.0),
                cfg.get_f64("flow.tol")?.unwrap_or(1e-8),
            )
        } else {
            (0.0, U0Spec::Slice(0.0), 20.0, 1e-8)
        };
        let expect = Expectations {
            u_inf: match (cfg.get_f64("expect.u_inf")?, cfg.get_f64("expect.u_tol")?) {
                (Some(v), Some(t)) => Some((v, t)),
                (Some(_), None) => return Err(Error::config(0, "expect.u_inf needs expect.u_tol")),
                _ => None,
            },
            converged: match cfg.get("expect.converged") {
                None => None,
                Some("true") => Some(true),
                Some("false") => Some(false),
                Some(other) => {
                    return Err(Error::config(0, format!("expect.converged: `{other}`")))
                }
            },
            min_theta_ge: cfg.get_f64("expect.min_theta_ge")?,
            max_rel_err: cfg.get_f64("expect.max_rel_err")?,
        };
        Ok(Scenario {
            name: cfg.get_or("scenario.name", default_name).to_string(),
            kind,
            field,
            nx: cfg.get_usize_or("grid.nx", 32)?,
            ny: cfg.get_usize_or("grid.ny", 32)?,
            lx: cfg.get_f64("grid.lx")?.unwrap_or(std::f64::consts::TAU),
            ly: cfg.get_f64("grid.ly")?.unwrap_or(std::f64::consts::TAU),
            c,
            eps1: cfg.get_f64("flow.eps1")?.unwrap_or(0.1),
            u0,
            dt: cfg.get_f64("flow.dt")?,
            t_max,
            tol,
            record_every: cfg.get_usize_or("flow.record_every", 1)?,
            monitors_on: cfg.get_switch_or("monitors", true)?,
            seed: cfg.get_u64_or("seed", 0)?,
            samples: cfg.get_usize_or("verify.samples", 1000)?,
            eps: cfg.get_f64("verify.eps")?.unwrap_or(1e-2),
            gamma_tol: cfg.get_f64("verify.tol")?.unwrap_or(1e-9),
            c_min: cfg.get_f64("foliate.c_min")?.unwrap_or(0.1),
            c_max: cfg.get_f64("foliate.c_max")?.unwrap_or(1.5),
            c_count: cfg.get_usize_or("foliate.count", 16)?,
            expect,
        })
    }

    pub fn build_grid(&self) -> Result<Arc<BaseGrid>> {
        let grid = match &self.field {
            FieldSpec::Constant { a, b } => {
                make_constant_field(*a, *b, self.nx, self.ny, self.lx, self.ly)?
            }
            FieldSpec::Holomorphic { coeffs } => {
                make_holomorphic_periodic(coeffs, self.nx, self.ny, self.lx, self.ly)?
            }
            FieldSpec::Custom { file } => {
                let f = fs::File::open(file)?;
                let grid = read_grid(&mut BufReader::new(f))?;
                if grid.mode != GridMode::Periodic {
                    return Err(Error::Domain(
                        "simulate requires a periodic custom grid".into(),
                    ));
                }
                grid
            }
        };
        Ok(Arc::new(grid))
    }
}

/// Final outcome of a harness run: exit code plus the failure list.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub failures: Vec<String>,
}

impl RunOutcome {
    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
        self.exit_code = 1;
    }
}

/// Height-field text format: header `nx ny lx ly height`, then `i j u`.
pub fn write_heights<W: Write>(
    out: &mut W,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    u: &[f64],
) -> Result<()> {
    writeln!(out, "{nx} {ny} {lx} {ly} height")?;
    for j in 0..ny {
        for i in 0..nx {
            writeln!(out, "{} {} {}", i, j, u[j * nx + i])?;
        }
    }
    Ok(())
}

pub fn read_heights<R: BufRead>(input: &mut R) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(1, "empty height file"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[4] != "height" {
        return Err(Error::config(1, "expected header `nx ny lx ly height`"));
    }
    let nx: usize = parts[0].parse().map_err(|_| Error::config(1, "bad nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| Error::config(1, "bad ny"))?;
    let mut u = vec![0.0f64; nx * ny];
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Vec<&str> = line.split_whitespace().collect();
        if p.len() != 3 {
            return Err(Error::config(ln + 2, "expected `i j u`"));
        }
        let i: usize = p[0]
            .parse()
            .map_err(|_| Error::config(ln + 2, "bad index"))?;
        let j: usize = p[1]
            .parse()
            .map_err(|_| Error::config(ln + 2, "bad index"))?;
        let val: f64 = p[2]
            .parse()
            .map_err(|_| Error::config(ln + 2, "bad height"))?;
        if i >= nx || j >= ny {
            return Err(Error::config(ln + 2, "index out of range"));
        }
        u[j * nx + i] = val;
    }
    Ok((nx, ny, u))
}

fn series_csv(hist: &FlowHistory, env: Option<&HeightEnvelope>, flags: &[String]) -> String {
    let mut out = String::from("t,w,v,min_theta,max_H_minus_c,lower_env,upper_env,monitor_flags\n");
    for k in 0..hist.len() {
        let (lo, hi) = match env {
            Some(e) => (e.lower[k], e.upper[k]),
            None => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            hist.times[k],
            hist.w[k],
            hist.v[k],
            hist.min_theta[k],
            hist.max_h_minus_c[k],
            lo,
            hi,
            flags[k]
        );
    }
    out
}

fn merge_flags(len: usize, reports: &[&MonitorReport]) -> Vec<String> {
    let mut flags = vec![Vec::<&'static str>::new(); len];
    for rep in reports {
        if !rep.preconditions_met {
            continue;
        }
        for v in &rep.violations {
            if v.step < len && !flags[v.step].contains(&rep.name) {
                flags[v.step].push(rep.name);
            }
        }
    }
    flags
        .into_iter()
        .map(|f| {
            if f.is_empty() {
                "-".to_string()
            } else {
                f.join(";")
            }
        })
        .collect()
}

/// Whether the scenario sits inside the smallness and initial-radius
/// admissibility windows for its eps1 (the precondition of the angle bound).
pub fn angle_gates_hold(grid: &BaseGrid, c: f64, eps1: f64, u0: &U0Spec) -> bool {
    let gate = match epsilon_gate(eps1) {
        Ok(g) => g,
        Err(_) => return false,
    };
    let eps = grid.c1_norm();
    if eps > gate.eps_max || grid.lambda_max() > gate.lambda_gate {
        return false;
    }
    let r0 = match u0 {
        U0Spec::Slice(r) => *r,
        U0Spec::Custom(_) => return false,
    };
    match initial_radius(c, grid.lambda_max(), eps.max(1e-300), eps1) {
        Ok((lo, hi)) => r0 >= lo && r0 <= hi.min(MAX_RADIUS),
        Err(_) => false,
    }
}

pub struct SimulateArtifacts {
    pub outcome: RunOutcome,
    pub hist: FlowHistory,
    pub final_u: Vec<f64>,
}

/// Run a simulate scenario and write series.csv, final_u.txt and report.txt
/// under `out_dir`.
pub fn run_simulate(sc: &Scenario, out_dir: &Path, quiet: bool) -> Result<SimulateArtifacts> {
    fs::create_dir_all(out_dir)?;
    let grid = sc.build_grid()?;
    let u0 = match &sc.u0 {
        U0Spec::Slice(r) => vec![*r; grid.len()],
        U0Spec::Custom(path) => {
            let f = fs::File::open(path)?;
            let (nx, ny, u) = read_heights(&mut BufReader::new(f))?;
            if nx != grid.nx || ny != grid.ny {
                return Err(Error::Domain(format!(
                    "height file is {nx}x{ny}, grid is {}x{}",
                    grid.nx, grid.ny
                )));
            }
            u
        }
    };
    let state = GraphState::new(Arc::clone(&grid), u0, sc.c)?;
    let policy = match sc.dt {
        Some(dt) => DtPolicy::Fixed(dt),
        None => DtPolicy::Auto,
    };
    let (fin, hist, report) = run_to_convergence(state, policy, sc.tol, sc.t_max, sc.record_every)?;

    let mut outcome = RunOutcome::default();
    let hd = grid.hx().max(grid.hy());
    let base_dt = sc.dt.unwrap_or(hd * hd * 0.2);
    let slack = 10.0 * (hd * hd + base_dt);

    let mut env = None;
    let mut monitor_lines = Vec::new();
    let mut flags = vec!["-".to_string(); hist.len()];
    if sc.monitors_on {
        let gates = angle_gates_hold(&grid, sc.c, sc.eps1, &sc.u0);
        let angle = angle_monitor(&hist, sc.eps1, gates);
        let convex = mean_convex_monitor(&hist, slack);
        let ext = extremum_monitor(&hist);
        let radii_res = critical_radii(sc.c, grid.lambda_max(), hist.w[0].max(0.0));
        let mut reports: Vec<&MonitorReport> = vec![&angle, &convex, &ext];
        let env_report;
        match radii_res {
            Ok(radii) if hist.w[0] > 0.0 => {
                let e = height_envelope_monitor(&hist, &radii, 0, slack)?;
                env_report = MonitorReport {
                    name: "envelope",
                    preconditions_met: true,
                    violations: e.violations.clone(),
                    info: format!("tau1 = {}, tau2 = {}", e.tau1, e.tau2),
                };
                env = Some(e);
                reports.push(&env_report);
            }
            _ => {
                monitor_lines.push("envelope: informational (preconditions not met)".to_string());
            }
        }
        for rep in &reports {
            let status = if !rep.preconditions_met {
                "informational"
            } else if rep.violations.is_empty() {
                "pass"
            } else {
                "FAIL"
            };
            monitor_lines.push(format!(
                "{}: {} ({} violations) {}",
                rep.name,
                status,
                rep.violations.len(),
                rep.info
            ));
            if rep.failed() {
                outcome.fail(format!(
                    "monitor {} failed with {} violations",
                    rep.name,
                    rep.violations.len()
                ));
            }
        }
        flags = merge_flags(hist.len(), &reports);
    }

    // expectations
    if let Some((want, tol)) = sc.expect.u_inf {
        let worst = fin
            .u
            .iter()
            .fold(0.0f64, |acc, &x| acc.max((x - want).abs()));
        if worst > tol {
            outcome.fail(format!("expect.u_inf: |u - {want}| = {worst} > {tol}"));
        }
    }
    if let Some(want) = sc.expect.converged {
        if report.converged != want {
            outcome.fail(format!(
                "expect.converged: wanted {want}, got {}",
                report.converged
            ));
        }
    }
    if let Some(bound) = sc.expect.min_theta_ge {
        let worst = hist.min_theta.iter().cloned().fold(f64::INFINITY, f64::min);
        if worst < bound {
            outcome.fail(format!("expect.min_theta_ge: min theta {worst} < {bound}"));
        }
    }

    fs::write(
        out_dir.join("series.csv"),
        series_csv(&hist, env.as_ref(), &flags),
    )?;
    let mut fu = Vec::new();
    write_heights(&mut fu, grid.nx, grid.ny, grid.lx, grid.ly, &fin.u)?;
    fs::write(out_dir.join("final_u.txt"), fu)?;

    let mut rpt = String::new();
    let _ = writeln!(rpt, "name: {}", sc.name);
    let _ = writeln!(rpt, "converged: {}", report.converged);
    let _ = writeln!(rpt, "t_final: {}", report.t_final);
    let _ = writeln!(rpt, "steps: {}", report.steps);
    let _ = writeln!(rpt, "max_h_err: {}", report.max_h_err);
    let _ = writeln!(rpt, "min_u: {}", fin.min_u());
    let _ = writeln!(rpt, "max_u: {}", fin.max_u());
    let _ = writeln!(rpt, "lambda_max: {}", grid.lambda_max());
    let _ = writeln!(rpt, "c1_norm: {}", grid.c1_norm());
    let _ = writeln!(rpt, "approximate_codazzi: {}", grid.approximate_codazzi);
    for line in &monitor_lines {
        let _ = writeln!(rpt, "monitor.{line}");
    }
    for f in &outcome.failures {
        let _ = writeln!(rpt, "failure: {f}");
    }
    let _ = writeln!(rpt, "exit: {}", outcome.exit_code);
    fs::write(out_dir.join("report.txt"), &rpt)?;
    if !quiet {
        print!("{rpt}");
    }
    Ok(SimulateArtifacts {
        outcome,
        hist,
        final_u: fin.u,
    })
}

/// Sample tuple for the gamma suite, drawn from the seeded generator.
fn gamma_tuple(rng: &mut SplitMix64, eps: f64) -> (ShapeSample, f64, f64, f64, f64) {
    let (a, b) = rng.in_disc(eps);
    let s = ShapeSample {
        a,
        b,
        m: rng.uniform(-eps, eps),
        n: rng.uniform(-eps, eps),
    };
    let r0 = rng.uniform(-2.0, 2.0);
    let c = rng.uniform(0.0, 1.9);
    let theta = rng.uniform(0.2, 0.999);
    let h = rng.uniform(-3.0, 3.0);
    (s, r0, c, theta, h)
}

/// Closed-form vs assembled evolution scalar over seeded random tuples.
/// rel_err divides by max(|closed|, |assembled|, 1e-3): with the 1e-9
/// threshold this folds the absolute floor 1e-12 into one column.
pub fn verify_gamma(
    samples: usize,
    eps: f64,
    seed: u64,
    tol: f64,
    out_dir: &Path,
    quiet: bool,
) -> Result<RunOutcome> {
    verify_gamma_detailed(samples, eps, seed, tol, out_dir, quiet).map(|(_, out)| out)
}

/// As `verify_gamma`, additionally returning the observed worst relative
/// discrepancy.
pub fn verify_gamma_detailed(
    samples: usize,
    eps: f64,
    seed: u64,
    tol: f64,
    out_dir: &Path,
    quiet: bool,
) -> Result<(f64, RunOutcome)> {
    fs::create_dir_all(out_dir)?;
    let mut rng = SplitMix64::new(seed);
    let mut csv = String::from("sample_id,r0,c,theta,H,closed,assembled,rel_err\n");
    let mut max_rel: f64 = 0.0;
    for id in 0..samples {
        let (s, r0, c, theta, h) = gamma_tuple(&mut rng, eps);
        let closed = theta_rhs_closed_form(&s, r0, c, theta, h)?;
        let asm = theta_rhs_assembled(&s, r0, c, theta, h)?;
        let rel = (closed - asm).abs() / closed.abs().max(asm.abs()).max(1e-3);
        max_rel = max_rel.max(rel);
        let _ = writeln!(csv, "{id},{r0},{c},{theta},{h},{closed},{asm},{rel}");
    }
    fs::write(out_dir.join("gamma.csv"), csv)?;
    let summary = format!("gamma oracle: {samples} samples, max rel_err = {max_rel}, tol = {tol}");
    fs::write(out_dir.join("summary.txt"), format!("{summary}\n"))?;
    if !quiet {
        println!("{summary}");
    }
    let mut outcome = RunOutcome::default();
    if max_rel > tol {
        outcome.fail(format!("max rel_err {max_rel} exceeds {tol}"));
    }
    Ok((max_rel, outcome))
}

/// Closed-form identity batter for the pointwise geometry: inverse
/// consistency, trace identities, finite-difference dH/dr, the radial ODE
/// residual, and the far-radius limits of the shape operator.
pub fn verify_geometry(samples: usize, eps: f64, seed: u64, quiet: bool) -> Result<RunOutcome> {
    let mut rng = SplitMix64::new(seed);
    let mut worst = [0.0f64; 6];
    for _ in 0..samples {
        let (a, b) = rng.in_disc(eps.min(0.95));
        let s = ShapeSample {
            a,
            b,
            m: rng.uniform(-eps, eps),
            n: rng.uniform(-eps, eps),
        };
        let r = rng.uniform(-3.0, 3.0);
        let md = build_metric_data(&s, r)?;
        let eq = equidistant_curvatures(&s, r)?;

        let mut inv_err = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                let got: f64 = (0..2).map(|k| md.e[i][k] * md.einv[k][j]).sum();
                inv_err = inv_err.max((got - want).abs());
            }
        }
        worst[0] = worst[0].max(inv_err);
        worst[1] = worst[1].max((md.f.trace() - eq.h).abs());
        worst[2] = worst[2].max((md.f.alpha - md.f.eta - 2.0 * s.a / md.det_e).abs());
        let hstep = 1e-5;
        let fd = (equidistant_curvatures(&s, r + hstep)?.h
            - equidistant_curvatures(&s, r - hstep)?.h)
            / (2.0 * hstep);
        worst[3] = worst[3].max((fd - eq.dh_dr).abs() / eq.dh_dr.abs().max(1.0));
        let res = radial_ode_residual(&s, r)?;
        worst[4] = worst[4].max(crate::linalg::max_abs(&res));
        for (rr, sign) in [(MAX_RADIUS, 1.0), (-MAX_RADIUS, -1.0)] {
            let f = build_metric_data(&s, rr)?.f;
            worst[5] = worst[5]
                .max((f.alpha - sign).abs())
                .max((f.eta - sign).abs())
                .max(f.beta.abs());
        }
    }
    let names = [
        ("E Einv = I", 1e-12),
        ("alpha+eta = H", 1e-12),
        ("alpha-eta = 2a/detE", 1e-12),
        ("dH/dr finite difference", 1e-7),
        ("radial ODE residual", 1e-12),
        ("far-radius shape limit", 1e-8),
    ];
    let mut outcome = RunOutcome::default();
    for (k, (name, tol)) in names.iter().enumerate() {
        let status = if worst[k] <= *tol { "pass" } else { "FAIL" };
        if !quiet {
            println!("geometry {name}: max err {} (tol {tol}) {status}", worst[k]);
        }
        if worst[k] > *tol {
            outcome.fail(format!("geometry {name}: {} > {tol}", worst[k]));
        }
    }
    Ok(outcome)
}

/// Closed-form Christoffels against finite differences of the metric field
/// on a holomorphic patch, under grid refinement.
pub fn verify_christoffel(quiet: bool) -> Result<RunOutcome> {
    let coeffs = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.05, 0.01),
        Complex64::new(0.03, -0.02),
        Complex64::new(-0.02, 0.0),
    ];
    let r0 = 0.7;
    let mut errs = Vec::new();
    for n in [41usize, 81] {
        let grid = make_holomorphic_patch(&coeffs, n, n, 2.0, 2.0)?;
        let h = grid.hx();
        let mut worst = 0.0f64;
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                let s = grid.sample(i, j);
                let cs = christoffels(s, r0)?;
                // finite-difference d1 g, d2 g of the level metric field
                let g_at =
                    |ii: usize, jj: usize| build_metric_data(grid.sample(ii, jj), r0).map(|m| m.g);
                let gp = g_at(i + 1, j)?;
                let gm = g_at(i - 1, j)?;
                let gq = g_at(i, j + 1)?;
                let gr = g_at(i, j - 1)?;
                let mut d1 = [[0.0; 2]; 2];
                let mut d2 = [[0.0; 2]; 2];
                for p in 0..2 {
                    for q in 0..2 {
                        d1[p][q] = (gp[p][q] - gm[p][q]) / (2.0 * h);
                        d2[p][q] = (gq[p][q] - gr[p][q]) / (2.0 * h);
                    }
                }
                let md = build_metric_data(s, r0)?;
                let dg = [d1, d2];
                for ii in 0..2 {
                    for jj in 0..2 {
                        for kk in 0..2 {
                            let mut t = 0.0;
                            for l in 0..2 {
                                t += md.ginv[kk][l]
                                    * (dg[ii][l][jj] + dg[jj][l][ii] - dg[l][ii][jj]);
                            }
                            let fd_gamma = 0.5 * t;
                            let closed = if kk == 0 { cs.b[ii][jj] } else { cs.c[ii][jj] };
                            worst = worst.max((fd_gamma - closed).abs());
                        }
                    }
                }
            }
        }
        errs.push(worst);
    }
    let ratio = errs[0] / errs[1];
    let mut outcome = RunOutcome::default();
    if !quiet {
        println!(
            "christoffel: errs {} -> {} under h -> h/2, ratio {ratio} (want ~4)",
            errs[0], errs[1]
        );
    }
    if !(3.0..5.5).contains(&ratio) {
        outcome.fail(format!("christoffel refinement ratio {ratio} not ~4"));
    }
    if errs[1] > 1e-4 {
        outcome.fail(format!("christoffel fine-grid error {} too large", errs[1]));
    }
    Ok(outcome)
}

/// Codazzi residual behavior across the three generator families.
pub fn verify_codazzi(quiet: bool) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::default();
    let tau = std::f64::consts::TAU;

    let g = make_constant_field(0.2, -0.1, 24, 24, 1.0, 1.0)?;
    let r_const = codazzi_residual(&g);
    if r_const != 0.0 {
        outcome.fail(format!("constant field residual {r_const} != 0"));
    }

    let coeffs = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.05, 0.0),
    ];
    let r1 = codazzi_residual(&make_holomorphic_patch(&coeffs, 26, 26, 2.0, 2.0)?);
    let r2 = codazzi_residual(&make_holomorphic_patch(&coeffs, 51, 51, 2.0, 2.0)?);
    let ratio = r1 / r2;
    if !(3.2..4.8).contains(&ratio) {
        outcome.fail(format!("patch residual ratio {ratio} not ~4"));
    }

    let eps = 1e-3;
    let g =
        crate::field_domain::make_custom_periodic(64, 64, tau, tau, |x, _| (eps * x.sin(), 0.0))?;
    let res = codazzi_residual(&g);
    let kh = g.hx();
    let expect = eps * (kh.sin() / kh);
    if (res - expect).abs() > 0.02 * expect {
        outcome.fail(format!("sinusoid residual {res} vs analytic {expect}"));
    }
    if !quiet {
        println!(
            "codazzi: constant {r_const}, patch ratio {ratio}, sinusoid {res} (analytic {expect})"
        );
    }
    Ok(outcome)
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub ode_gap: f64,
    pub h_order: f64,
    pub bracket_ok: bool,
}

/// PDE-vs-ODE comparison: a constant-field run against the scalar flow, a
/// three-grid self-convergence study for the spatial order, and (for
/// lambda > 0) the two-ODE bracket of the PDE envelope.
#[allow(clippy::too_many_arguments)]
pub fn oracle_compare(
    c: f64,
    lambda: f64,
    w0: f64,
    t_end: f64,
    dt: f64,
    nx: usize,
    out_dir: &Path,
    quiet: bool,
) -> Result<(OracleReport, RunOutcome)> {
    fs::create_dir_all(out_dir)?;
    let tau = std::f64::consts::TAU;
    let grid = Arc::new(make_constant_field(lambda, 0.0, nx, nx, tau, tau)?);
    let state = GraphState::new(Arc::clone(&grid), vec![w0; grid.len()], c)?;
    let steps = (t_end / dt).round() as usize;

    let ode = fuchsian_ode(c, lambda, w0, t_end, dt / 10.0)?;
    let ode_at = |t: f64| {
        // dt/10 steps: index = t / (dt/10)
        let idx = (t / (dt / 10.0)).round() as usize;
        ode.w[idx.min(ode.w.len() - 1)]
    };

    let mut csv = String::from("t,pde_min,pde_max,ode_w\n");
    let mut st = state;
    let mut gap = 0.0f64;
    let mut bracket_ok = true;
    let ode0 = if lambda > 0.0 {
        Some(fuchsian_ode(c, 0.0, w0, t_end, dt / 10.0)?)
    } else {
        None
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        let (mn, mx) = (st.min_u(), st.max_u());
        let w_ref = ode_at(t);
        gap = gap.max((mn - w_ref).abs()).max((mx - w_ref).abs());
        if let Some(o0) = &ode0 {
            let idx = (t / (dt / 10.0)).round() as usize;
            let w0t = o0.w[idx.min(o0.w.len() - 1)];
            let lo = w0t.min(w_ref) - 1e-6;
            let hi = w0t.max(w_ref) + 1e-6;
            if mn < lo || mx > hi {
                bracket_ok = false;
            }
        }
        let _ = writeln!(csv, "{t},{mn},{mx},{w_ref}");
        if k < steps {
            st = crate::graph_flow::step_mmcf(&st, dt)?;
        }
    }
    fs::write(out_dir.join("oracle.csv"), csv)?;

    // three-grid self-convergence on a perturbed start
    let mut finals = Vec::new();
    for mult in [1usize, 2, 4] {
        let n = nx * mult;
        let g = Arc::new(make_constant_field(lambda, 0.0, n, n, tau, tau)?);
        let u0: Vec<f64> = (0..g.len())
            .map(|k| w0 + 0.01 * (tau * (k % n) as f64 / n as f64).sin())
            .collect();
        let mut s = GraphState::new(Arc::clone(&g), u0, c)?;
        for _ in 0..steps {
            s = crate::graph_flow::step_mmcf(&s, dt)?;
        }
        finals.push((n, s.u));
    }
    let restrict_err = |coarse: &(usize, Vec<f64>), fine: &(usize, Vec<f64>)| {
        let (nc, uc) = coarse;
        let (nf, uf) = fine;
        let m = nf / nc;
        let mut worst = 0.0f64;
        for j in 0..*nc {
            for i in 0..*nc {
                let d = uc[j * nc + i] - uf[(j * m) * nf + i * m];
                worst = worst.max(d.abs());
            }
        }
        worst
    };
    let d1 = restrict_err(&finals[0], &finals[1]);
    let d2 = restrict_err(&finals[1], &finals[2]);
    let h_order = (d1 / d2).log2();

    let report = OracleReport {
        ode_gap: gap,
        h_order,
        bracket_ok,
    };
    let mut rpt = String::new();
    let _ = writeln!(rpt, "ode_gap: {gap}");
    let _ = writeln!(rpt, "h_order: {h_order}");
    let _ = writeln!(rpt, "bracket_ok: {bracket_ok}");
    fs::write(out_dir.join("oracle_report.txt"), &rpt)?;
    if !quiet {
        print!("{rpt}");
    }
    let mut outcome = RunOutcome::default();
    if !bracket_ok {
        outcome.fail("PDE envelope left the two-ODE bracket".to_string());
    }
    Ok((report, outcome))
}

/// Sweep c over [c_min, c_max] and write foliation.csv plus per-c height
/// files.
pub fn run_foliate(
    sc: &Scenario,
    c_min: f64,
    c_max: f64,
    count: usize,
    out_dir: &Path,
    quiet: bool,
) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let grid = sc.build_grid()?;
    let c_list = default_c_grid(c_min, c_max, count);
    let cfg = SweepConfig {
        tol: sc.tol,
        t_max: sc.t_max.max(60.0),
        policy: match sc.dt {
            Some(dt) => DtPolicy::Fixed(dt),
            None => DtPolicy::Auto,
        },
        record_every: 50,
        warm_start: true,
    };
    let res = sweep_cmc(Arc::clone(&grid), &c_list, sc.eps1, &cfg)?;

    let mut csv = String::from(
        "c,min_u,max_u,max_H_err,ordered_vs_prev,sep_lo_bound,sep_hi_bound,\
         sep_measured_min,sep_measured_max\n",
    );
    let mut cert_iter = res.certificates.iter();
    for k in 0..res.c_values.len() {
        let u = &res.surfaces[k];
        let (mn, mx) = u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        let (lo, hi, smn, smx) = if k == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            match cert_iter.next() {
                Some(cert) => (
                    cert.sep_lo_bound,
                    cert.sep_hi_bound,
                    cert.sep_measured_min,
                    cert.sep_measured_max,
                ),
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            }
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            res.c_values[k], mn, mx, res.reports[k].max_h_err, res.ordering_ok[k], lo, hi, smn, smx
        );
        let mut fu = Vec::new();
        write_heights(&mut fu, grid.nx, grid.ny, grid.lx, grid.ly, u)?;
        fs::write(out_dir.join(format!("final_u_{k:02}.txt")), fu)?;
    }
    fs::write(out_dir.join("foliation.csv"), csv)?;

    let mut outcome = RunOutcome::default();
    if !res.all_converged() {
        outcome.fail("not every c converged".to_string());
    }
    if !res.all_ordered() {
        outcome.fail("ordering violated".to_string());
    }
    if res.certificates.iter().any(|c| !c.ok) {
        outcome.fail("a separation certificate failed".to_string());
    }
    if !quiet {
        println!(
            "foliate: {} leaves, converged = {}, ordered = {}",
            res.c_values.len(),
            res.all_converged(),
            res.all_ordered()
        );
    }
    Ok(outcome)
}

/// Load a scenario config and dispatch on its kind.
pub fn run_scenario(
    path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<RunOutcome> {
    let text = fs::read_to_string(path)?;
    let cfg = Config::parse(&text)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    let mut sc = Scenario::from_config(&cfg, &stem)?;
    if let Some(seed) = seed_override {
        sc.seed = seed;
    }
    match sc.kind {
        ScenarioKind::Simulate => Ok(run_simulate(&sc, out_dir, quiet)?.outcome),
        ScenarioKind::Gamma => {
            let (max_rel, mut outcome) =
                verify_gamma_detailed(sc.samples, sc.eps, sc.seed, sc.gamma_tol, out_dir, quiet)?;
            if let Some(limit) = sc.expect.max_rel_err {
                if !(max_rel <= limit) {
                    outcome.fail(format!("expect.max_rel_err: {max_rel} > {limit}"));
                }
            }
            Ok(outcome)
        }
        ScenarioKind::Foliate => run_foliate(&sc, sc.c_min, sc.c_max, sc.c_count, out_dir, quiet),
    }
}
