use std::fs::File;
use std::io::{BufWriter, Write};

use cabm::acceptance::{duality_batteries, run_criterion, AcceptanceOptions, CRITERIA};
use cabm::entrance::{approx_product, StepFunction};
use cabm::harness::{
    duality_check, intensity_check, laplace_fredholm_with, mixture_check, realize,
    write_csv_summary, CheckReport, FredholmOptions, IntensitySpec, MixtureSpec, SimParams,
};
use cabm::io::{format_sig, write_samples_csv};
use cabm::kernel::ScalarKernel;
use cabm::sim::{
    mc_laplace, run_replicas, trajectory, MCEstimate, PointConfig, SimConfig, UniformGrid,
};
use serde_json::{json, Value};

use crate::args::{Command, Format};
use crate::config::{parse_grid, parse_groups, parse_step_function, parse_triple, RunConfig};
use crate::CliError;

/// Run one subcommand; `Ok(pass)` reports whether all checks passed.
pub fn execute(cmd: &Command, mut rc: RunConfig, stdout: &mut dyn Write) -> Result<bool, CliError> {
    let mut file;
    let out: &mut dyn Write = match &rc.output {
        Some(p) => {
            file = BufWriter::new(File::create(p)?);
            &mut file
        }
        None => stdout,
    };
    let pass = match cmd {
        Command::Simulate {
            lattice, snapshots, ..
        } => simulate(&mut rc, lattice.as_deref(), *snapshots, out)?,
        Command::Kernel {
            grid, quadrature, ..
        } => kernel(&mut rc, grid, *quadrature, out)?,
        Command::DualityCheck { points, dt_gap, .. } => {
            duality(&mut rc, points.as_deref(), *dt_gap, out)?
        }
        Command::IntensityCheck {
            lattice,
            bins,
            pairs,
            relative_bias,
            ..
        } => intensity(
            &mut rc,
            lattice.as_deref(),
            bins,
            pairs.as_deref(),
            *relative_bias,
            out,
        )?,
        Command::Laplace {
            phi,
            tol,
            k_max,
            mc,
            lattice,
            ..
        } => laplace(&mut rc, phi, *tol, *k_max, *mc, lattice.as_deref(), out)?,
        Command::MixtureCheck {
            k,
            eps,
            survivor_t,
            no_halving,
            no_duality,
            ..
        } => mixture(
            &mut rc,
            *k,
            *eps,
            *survivor_t,
            *no_halving,
            *no_duality,
            out,
        )?,
        Command::Approx { f, n, .. } => approx(&mut rc, f, *n, out)?,
        Command::Selftest {
            quick,
            only,
            timings,
            ..
        } => selftest(&mut rc, *quick, only.as_deref(), *timings, out)?,
    };
    out.flush()?;
    Ok(pass)
}

fn config_comment(rc: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        out,
        "# config: {}",
        serde_json::to_string(rc).expect("config serializes")
    )?;
    Ok(())
}

fn write_json(
    rc: &RunConfig,
    mut body: serde_json::Map<String, Value>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert(
        "config".into(),
        serde_json::to_value(rc).expect("config serializes"),
    );
    doc.append(&mut body);
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&Value::Object(doc)).expect("output serializes")
    )?;
    Ok(())
}

fn emit_reports(
    rc: &RunConfig,
    reports: &[CheckReport],
    extra: Value,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let pass = reports.iter().all(|r| r.pass);
    match rc.format() {
        Format::Csv => {
            config_comment(rc, out)?;
            write_csv_summary(&mut *out, reports)?;
        }
        Format::Json => {
            let mut body = serde_json::Map::new();
            if let Value::Object(mut m) = extra {
                body.append(&mut m);
            }
            body.insert(
                "reports".into(),
                serde_json::to_value(reports).expect("reports serialize"),
            );
            body.insert("pass".into(), json!(pass));
            write_json(rc, body, out)?;
        }
    }
    Ok(pass)
}

fn sim_params(rc: &RunConfig, dt_gap: bool) -> SimParams {
    SimParams {
        dt: rc.dt,
        reps: rc.reps,
        seed: rc.seed,
        z: rc.z,
        bias_allowance: rc.bias,
        dt_gap,
    }
}

fn sim_config(rc: &RunConfig) -> SimConfig {
    SimConfig {
        theta: rc.theta,
        dt: rc.dt.min(rc.t),
        t_end: rc.t,
        seed: rc.seed,
        reps: rc.reps,
    }
}

/// The starting configuration: a lattice if given, otherwise the particles
/// of finite simple data.
fn initial_config(rc: &RunConfig, lattice: Option<&str>) -> Result<PointConfig, CliError> {
    match (lattice, &rc.data) {
        (Some(spec), _) => {
            let (lo, hi, spacing) = parse_triple(spec, "--lattice")?;
            if !(spacing > 0.0) || hi < lo || (hi - lo) / spacing > 1e7 {
                return Err(CliError::Usage(format!("bad --lattice {spec:?}")));
            }
            Ok(PointConfig::grid(lo, hi, spacing)?)
        }
        (None, Some(d)) => {
            realize(d).map_err(|e| CliError::Usage(format!("{e}; pass --lattice instead")))
        }
        (None, None) => Err(CliError::Usage(format!(
            "{} needs --data or --lattice",
            rc.command
        ))),
    }
}

fn simulate(
    rc: &mut RunConfig,
    lattice: Option<&str>,
    snapshots: usize,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    if lattice.is_some() && rc.data.is_some() {
        return Err(CliError::Usage(
            "simulate takes --data or --lattice, not both".into(),
        ));
    }
    let initial = initial_config(rc, lattice)?;
    let sc = sim_config(rc);
    sc.validate()?;
    let snapshots = snapshots.max(1);
    rc.params =
        json!({ "lattice": lattice, "snapshots": snapshots, "initial_particles": initial.len() });
    let runs = run_replicas(sc.seed, sc.reps, |r, _| {
        trajectory(&initial, &sc, r, snapshots)
    });
    let runs: Vec<Vec<(f64, PointConfig)>> = runs.into_iter().collect::<Result<_, _>>()?;
    match rc.format() {
        Format::Csv => {
            config_comment(rc, out)?;
            let records = runs
                .into_iter()
                .enumerate()
                .flat_map(|(r, traj)| traj.into_iter().map(move |(t, c)| (r as u64, t, c)));
            write_samples_csv(&mut *out, records)?;
        }
        Format::Json => {
            let counts: Vec<f64> = runs
                .iter()
                .map(|tr| tr.last().map_or(0, |s| s.1.len()) as f64)
                .collect();
            let samples: Vec<Value> = runs
                .iter()
                .enumerate()
                .flat_map(|(r, traj)| {
                    traj.iter().map(
                        move |(t, c)| json!({ "replicate": r, "t": t, "positions": c.positions() }),
                    )
                })
                .collect();
            let mut body = serde_json::Map::new();
            body.insert(
                "summary".into(),
                json!({ "final_count": MCEstimate::from_values(&counts, sc.seed) }),
            );
            body.insert("samples".into(), Value::Array(samples));
            write_json(rc, body, out)?;
        }
    }
    Ok(true)
}

fn kernel(
    rc: &mut RunConfig,
    grid: &str,
    quadrature: bool,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let points = parse_grid(grid)?;
    rc.params = json!({ "grid": grid, "route": if quadrature { "quadrature" } else { "fast" } });
    let k = ScalarKernel::new(rc.data()?.clone(), rc.theta)?;
    let t = rc.t;
    let eval = |x: f64, y: f64| {
        if quadrature {
            k.eval_quadrature(t, x, y)
        } else {
            k.eval(t, x, y)
        }
    };
    let mut rows = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        let diag = eval(x, x)?.k;
        for &y in &points[i..] {
            rows.push((x, y, eval(x, y)?, diag));
        }
    }
    match rc.format() {
        Format::Csv => {
            config_comment(rc, out)?;
            writeln!(out, "t,x,y,K,DxK,DyK,DxyK,diag")?;
            for (x, y, e, diag) in &rows {
                let cells = [t, *x, *y, e.k, e.dx, e.dy, e.dxy, *diag].map(format_sig);
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(x, y, e, diag)| {
                    json!({ "t": t, "x": x, "y": y, "K": e.k, "DxK": e.dx, "DyK": e.dy, "DxyK": e.dxy, "diag": diag })
                })
                .collect();
            let mut body = serde_json::Map::new();
            body.insert("rows".into(), Value::Array(rows));
            write_json(rc, body, out)?;
        }
    }
    Ok(true)
}

fn duality(
    rc: &mut RunConfig,
    points: Option<&str>,
    dt_gap: bool,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let batteries = match points {
        Some(p) => parse_groups::<f64>(p, "points")?,
        None => duality_batteries(),
    };
    rc.params = json!({ "points": batteries, "dt_gap": dt_gap });
    let report = duality_check(
        rc.data()?,
        rc.theta,
        rc.t,
        &batteries,
        &sim_params(rc, dt_gap),
    )?;
    emit_reports(rc, &[report], Value::Null, out)
}

fn intensity(
    rc: &mut RunConfig,
    lattice: Option<&str>,
    bins: &str,
    pairs: Option<&str>,
    relative_bias: f64,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let data = rc.data()?.clone();
    let initial = initial_config(rc, lattice)?;
    let (lo, hi, count) = parse_triple(bins, "--bins")?;
    if count < 1.0 || count.fract() != 0.0 {
        return Err(CliError::Usage(format!(
            "--bins count must be a positive integer, got {count}"
        )));
    }
    let grid = UniformGrid::new(lo, hi, count as usize)?;
    let pairs: Vec<(usize, usize)> = match pairs {
        Some(p) => parse_groups::<usize>(p, "pairs")?
            .into_iter()
            .map(|g| match g[..] {
                [i, j] => Ok((i, j)),
                _ => Err(CliError::Usage(format!("pair {g:?} needs two bin indices"))),
            })
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    if !(relative_bias >= 0.0) {
        return Err(CliError::Usage(
            "--relative-bias must be non-negative".into(),
        ));
    }
    let spec = IntensitySpec {
        grid,
        pairs,
        relative_bias,
        absolute_bias: rc.bias,
    };
    rc.params = json!({ "lattice": lattice, "spec": spec });
    let report = intensity_check(
        &data,
        rc.theta,
        rc.t,
        &initial,
        &spec,
        &sim_params(rc, false),
    )?;
    emit_reports(rc, &[report], Value::Null, out)
}

fn parse_phi(spec: &str) -> Result<StepFunction, CliError> {
    if spec.trim_start().starts_with(['{', '[']) || !spec.contains(':') {
        return parse_step_function(spec);
    }
    let (a, b, c) = parse_triple(spec, "--phi")?;
    StepFunction::indicator(a, b, c).map_err(|e| CliError::Usage(format!("--phi: {e}")))
}

fn laplace(
    rc: &mut RunConfig,
    phi: &str,
    tol: f64,
    k_max: usize,
    mc: bool,
    lattice: Option<&str>,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let phi = parse_phi(phi)?;
    if k_max == 0 || k_max > 40 {
        return Err(CliError::Usage(format!(
            "--k-max must lie in 1..=40, got {k_max}"
        )));
    }
    rc.params = json!({ "phi": phi, "tol": tol, "k_max": k_max, "mc": mc, "lattice": lattice });
    let data = rc.data()?.clone();
    let kernel = ScalarKernel::new(data, rc.theta)?;
    let opts = FredholmOptions {
        k_max,
        ..FredholmOptions::default()
    };
    let series = laplace_fredholm_with(&kernel, rc.t, &phi, tol, opts)?;
    let inputs = json!({ "theta": rc.theta, "t": rc.t, "data": kernel.data(), "phi": phi, "tol": tol, "k_max": k_max });
    let mut report = CheckReport::new("laplace", inputs, rc.z, rc.bias);
    report.push_exact("tail majorant below tol", 0.0, series.tail_bound, tol);
    if !series.majorant_holds() {
        report.fail("a computed term exceeds its Hadamard majorant");
    }
    if mc {
        let initial = initial_config(rc, lattice)?;
        let est = mc_laplace(&initial, &phi, &sim_config(rc))?;
        report.push_mc("series vs simulation", series.value, &est);
    }
    emit_reports(rc, &[report], json!({ "series": series }), out)
}

fn mixture(
    rc: &mut RunConfig,
    k: u32,
    eps: Option<f64>,
    survivor_t: Option<f64>,
    no_halving: bool,
    no_duality: bool,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let defaults = MixtureSpec::default();
    let spec = MixtureSpec {
        eps: eps.unwrap_or(defaults.eps),
        survivor_t: survivor_t.unwrap_or(defaults.survivor_t),
        halving: !no_halving,
        check_duality: !no_duality,
        ..defaults
    };
    if !(spec.eps > 0.0) || !(spec.survivor_t > 0.0) {
        return Err(CliError::Usage(
            "--eps and --survivor-t must be positive".into(),
        ));
    }
    rc.params = json!({ "k": k, "spec": spec });
    let report = mixture_check(rc.theta, k, rc.t, &spec, &sim_params(rc, false))?;
    emit_reports(rc, &[report], Value::Null, out)
}

fn approx(rc: &mut RunConfig, f: &str, n: u32, out: &mut dyn Write) -> Result<bool, CliError> {
    if n == 0 || n > 2000 {
        return Err(CliError::Usage(format!(
            "--n must lie in 1..=2000, got {n}"
        )));
    }
    let f = parse_step_function(f)?;
    rc.params = json!({ "f": f, "n": n });
    let mu = approx_product(&f, n);
    match rc.format() {
        Format::Csv => {
            config_comment(rc, out)?;
            writeln!(out, "index,position")?;
            for (i, x) in mu.positions().iter().enumerate() {
                writeln!(out, "{i},{}", format_sig(*x))?;
            }
        }
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert("atoms".into(), json!(mu.positions()));
            write_json(rc, body, out)?;
        }
    }
    Ok(true)
}

fn selftest(
    rc: &mut RunConfig,
    quick: bool,
    only: Option<&str>,
    timings: bool,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let ids: Vec<u8> = match only {
        Some(s) => {
            let ids = parse_groups::<u8>(s, "criteria")?.concat();
            if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
                return Err(CliError::Usage(format!("no criterion {bad}")));
            }
            ids
        }
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    rc.params = json!({ "quick": quick, "criteria": ids, "timings": timings });
    let opts = AcceptanceOptions {
        seed: rc.seed,
        quick,
    };
    let outcomes: Vec<_> = ids.iter().map(|&id| run_criterion(id, &opts)).collect();
    let pass = outcomes.iter().all(|o| o.pass);
    match rc.format() {
        Format::Csv => {
            let reports: Vec<CheckReport> = outcomes.into_iter().flat_map(|o| o.reports).collect();
            config_comment(rc, out)?;
            write_csv_summary(&mut *out, &reports)?;
        }
        Format::Json => {
            let mut criteria = serde_json::to_value(&outcomes).expect("outcomes serialize");
            if !timings {
                for c in criteria.as_array_mut().into_iter().flatten() {
                    if let Some(m) = c.as_object_mut() {
                        m.remove("seconds");
                    }
                }
            }
            let mut body = serde_json::Map::new();
            body.insert("criteria".into(), criteria);
            body.insert("pass".into(), json!(pass));
            write_json(rc, body, out)?;
        }
    }
    Ok(pass)
}
