use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use whitham_core::asymptotics::expansion_at;
use whitham_core::continuation::{
    continue_branch, outward_tangent, resume_branch, switch_at_simple, Branch, ContinuationConfig, Origin,
};
use whitham_core::diagnostics::{check_state, nodal_report, norm_tracks, write_norm_tracks};
use whitham_core::io::{
    branch_from_str, canonical_line, convergence_map_csv, file_kind, read_branch, sheet_from_str, write_atomic,
    write_branch, write_sheet, write_sidecar, BRANCH_KIND,
};
use whitham_core::kernel::{probe_table, tabulate, uniform_grid, KernelKind};
use whitham_core::symbol::{
    critical_T, eval_l, eval_l_prime_or_zero, eval_m, find_double_point, simple_bifurcation_points,
};
use whitham_core::twodim::{rho_grid, sample_sheet, theta_grid, SheetOptions};
use whitham_core::{BifurcationKind, Error, SteadyState, SymbolParams};

use crate::config::Settings;
use crate::{CliError, ContinueArgs, KernelArgs, SheetArgs, SymbolArgs, ValidateArgs};

/// Hard bounds applied by `validate` to every converged state.
const IDENTITY_TOL: f64 = 1e-10;
const NODAL_TOL: f64 = 1e-4;

pub const SEED_DOCS: &str = "\
# Reproduction recipes. Each line is a complete command; outputs are deterministic.

# symbol: single interior maximum of l for weak tension, critical Bond numbers
whitham symbol --T 0.2 --xi-max 10 --points 1000 --out symbol_T0.2.csv
whitham symbol --critical-T 1 2
whitham symbol --critical-T 2 3

# kernel: complete monotonicity above 4/pi^2, a negative sample below 1/3
whitham kernel --T 0.5 --periodic --kappa 1 --grid 0.01:3.13:500 --probe-order 3 --out kernel_T0.5.csv
whitham kernel --T 0.2 --grid 0.1:20:2000 --out kernel_T0.2.csv

# continuation from the first simple point at T = 0.5, then resumption
whitham continue --T 0.5 --kappa 1 --k 1 --t0 0.01 --ds 0.005 --steps 200 --out branch_k1.jsonl --norms branch_k1_norms.csv
whitham continue --resume branch_k1.jsonl --steps 100
whitham validate branch_k1.jsonl

# two-dimensional sheets: full disk for (2,3), slit disk for (1,2)
whitham sheet2d --T 0.14221 --k1 2 --k2 3 --rho-max 0.05 --rho-steps 10 --theta-steps 64 --out sheet_23
whitham sheet2d --T 0.23968 --k1 1 --k2 2 --rho-max 0.05 --rho-steps 10 --theta-steps 64 --out sheet_12
whitham validate sheet_23/sheet.jsonl

# nodal identity on a small-amplitude wave
whitham continue --T 0.5 --kappa 1 --k 1 --t0 0.01 --ds 0.005 --steps 3 --out small.jsonl
whitham validate small.jsonl --nodal --quad-points 2000

# the full acceptance suite
cargo test --release -p whitham-core --test acceptance -- --nocapture
";

fn params(t: f64, kappa: f64) -> Result<SymbolParams, CliError> {
    SymbolParams::new(t, kappa).map_err(|e| CliError::usage(e.to_string()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::usage(e.to_string()))?;
            Ok(())
        }
    }
}

fn meta(command: &str, started: Instant, extra: Value) -> Value {
    let mut m = json!({
        "command": command,
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "version": whitham_core::VERSION,
        "elapsed_s": started.elapsed().as_secs_f64(),
    });
    if let (Some(obj), Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    m
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn symbol(a: SymbolArgs, cfg: &Settings) -> Result<(), CliError> {
    if let Some(ks) = a.critical_t {
        let t = critical_T(ks[0], ks[1]).map_err(|e| CliError::usage(e.to_string()))?;
        println!("{t}");
        return Ok(());
    }
    let t = cfg.f64("T", a.t, None)?;
    let kappa = cfg.f64("kappa", a.kappa, Some(1.0))?;
    let xi_max = cfg.f64("xi-max", a.xi_max, Some(10.0))?;
    let points = cfg.usize("points", a.points, Some(1000))?;
    if !(xi_max > 0.0) || points < 2 {
        return Err(CliError::usage("need --xi-max > 0 and --points >= 2"));
    }
    let p = params(t, kappa)?;
    let mut text = String::from("xi,m,l,l_prime\n");
    for xi in uniform_grid(0.0, xi_max, points) {
        let _ = writeln!(
            text,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            xi,
            eval_m(&p, xi)?,
            eval_l(&p, xi)?,
            eval_l_prime_or_zero(&p, xi)?
        );
    }
    emit(a.out.as_deref(), &text)
}

fn parse_grid(spec: &str, periodic: bool) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::usage(format!("grid `{spec}` must be a:b:n with 0 < a < b and n >= 2"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let (a, b, n): (f64, f64, usize) =
        (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
    if !(a > 0.0 && b > a && n >= 2 && b.is_finite()) {
        return Err(bad());
    }
    if periodic && b >= 2.0 * std::f64::consts::PI {
        return Err(CliError::usage(format!("periodic grid `{spec}` must stay inside (0, 2π)")));
    }
    Ok(uniform_grid(a, b, n))
}

pub fn kernel(a: KernelArgs, cfg: &Settings) -> Result<(), CliError> {
    let started = Instant::now();
    let t = cfg.f64("T", a.t, None)?;
    let kappa = cfg.f64("kappa", a.kappa, Some(1.0))?;
    let periodic = cfg.flag("periodic", a.periodic)?;
    let grid_spec = cfg.string("grid", a.grid)?.ok_or_else(|| CliError::usage("missing required option --grid"))?;
    let order = cfg.usize("probe-order", a.probe_order, Some(0))?;
    if order > 3 {
        return Err(CliError::usage("--probe-order must be at most 3"));
    }
    let grid = parse_grid(&grid_spec, periodic)?;
    let kind = if periodic { KernelKind::Periodic } else { KernelKind::WholeLine };
    let table = tabulate(&params(t, kappa)?, kind, &grid)?;
    let report = probe_table(&table, order)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(|e| CliError::usage(e.to_string()))?;
    let report_line = canonical_line(&serde_json::to_value(&report).expect("report serializes")) + "\n";
    let summary = format!(
        "{} kernel at T = {t}: {} samples, min value {:.6e}, {} violations up to order {order}",
        kind,
        grid.len(),
        report.min_value,
        report.violations.len()
    );
    match a.out.as_deref() {
        Some(out) => {
            write_atomic(out, &csv)?;
            let rp = with_suffix(out, ".report.json");
            write_atomic(&rp, report_line.as_bytes())?;
            write_sidecar(out, &meta("kernel", started, json!({ "report": rp.display().to_string() })))?;
            println!("{summary}");
        }
        None => {
            emit(None, std::str::from_utf8(&csv).expect("ascii csv"))?;
            eprintln!("{summary}");
            eprint!("{report_line}");
        }
    }
    Ok(())
}

fn config_from(a: &ContinueArgs, cfg: &Settings) -> Result<ContinuationConfig, CliError> {
    let d = ContinuationConfig::default();
    let c = ContinuationConfig {
        ds: cfg.f64("ds", a.ds, Some(d.ds))?,
        ds_min: cfg.f64("ds-min", a.ds_min, Some(d.ds_min))?,
        ds_max: cfg.f64("ds-max", a.ds_max, Some(d.ds_max))?,
        newton_tol: cfg.f64("newton-tol", a.newton_tol, Some(d.newton_tol))?,
        max_steps: cfg.usize("steps", a.steps, Some(200))?,
        c_min: cfg.f64("c-min", a.c_min, Some(d.c_min))?,
        c_max: cfg.f64("c-max", a.c_max, Some(d.c_max))?,
        amp_max: cfg.f64("amp-max", a.amp_max, Some(d.amp_max))?,
        n_max: cfg.usize("n-max", a.n_max, Some(d.n_max))?,
        ..d
    };
    c.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(c)
}

fn branch_summary(b: &Branch) -> String {
    let last = b.points.last().expect("nonempty branch");
    let events: Vec<String> = b.events.iter().map(|e| format!("{}@{:.8}", e.kind.tag(), e.c)).collect();
    format!(
        "{} points, last c = {:.10}, N = {}, events: [{}]",
        b.len(),
        last.c,
        last.order(),
        events.join(", ")
    )
}

fn write_branch_outputs(
    out: &Path,
    b: &Branch,
    cc: &ContinuationConfig,
    norms: Option<&Path>,
    started: Instant,
) -> Result<(), CliError> {
    write_branch(out, b, cc)?;
    if let Some(np) = norms {
        let mut buf = Vec::new();
        write_norm_tracks(&norm_tracks(b), &mut buf).map_err(|e| CliError::usage(e.to_string()))?;
        write_atomic(np, &buf)?;
    }
    let events: Vec<Value> =
        b.events.iter().map(|e| json!({"index": e.index, "kind": e.kind.tag(), "c": e.c})).collect();
    write_sidecar(out, &meta("continue", started, json!({ "points": b.len(), "events": events })))?;
    println!("{}", branch_summary(b));
    Ok(())
}

pub fn continue_cmd(a: ContinueArgs, cfg: &Settings) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(path) = a.resume.as_deref() {
        let (mut b, mut cc) = read_branch(path)?;
        let steps = cfg.usize("steps", a.steps, Some(100))?;
        resume_branch(&mut b, steps, &cc)?;
        // the stored budget is cumulative, so a resumed file matches an uninterrupted one
        cc.max_steps += steps;
        let out = a.out.clone().unwrap_or_else(|| path.to_path_buf());
        return write_branch_outputs(&out, &b, &cc, a.norms.as_deref(), started);
    }
    let t = cfg.f64("T", a.t, None)?;
    let kappa = cfg.f64("kappa", a.kappa, Some(1.0))?;
    let k = cfg.usize("k", a.k, None)?;
    let t0 = cfg.f64("t0", a.t0, Some(0.01))?;
    let side = cfg.f64("side", a.side, Some(1.0))?;
    let n = cfg.usize("n", a.n, Some(32))?;
    let out = cfg.string("out", a.out.as_ref().map(|p| p.display().to_string()))?;
    let out = PathBuf::from(out.ok_or_else(|| CliError::usage("missing required option --out"))?);
    if k == 0 {
        return Err(CliError::usage("--k must be positive"));
    }
    if !(t0 > 0.0) || side == 0.0 {
        return Err(CliError::usage("need --t0 > 0 and a nonzero --side"));
    }
    let cc = config_from(&a, cfg)?;
    let p = params(t, kappa)?;
    let k32 = k as u32;
    let bp = simple_bifurcation_points(&p, 2 * k32 + 2)
        .into_iter()
        .find(|b| match b.kind {
            BifurcationKind::Simple { k } => k == k32,
            BifurcationKind::Double { k1, k2 } => k1 == k32 || k2 == k32,
            BifurcationKind::Transcritical => false,
        })
        .ok_or_else(|| CliError::numerical(format!("no bifurcation point for k = {k}")))?;
    if let BifurcationKind::Double { k1, k2 } = bp.kind {
        return Err(CliError::usage(format!(
            "k = {k} is part of the double point ({k1}, {k2}) at T = {t}, kappa = {kappa}; use `whitham sheet2d --T {t} --k1 {k1} --k2 {k2}`"
        )));
    }
    if let Err(Error::DegenerateExpansion(msg)) = expansion_at(&p, k32) {
        return Err(CliError::numerical(format!("degenerate expansion at k = {k}: {msg}")));
    }
    let start = switch_at_simple(&bp, t0, side, n, cc.newton_tol, cc.max_newton_iters)?.state;
    let dir = outward_tangent(&start, k)?;
    let b = continue_branch(&start, &dir, Origin::Bifurcation { point: bp }, &cc)?;
    write_branch_outputs(&out, &b, &cc, a.norms.as_deref(), started)
}

pub fn sheet2d(a: SheetArgs, cfg: &Settings) -> Result<(), CliError> {
    let started = Instant::now();
    let t = cfg.f64("T", a.t, None)?;
    let k1 = cfg.usize("k1", a.k1, None)?;
    let k2 = cfg.usize("k2", a.k2, None)?;
    let rho_max = cfg.f64("rho-max", a.rho_max, Some(0.05))?;
    let rho_steps = cfg.usize("rho-steps", a.rho_steps, Some(10))?;
    let theta_steps = cfg.usize("theta-steps", a.theta_steps, Some(64))?;
    let d = SheetOptions::default();
    let n = cfg.usize("n", a.n, Some(d.n))?;
    let tol = cfg.f64("tol", a.tol, Some(d.tol))?;
    let out = cfg.string("out", a.out.as_ref().map(|p| p.display().to_string()))?;
    let out = PathBuf::from(out.ok_or_else(|| CliError::usage("missing required option --out"))?);
    if !(rho_max > 0.0) || rho_steps == 0 || theta_steps == 0 {
        return Err(CliError::usage("need --rho-max > 0 and positive step counts"));
    }
    let base = find_double_point(t, k1 as u32, k2 as u32).map_err(|e| {
        CliError::usage(format!(
            "no double point for T = {t}, (k1, k2) = ({k1}, {k2}): {e}; `whitham symbol --critical-T {k1} {k2}` gives the Bond number where one exists"
        ))
    })?;
    let opts = SheetOptions { n, tol, rho_max, ..d };
    let sheet = sample_sheet(&base, &rho_grid(rho_max, rho_steps), &theta_grid(theta_steps), &opts)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
    let sheet_path = out.join("sheet.jsonl");
    write_sheet(&sheet_path, &sheet, &opts)?;
    write_atomic(&out.join("convergence.csv"), convergence_map_csv(&sheet).as_bytes())?;
    let ratio = sheet.convergence_ratio();
    write_sidecar(
        &sheet_path,
        &meta(
            "sheet2d",
            started,
            json!({ "kappa0": base.params.kappa, "c0": base.c0, "resonant": sheet.resonant, "convergence": ratio }),
        ),
    )?;
    println!(
        "double point ({k1}, {k2}) at T = {t}: kappa0 = {:.12}, c0 = {:.12}, {}resonant, {:.1}% of {} samples converged",
        base.params.kappa,
        base.c0,
        if sheet.resonant { "" } else { "non-" },
        100.0 * ratio,
        sheet.samples.len()
    );
    Ok(())
}

struct Audited {
    index: usize,
    state: SteadyState,
}

fn nodal_all(states: &[Audited], quad: usize) -> Vec<Result<(f64, f64), Error>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(states.len().max(1));
    let chunk = states.len().div_ceil(workers).max(1);
    std::thread::scope(|sc| {
        let handles: Vec<_> = states
            .chunks(chunk)
            .map(|part| {
                sc.spawn(move || {
                    part.iter()
                        .map(|a| nodal_report(&a.state, quad, 16).map(|r| (r.mismatch, r.quadrature_error)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("nodal worker")).collect()
    })
}

pub fn validate(a: ValidateArgs, cfg: &Settings) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.file)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", a.file.display())))?;
    let nodal = cfg.flag("nodal", a.nodal)?;
    let quad = cfg.usize("quad-points", a.quad_points, Some(2000))?;
    let kind = file_kind(&text)?;
    let (states, skipped): (Vec<Audited>, usize) = if kind == BRANCH_KIND {
        let (b, _) = branch_from_str(&text)?;
        (b.points.into_iter().enumerate().map(|(index, state)| Audited { index, state }).collect(), 0)
    } else {
        let (sheet, _) = sheet_from_str(&text)?;
        let total = sheet.samples.len();
        let ok: Vec<Audited> = sheet
            .samples
            .into_iter()
            .enumerate()
            .filter(|(_, s)| s.converged)
            .map(|(index, s)| Audited { index, state: s.state })
            .collect();
        let skipped = total - ok.len();
        (ok, skipped)
    };

    let mut failures = Vec::new();
    let (mut max_id, mut max_gal, mut max_gap) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for s in &states {
        let chk = check_state(&s.state);
        max_id = max_id.max(chk.identity.abs());
        max_gal = max_gal.max(chk.galilean_residual);
        if let Some(g) = chk.region.bound_gap {
            max_gap = max_gap.max(g);
        }
        let mut reasons = Vec::new();
        if !(chk.identity.abs() <= IDENTITY_TOL) {
            reasons.push("integral identity");
        }
        if !(chk.galilean_residual <= IDENTITY_TOL) {
            reasons.push("galilean image");
        }
        if chk.region.violates_bound {
            reasons.push("amplitude bound");
        }
        if chk.region.in_excluded_region {
            reasons.push("excluded region");
        }
        if chk.region.nontrivial_at_unit_speed {
            reasons.push("nontrivial at c = 1");
        }
        if !reasons.is_empty() {
            failures.push(json!({
                "index": s.index, "c": s.state.c, "identity": chk.identity,
                "galilean_residual": chk.galilean_residual, "reasons": reasons,
            }));
        }
    }

    let mut nodal_json = Value::Null;
    let mut nodal_failed = 0usize;
    if nodal {
        let mut worst = 0.0f64;
        let mut unresolved = 0usize;
        for (s, r) in states.iter().zip(nodal_all(&states, quad)) {
            match r {
                Ok((mismatch, qerr)) => {
                    worst = worst.max(mismatch);
                    if mismatch > NODAL_TOL {
                        // an unconverged quadrature says nothing about the state
                        if qerr > NODAL_TOL {
                            unresolved += 1;
                        } else {
                            nodal_failed += 1;
                            failures.push(json!({"index": s.index, "c": s.state.c, "nodal_mismatch": mismatch, "reasons": ["nodal identity"]}));
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        nodal_json = json!({"quad_points": quad, "max_mismatch": worst, "unresolved": unresolved, "failed": nodal_failed});
        println!("nodal identity: max mismatch {worst:.3e} with {quad} quadrature points ({unresolved} unresolved)");
    }

    let passed = failures.is_empty();
    let report = json!({
        "file": a.file.display().to_string(),
        "kind": kind,
        "checked": states.len(),
        "skipped_unconverged": skipped,
        "max_identity": max_id,
        "max_galilean_residual": max_gal,
        "max_bound_gap": if max_gap.is_finite() { json!(max_gap) } else { Value::Null },
        "tolerance": IDENTITY_TOL,
        "nodal": nodal_json,
        "failures": failures,
        "passed": passed,
    });
    let out = a.out.clone().unwrap_or_else(|| with_suffix(&a.file, ".validation.json"));
    write_atomic(&out, (canonical_line(&report) + "\n").as_bytes())?;
    println!(
        "{kind}: {} states checked ({skipped} unconverged skipped), max identity {max_id:.3e}, max galilean {max_gal:.3e}: {}",
        states.len(),
        if passed { "PASS" } else { "FAIL" }
    );
    if passed {
        Ok(())
    } else {
        Err(CliError::validation(format!("{} state(s) failed validation, see {}", failures.len(), out.display())))
    }
}
