//! CSV tables, JSON sidecars and the command dispatcher.

use crate::commands::{self, Exclusion, Gate, HarnessError, Result, C};
use crate::config::RunConfig;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Dispersion,
    Factorize,
    Semianalytic,
    Direct,
    Compare,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::Factorize => "factorize",
            Command::Semianalytic => "semianalytic",
            Command::Direct => "direct",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
        }
    }
}

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub quiet: bool,
    /// Write the full direct-solver field as a binary dump.
    pub dump: bool,
    /// Worker cap for sweeps; 0 picks a default.
    pub workers: usize,
}

/// Formats with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_c(c: Option<C>) -> (f64, f64) {
    c.map_or((f64::NAN, f64::NAN), |C(a, b)| (a, b))
}

fn exclusion_name(e: Option<Exclusion>) -> &'static str {
    match e {
        None => "",
        Some(Exclusion::Quadrant) => "quadrant",
        Some(Exclusion::Pole) => "pole",
        Some(Exclusion::Strip) => "strip",
        Some(Exclusion::NearField) => "near-field",
        Some(Exclusion::FarFieldFailure) => "far-field-failure",
    }
}

/// Writes a CSV with the given header, one line per row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_json(path: &Path, cfg: &RunConfig, command: Command, body: impl Serialize) -> Result<()> {
    let doc = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "configHash": cfg.hash(),
        "config": cfg,
        "report": body,
    });
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn exit_for(gates: &[Gate]) -> i32 {
    if commands::gates_ok(gates) {
        0
    } else {
        3
    }
}

fn print_gates(gates: &[Gate]) {
    for g in gates {
        println!(
            "  {:<20} {:.3e} (limit {:.3e}) {}{}",
            g.name,
            g.value,
            g.limit,
            if g.passed { "ok" } else { "EXCEEDED" },
            if g.enforced { "" } else { " [informational]" }
        );
    }
}

/// Runs one command and writes its outputs below `out`. Returns the exit
/// code for a completed run.
pub fn run(command: Command, cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<i32> {
    fs::create_dir_all(out)?;
    match command {
        Command::Dispersion => {
            let r = commands::dispersion(cfg)?;
            let rows = r.rows();
            write_csv(
                &out.join("dispersion.csv"),
                &["quantity", "re", "im"],
                rows.iter().map(|(n, a, b)| vec![n.clone(), num(*a), num(*b)]),
            )?;
            write_json(&out.join("dispersion.json"), cfg, command, &r)?;
            if !opts.quiet {
                for (n, a, b) in &rows {
                    println!("{n:<20} {a:+.12e} {b:+.12e}");
                }
            }
            Ok(exit_for(&r.gates))
        }
        Command::Factorize => {
            let r = commands::factorize(cfg)?;
            write_json(&out.join("factorize.json"), cfg, command, &r)?;
            if !opts.quiet {
                if let Some(n) = &r.notice {
                    println!("{n}");
                }
                println!("nodes {}  closed form {}  ε {:.3e}  probe offset {:.2e}", r.node_count, r.closed_form, r.epsilon, r.probe_offset);
                println!("residualEstimate {:.3e}", r.residual_estimate);
                print_gates(&r.gates);
            }
            Ok(exit_for(&r.gates))
        }
        Command::Semianalytic => {
            let r = commands::semianalytic(cfg)?;
            write_csv(
                &out.join("semianalytic.csv"),
                &["theta_deg", "abs_u", "re_u", "im_u", "excluded"],
                r.rows.iter().map(|row| {
                    let (re, im) = opt_c(row.value);
                    vec![num(row.theta_deg), num(re.hypot(im)), num(re), num(im), exclusion_name(row.exclusion).into()]
                }),
            )?;
            write_json(&out.join("semianalytic.json"), cfg, command, json!({"nodeCount": r.node_count, "radius": r.radius, "gates": r.gates}))?;
            if !opts.quiet {
                println!("far field at R = {} on {} angles, {} nodes", r.radius, r.rows.len(), r.node_count);
                print_gates(&r.gates);
            }
            Ok(exit_for(&r.gates))
        }
        Command::Direct => {
            let (field, r) = commands::run_direct(cfg)?;
            write_csv(
                &out.join("direct.csv"),
                &["theta_deg", "x", "y", "abs_u", "re_u", "im_u"],
                r.samples.iter().map(|(t, x, y, C(re, im))| {
                    vec![num(*t), x.to_string(), y.to_string(), num(re.hypot(*im)), num(*re), num(*im)]
                }),
            )?;
            if opts.dump {
                let f = fs::File::create(out.join("field.bin"))?;
                field.write_binary(std::io::BufWriter::new(f))?;
            }
            write_json(&out.join("direct.json"), cfg, command, json!({"unknowns": r.unknowns, "gates": r.gates}))?;
            if !opts.quiet {
                println!("direct solve on {} unknowns", r.unknowns);
                print_gates(&r.gates);
            }
            Ok(exit_for(&r.gates))
        }
        Command::Compare => run_compare(cfg, out, opts),
        Command::Sweep => run_sweep(cfg, out, opts),
    }
}

fn run_compare(cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<i32> {
    fs::create_dir_all(out)?;
    let (r, failure) = commands::compare(cfg)?;
    write_csv(
        &out.join("compare.csv"),
        &["theta_deg", "abs_u_semi", "abs_u_num", "re_semi", "im_semi", "re_num", "im_num", "rel_diff"],
        r.rows.iter().map(|row| {
            let (rs, is) = opt_c(row.semi);
            let C(rn, inn) = row.num;
            vec![num(row.theta_deg), num(rs.hypot(is)), num(rn.hypot(inn)), num(rs), num(is), num(rn), num(inn), num(row.rel_diff)]
        }),
    )?;
    let body = json!({
        "summary": r.summary,
        "gates": r.gates,
        "farFieldError": failure.as_ref().map(|e| e.to_string()),
    });
    write_json(&out.join("compare.json"), cfg, Command::Compare, body)?;
    if !opts.quiet {
        println!(
            "R = {}: median rel diff {:.4}, p90 {:.4}, {} angles used, {} excluded",
            r.summary.radius,
            r.summary.median,
            r.summary.p90,
            r.summary.included,
            r.summary.excluded.len()
        );
        print_gates(&r.gates);
    }
    if let Some(e) = failure {
        log::error!("far field unavailable: {e}");
        return Ok(1);
    }
    Ok(exit_for(&r.gates))
}

/// Directory name for one sweep point, e.g. `M=1_N=4`.
pub fn point_dir(point: &[(String, f64)]) -> PathBuf {
    if point.is_empty() {
        return PathBuf::from("base");
    }
    let mut s = String::new();
    for (i, (k, v)) in point.iter().enumerate() {
        if i > 0 {
            s.push('_');
        }
        let _ = write!(s, "{k}={v}");
    }
    PathBuf::from(s)
}

fn run_sweep(cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<i32> {
    let points = cfg.sweep_points();
    let workers = if opts.workers > 0 { opts.workers } else { 4 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))?;
    let quiet = RunOptions { quiet: true, ..opts.clone() };
    let results: Vec<serde_json::Value> = pool.install(|| {
        points
            .par_iter()
            .map(|point| {
                let dir = out.join(point_dir(point));
                let outcome = point
                    .iter()
                    .try_fold(cfg.clone(), |c, (k, v)| c.with_parameter(k, *v).map_err(HarnessError::from))
                    .and_then(|c| {
                        let mut c = c;
                        c.output_dir = dir.clone();
                        run_compare(&c, &dir, &quiet)
                    });
                let params: serde_json::Map<String, serde_json::Value> =
                    point.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                match outcome {
                    Ok(code) => json!({"parameters": params, "directory": dir, "exitCode": code}),
                    Err(e) => json!({"parameters": params, "directory": dir, "exitCode": e.exit_code(), "error": e.to_string()}),
                }
            })
            .collect()
    });
    write_json(&out.join("sweep.json"), cfg, Command::Sweep, &results)?;
    let failed = results.iter().filter(|r| r["exitCode"] != 0).count();
    if !opts.quiet {
        println!("sweep: {} points, {} with nonzero status", results.len(), failed);
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

/// Exit code for a dispatcher error.
pub fn error_exit(e: &HarnessError) -> i32 {
    e.exit_code()
}
