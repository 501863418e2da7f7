//! Command-line driver.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::algebra::{is_prime, zeta_to_json};
use crate::arith::{arith_newton_data, arith_nondegeneracy_check};
use crate::engine::{assemble_zeta_with, pole_containment, ZetaResult};
use crate::error::{Error, ErrorClass, Result};
use crate::geom::{conical_subdivision, geom_candidate_poles, geom_polygon, kouch_check, poles_json, Mode};
use crate::oracle::verify;
use crate::poly::{parse_input, Problem};

pub const MAX_LEVEL_ENV: &str = "LOCALZETA_MAX_LEVEL";
pub const DEFAULT_MAX_LEVEL_BOUND: usize = 8;

#[derive(Parser, Debug)]
#[command(name = "localzeta", version, about = "Exact local zeta functions of plane curves over p-adic fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Newton polygon, cone subdivision and geometric candidate poles.
    Geom(Args),
    /// Arithmetic Newton polygons of degenerate facets.
    Arith(Args),
    /// Kouchnirenko and arithmetic non-degeneracy reports.
    Check(Args),
    /// The full local zeta function.
    Zeta(Args),
    /// Candidate and actual pole real parts.
    Poles(Args),
    /// Compare predicted point counts against counted ones.
    Verify(Args),
}

#[derive(clap::Args, Debug, Clone)]
pub struct Args {
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the prime stored in the input.
    #[arg(long)]
    pub prime: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Simple)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 4)]
    pub max_level: usize,
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Minimal,
    Simple,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Minimal => Mode::Minimal,
            ModeArg::Simple => Mode::Simple,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Plain,
    Json,
    Latex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Input => 1,
        ErrorClass::Class => 2,
        ErrorClass::Internal => 3,
    }
}

/// One-line machine-readable reason.
pub fn reason_line(e: &Error) -> String {
    format!("error[{}]: {}", e.tag(), e)
}

pub fn canonical_hash(canonical: &Value) -> String {
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

fn level_bound() -> usize {
    std::env::var(MAX_LEVEL_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_LEVEL_BOUND)
}

struct Ctx {
    problem: Problem,
    p: u64,
    args: Args,
    name: &'static str,
}

struct Doc {
    result: Value,
    decisions: Value,
    plain: String,
    latex: Option<String>,
    failure: Option<(i32, String)>,
}

impl Doc {
    fn new(result: Value, decisions: Value, plain: String) -> Doc {
        Doc { result, decisions, plain, latex: None, failure: None }
    }
}

fn load(args: &Args, name: &'static str) -> Result<Ctx> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let problem = parse_input(&text)?;
    let p = args
        .prime
        .or(problem.p)
        .ok_or_else(|| Error::Schema("no prime given (use --prime or \"p\")".into()))?;
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    Ok(Ctx { problem, p, args: args.clone(), name })
}

fn mode_json(ctx: &Ctx) -> Value {
    json!({ "mode": Mode::from(ctx.args.mode).name() })
}

fn run_geom(ctx: &Ctx) -> Result<Doc> {
    let f = ctx.problem.poly.expanded();
    let poly = geom_polygon(&f.support());
    let sub = conical_subdivision(&poly, ctx.args.mode.into());
    let poles = geom_candidate_poles(&poly);
    let mut plain = format!("f = {f}\nvertices:");
    for v in &poly.vertices {
        plain.push_str(&format!(" ({},{})", v.0, v.1));
    }
    plain.push_str("\nfacets:\n");
    for fa in &poly.facets {
        plain.push_str(&format!("  normal ({},{}) d = {}\n", fa.normal.0, fa.normal.1, fa.d));
    }
    plain.push_str(&format!("cones ({}):\n", Mode::from(ctx.args.mode).name()));
    for c in &sub.cones {
        plain.push_str(&format!("  {}\n", c.label()));
    }
    plain.push_str(&format!("geometric candidate poles: {}\n", poles_json(&poles)));
    let result = json!({
        "polygon": poly.to_json(),
        "subdivision": sub.to_json(),
        "candidate_poles": poles_json(&poles),
        "plot": poly.plot_segments(poly.vertices.iter().map(|v| v.0.max(v.1)).max().unwrap_or(1) + 1),
    });
    Ok(Doc::new(result, mode_json(ctx), plain))
}

fn run_arith(ctx: &Ctx) -> Result<Doc> {
    let f = ctx.problem.poly.expanded();
    let data = arith_newton_data(&f, ctx.p, ctx.problem.poly.sqh())?;
    let poles = data.candidate_poles();
    let mut plain = String::new();
    for fa in &data.facets {
        plain.push_str(&format!(
            "facet ({},{}) d = {}: {}\n",
            fa.normal.0,
            fa.normal.1,
            fa.d,
            if fa.degenerate { "degenerate" } else { "non-degenerate" }
        ));
        for poly in &fa.polygons {
            plain.push_str(&format!("  theta = {}:", crate::algebra::fmt_rat(&poly.theta.theta)));
            for (d, e) in &poly.segments {
                plain.push_str(&format!(" ({d},{e})"));
            }
            plain.push_str("  vertices:");
            for k in 1..=poly.r() {
                plain.push_str(&format!(" {}", poly.vertex_label(k)));
            }
            plain.push('\n');
        }
    }
    plain.push_str(&format!("arithmetic candidate poles: {}\n", poles_json(&poles)));
    let result = json!({ "facets": data.to_json(), "candidate_poles": poles_json(&poles) });
    Ok(Doc::new(result, json!({}), plain))
}

fn run_check(ctx: &Ctx) -> Result<Doc> {
    let f = ctx.problem.poly.expanded();
    let kouch = kouch_check(&f, ctx.p)?;
    let data = arith_newton_data(&f, ctx.p, ctx.problem.poly.sqh())?;
    let arith = arith_nondegeneracy_check(&f, &data, ctx.p)?;
    let mut plain = format!(
        "Kouchnirenko: {}\narithmetic: {}\n",
        if kouch.nondegenerate() { "non-degenerate" } else { "degenerate" },
        if arith.nondegenerate() { "non-degenerate" } else { "degenerate" },
    );
    for e in &arith.entries {
        plain.push_str(&format!("  [{}] ({}) {}: {}\n", if e.ok { "ok" } else { "FAIL" }, e.condition, e.scope, e.detail));
    }
    let result = json!({ "kouchnirenko": kouch.to_json(), "arithmetic": arith.to_json() });
    let mut doc = Doc::new(result, json!({}), plain);
    if let Some(e) = arith.first_failure() {
        doc.failure = Some((exit_code(&e), reason_line(&e)));
    }
    Ok(doc)
}

fn assemble(ctx: &Ctx) -> Result<ZetaResult> {
    let f = ctx.problem.poly.expanded();
    assemble_zeta_with(&f, ctx.p, ctx.args.mode.into(), ctx.problem.poly.sqh())
}

fn decisions(ctx: &Ctx, r: &ZetaResult) -> Value {
    json!({ "mode": Mode::from(ctx.args.mode).name(), "facets": r.decisions_json() })
}

fn run_zeta(ctx: &Ctx) -> Result<Doc> {
    let r = assemble(ctx)?;
    let mut plain = format!("Z(s) = {}\n", r.total);
    plain.push_str(&format!("  unit torus: {}\n", r.unit_part));
    for c in &r.per_cone {
        plain.push_str(&format!("  {} [{}]: {}\n", c.label, c.route, c.value));
    }
    plain.push_str(&format!("real parts of poles: {}\n", poles_json(&r.actual_pole_parts)));
    let mut doc = Doc::new(r.to_json(), decisions(ctx, &r), plain);
    doc.latex = Some(r.to_latex());
    Ok(doc)
}

fn run_poles(ctx: &Ctx) -> Result<Doc> {
    let r = assemble(ctx)?;
    let c = pole_containment(&r);
    let plain = format!(
        "actual: {}\ncandidates: {}\nstrict candidates: {}\ncontained: {}\ncontained in strict set: {}\n",
        poles_json(&r.actual_pole_parts),
        poles_json(&r.candidate_set),
        poles_json(&r.strict_set),
        c.contained(),
        c.contained_strict(),
    );
    let result = json!({
        "actual_pole_parts": poles_json(&r.actual_pole_parts),
        "candidate_set": poles_json(&r.candidate_set),
        "strict_set": poles_json(&r.strict_set),
        "contained": c.contained(),
        "contained_strict": c.contained_strict(),
        "offending": poles_json(&c.offending),
        "offending_strict": poles_json(&c.offending_strict),
    });
    let latex: String = r.to_latex().lines().skip(2).map(|l| format!("{l}\n")).collect();
    let mut doc = Doc::new(result, decisions(ctx, &r), plain);
    doc.latex = Some(latex);
    Ok(doc)
}

fn run_verify(ctx: &Ctx) -> Result<Doc> {
    let bound = level_bound();
    if ctx.args.max_level == 0 || ctx.args.max_level > bound {
        return Err(Error::LevelTooLarge(ctx.args.max_level, bound));
    }
    let r = assemble(ctx)?;
    let f = ctx.problem.poly.expanded();
    let report = verify(&f, ctx.p, ctx.args.max_level, &r.total)?;
    let mut plain = String::from("m  predicted  counted\n");
    for row in &report.rows {
        plain.push_str(&format!(
            "{}  {}  {}{}\n",
            row.m,
            crate::algebra::fmt_rat(&row.predicted),
            row.counted,
            if row.ok() { "" } else { "  MISMATCH" }
        ));
    }
    let result = json!({ "report": report.to_json(), "total": zeta_to_json(&r.total) });
    let mut doc = Doc::new(result, decisions(ctx, &r), plain);
    if let Some(m) = report.first_mismatch() {
        doc.failure = Some((3, format!("error[VerificationMismatch]: first mismatch at level {m}")));
    }
    Ok(doc)
}

fn render(ctx: &Ctx, doc: Doc) -> Result<Outcome> {
    let stdout = match ctx.args.format {
        Format::Json => {
            let env = json!({
                "command": ctx.name,
                "p": ctx.p,
                "input_sha256": canonical_hash(&ctx.problem.canonical),
                "input": ctx.problem.canonical,
                "decisions": doc.decisions,
                "result": doc.result,
            });
            serde_json::to_string_pretty(&env).expect("json values serialize") + "\n"
        }
        Format::Plain => format!(
            "# {} p={} input sha256 {}\n{}",
            ctx.name,
            ctx.p,
            canonical_hash(&ctx.problem.canonical),
            doc.plain
        ),
        Format::Latex => match doc.latex {
            Some(l) => format!("% input sha256 {}\n{}", canonical_hash(&ctx.problem.canonical), l),
            None => {
                return Err(Error::Schema(format!("latex output is not available for {}", ctx.name)))
            }
        },
    };
    let (code, stderr) = match doc.failure {
        Some((c, line)) => (c, line + "\n"),
        None => (0, String::new()),
    };
    Ok(Outcome { code, stdout, stderr })
}

pub fn run(cli: Cli) -> Outcome {
    let (args, name, op): (&Args, &'static str, fn(&Ctx) -> Result<Doc>) = match &cli.command {
        Command::Geom(a) => (a, "geom", run_geom),
        Command::Arith(a) => (a, "arith", run_arith),
        Command::Check(a) => (a, "check", run_check),
        Command::Zeta(a) => (a, "zeta", run_zeta),
        Command::Poles(a) => (a, "poles", run_poles),
        Command::Verify(a) => (a, "verify", run_verify),
    };
    let out = load(args, name).and_then(|ctx| op(&ctx).and_then(|doc| render(&ctx, doc)));
    out.unwrap_or_else(|e| Outcome {
        code: exit_code(&e),
        stdout: String::new(),
        stderr: reason_line(&e) + "\n",
    })
}

pub fn main_entry() -> i32 {
    let out = run(Cli::parse());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}
