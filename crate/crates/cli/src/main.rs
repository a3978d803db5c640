use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use dpsplit::dp::{self, bellman_residual, solve_discounted_pi, solve_discounted_vi, SizeGuard};
use dpsplit::generate::{generate, InstanceFamily};
use dpsplit::invariant::primary_decomposition_detailed;
use dpsplit::io::{InstanceFile, LoadedInstance, LqrFile};
use dpsplit::lqr::{block_diagonal_check, quadratic_form, riccati_backward, trajectory_cost, RealMatrix};
use dpsplit::scalar::{format_rational, parse_rational};
use dpsplit::{CheckOptions, Checker, CostScalar, DecompositionReport, Error, FamilySelection, Horizon, Rational, Witness};

/// Largest state and input spaces accepted without `--force`.
const CLI_GUARD: SizeGuard = SizeGuard {
    max_states: 1 << 16,
    max_inputs: 1 << 12,
};

#[derive(Parser)]
#[command(name = "dpsplit", version, about = "Decomposition analysis for DPs with linear dynamics over GF(p)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the instance exactly and print the optimal cost-to-go.
    Solve(SolveArgs),
    /// Print the primary decomposition of A, or validate the given one.
    Decompose(DecomposeArgs),
    /// Run the full decomposition check and print the JSON report.
    Check(CheckArgs),
    /// Riccati recursion and block-diagonal check for a real LQR instance.
    Lqr(LqrArgs),
    /// Write a seeded random instance file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum HorizonKind {
    Finite,
    Discounted,
}

#[derive(Args)]
struct HorizonArgs {
    /// Override the horizon kind in the file.
    #[arg(long, value_enum)]
    horizon: Option<HorizonKind>,
    /// Finite horizon length.
    #[arg(long = "T", id = "T")]
    t: Option<usize>,
    /// Discount factor as "num/den".
    #[arg(long)]
    alpha: Option<String>,
    /// Accept instances beyond the desk-scale limits.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[command(flatten)]
    horizon: HorizonArgs,
    /// Value-iteration stopping tolerance ("num/den") for discounted runs.
    #[arg(long, default_value = "1/1000000")]
    tol: String,
    /// Print every stage J_t, not only J_0.
    #[arg(long = "all-t")]
    all_t: bool,
    /// Print the full argmin sets.
    #[arg(long)]
    argmin: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    file: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Restricted,
    Projected,
    Both,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[command(flatten)]
    horizon: HorizonArgs,
    #[arg(long, value_enum, default_value = "both")]
    family: FamilyArg,
    /// Largest number of projected action tuples enumerated per state.
    #[arg(long, default_value_t = 1_000_000)]
    tuple_cap: u64,
    /// Re-verify the witnesses in a saved report (or a witness list) instead
    /// of printing a new report.
    #[arg(long = "verify-witness", value_name = "REPORT")]
    verify_witness: Option<PathBuf>,
}

#[derive(Args)]
struct LqrArgs {
    file: PathBuf,
    /// Block-diagonal tolerance; overrides the file.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    RangeForced,
    InvertibleA,
    Unconstrained,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "unconstrained")]
    family: GenFamily,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    p: u64,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long = "T", id = "T", default_value_t = 1)]
    t: usize,
    /// Discounted horizon instead of `--T`.
    #[arg(long)]
    alpha: Option<String>,
}

enum Failure {
    Validation(String),
    Internal(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TheoremViolation(_) => Self::Violation(e.to_string()),
            Error::DivisionByZero(_) | Error::NotConverged(_) => Self::Internal(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

type CmdResult = Result<Value, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load(path: &Path, horizon: Option<&HorizonArgs>, force: bool) -> Result<LoadedInstance, Failure> {
    let file = InstanceFile::from_json(&read(path)?)?;
    let guard = if force { SizeGuard::UNLIMITED } else { CLI_GUARD };
    let mut loaded = file.load(guard)?;
    if let Some(h) = horizon {
        if let Some(new) = horizon_override(h)? {
            loaded.instance = loaded.instance.with_horizon(new)?;
        }
    }
    Ok(loaded)
}

fn horizon_override(h: &HorizonArgs) -> Result<Option<Horizon<Rational>>, Failure> {
    let kind = match (h.horizon, h.t, &h.alpha) {
        (Some(k), _, _) => k,
        (None, Some(_), None) => HorizonKind::Finite,
        (None, None, Some(_)) => HorizonKind::Discounted,
        (None, None, None) => return Ok(None),
        (None, Some(_), Some(_)) => {
            return Err(Failure::Validation("--T and --alpha are mutually exclusive".into()))
        }
    };
    Ok(Some(match kind {
        HorizonKind::Finite => {
            let t = h
                .t
                .ok_or_else(|| Failure::Validation("--horizon finite needs --T".into()))?;
            Horizon::finite(t)?
        }
        HorizonKind::Discounted => {
            let alpha = h
                .alpha
                .as_deref()
                .ok_or_else(|| Failure::Validation("--horizon discounted needs --alpha".into()))?;
            Horizon::discounted(parse_rational(alpha)?)?
        }
    }))
}

fn strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn horizon_json(h: &Horizon<Rational>) -> Value {
    match h {
        Horizon::Finite(t) => json!({ "finite": t }),
        Horizon::Discounted(a) => json!({ "discounted": { "alpha": format_rational(a) } }),
    }
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let loaded = load(&args.file, Some(&args.horizon), args.horizon.force)?;
    let inst = &loaded.instance;
    let mut out = json!({
        "horizon": horizon_json(inst.horizon()),
        "states": inst.states().size(),
        "inputs": inst.inputs().size(),
    });
    match inst.horizon() {
        Horizon::Finite(_) => {
            let sol = dp::solve(inst)?;
            out["values"] = json!(strings(sol.values.stage(0)));
            if args.all_t {
                let stages: Vec<Vec<String>> =
                    (0..sol.values.num_stages()).map(|t| strings(sol.values.stage(t))).collect();
                out["stages"] = json!(stages);
            }
            if args.argmin {
                let stages = if args.all_t { sol.argmin.num_stages() } else { 1 };
                let sets: Vec<Vec<&[usize]>> = (0..stages)
                    .map(|t| (0..inst.states().size()).map(|x| sol.argmin.set(t, x)).collect())
                    .collect();
                out["argmin"] = json!(sets);
            }
        }
        Horizon::Discounted(_) => {
            let tol = parse_rational(&args.tol)?;
            let pi = solve_discounted_pi(inst)?;
            let exact = pi.values.optimal();
            let residual = bellman_residual(inst, exact)?;
            let vi = solve_discounted_vi(inst, tol.clone())?;
            let gap = exact
                .iter()
                .zip(vi.values.optimal())
                .map(|(a, b)| (a.clone() - b.clone()).abs_value())
                .fold(Rational::default(), |m, v| if v > m { v } else { m });
            let residual_max = residual
                .iter()
                .map(CostScalar::abs_value)
                .fold(Rational::default(), |m, v| if v > m { v } else { m });
            out["values"] = json!(strings(exact));
            out["bellman_residual"] = json!(format_rational(&residual_max));
            out["value_iteration"] = json!({
                "tol": format_rational(&tol),
                "iterations": vi.iterations,
                "values": strings(vi.values.optimal()),
                "error_bound": format_rational(&vi.error_bound),
                "max_gap": format_rational(&gap),
            });
            if args.argmin {
                let sets: Vec<&[usize]> = (0..inst.states().size()).map(|x| pi.argmin.set(0, x)).collect();
                out["argmin"] = json!(sets);
            }
        }
    }
    eprintln!(
        "solved {} states x {} inputs",
        inst.states().size(),
        inst.inputs().size()
    );
    Ok(out)
}

fn basis_columns(s: &dpsplit::Subspace) -> Vec<Vec<u32>> {
    s.basis().to_rows()
}

fn cmd_decompose(args: &DecomposeArgs) -> CmdResult {
    let loaded = load(&args.file, None, args.force)?;
    let a = loaded.instance.a();
    let detail = primary_decomposition_detailed(a);
    let mut out = json!({});
    match &detail {
        Ok(d) => {
            out["char_poly"] = json!(d.factorization.char_poly.to_string());
            let parts: Vec<Value> = d
                .factorization
                .factors
                .iter()
                .zip(d.decomposition.parts())
                .map(|((f, mult), s)| {
                    json!({ "factor": f.to_string(), "multiplicity": mult, "dim": s.dim(), "basis": basis_columns(s) })
                })
                .collect();
            out["primary"] = json!(parts);
        }
        Err(e) if loaded.decomposition.is_none() => return Err(e.clone().into()),
        Err(e) => out["primary_error"] = json!(e.to_string()),
    }
    if let Some(d) = &loaded.decomposition {
        let parts: Vec<Value> = d
            .parts()
            .iter()
            .map(|s| json!({ "dim": s.dim(), "basis": basis_columns(s) }))
            .collect();
        out["given"] = json!({ "accepted": true, "parts": parts });
    }
    eprintln!("decomposition of GF({})^{}", a.field().modulus(), a.rows());
    Ok(out)
}

fn to_value<T: Serialize>(v: &T) -> CmdResult {
    serde_json::to_value(v).map_err(|e| Failure::Internal(e.to_string()))
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    let loaded = load(&args.file, Some(&args.horizon), args.horizon.force)?;
    let decomposition = loaded.decomposition_or_primary()?;
    let checker = Checker::new(&loaded.instance, &decomposition)?;
    if let Some(path) = &args.verify_witness {
        return verify_witnesses(&checker, path);
    }
    let options = CheckOptions {
        tuple_cap: args.tuple_cap,
        family: match args.family {
            FamilyArg::Restricted => FamilySelection::Restricted,
            FamilyArg::Projected => FamilySelection::Projected,
            FamilyArg::Both => FamilySelection::Both,
        },
    };
    let report = checker.run(&options)?;
    let out = to_value(&report)?;
    if let Err(e) = report.ensure_consistent() {
        println!("{}", pretty(&out));
        return Err(e.into());
    }
    eprintln!(
        "range condition {}, {} violation(s)",
        if report.range_condition.holds { "holds" } else { "fails" },
        report.violations.len()
    );
    Ok(out)
}

fn verify_witnesses(checker: &Checker<Rational>, path: &Path) -> CmdResult {
    let text = read(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let witnesses: Vec<Witness> = if value.get("propositions").is_some() {
        let report: DecompositionReport =
            serde_json::from_value(value).map_err(|e| Failure::Validation(format!("report: {e}")))?;
        report.witnesses().into_iter().cloned().collect()
    } else if value.is_array() {
        serde_json::from_value(value).map_err(|e| Failure::Validation(format!("witness list: {e}")))?
    } else {
        vec![serde_json::from_value(value).map_err(|e| Failure::Validation(format!("witness: {e}")))?]
    };
    let results: Vec<bool> = witnesses
        .iter()
        .map(|w| checker.verify_witness(w))
        .collect::<Result<_, _>>()?;
    let all = results.iter().all(|&b| b);
    let out = json!({ "witnesses": witnesses.len(), "reproduced": results, "all_reproduced": all });
    if !all {
        println!("{}", pretty(&out));
        return Err(Failure::Internal("a witness did not reproduce".into()));
    }
    eprintln!("{} witness(es) reproduced", witnesses.len());
    Ok(out)
}

fn matrices(ms: &[RealMatrix<f64>]) -> Vec<Vec<Vec<f64>>> {
    ms.iter().map(RealMatrix::to_rows).collect()
}

fn cmd_lqr(args: &LqrArgs) -> CmdResult {
    let file = LqrFile::from_json(&read(&args.file)?)?;
    let prob = file.load()?;
    let sol = riccati_backward(&prob.a, &prob.b, &prob.p, prob.horizon)?;
    let x0 = file.x0.clone().unwrap_or_else(|| vec![1.0; prob.a.rows()]);
    let predicted = quadratic_form(&sol.k[0], &x0);
    let displayed = trajectory_cost(&prob.a, &prob.b, &prob.p, &sol.gains, &x0);
    let next = trajectory_cost(&prob.a, &prob.b, &prob.p, &sol.gains_next, &x0);
    let rel = |c: f64| (c - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
    let mut out = json!({
        "K": matrices(&sol.k),
        "gains": matrices(&sol.gains),
        "gains_next": matrices(&sol.gains_next),
        "trajectory": {
            "x0": x0,
            "x0_K0_x0": predicted,
            "cost_gain_k_t": displayed,
            "cost_gain_k_t_plus_1": next,
            "relative_error_k_t": rel(displayed),
            "relative_error_k_t_plus_1": rel(next),
        },
    });
    if !prob.parts.is_empty() {
        let tol = args.tol.or(file.tol).unwrap_or(1e-9);
        let report = block_diagonal_check(&prob.a, &prob.b, &prob.p, &prob.parts, prob.horizon, tol)?;
        eprintln!("block-diagonal check {}", if report.holds { "holds" } else { "fails" });
        out["block_diagonal"] = to_value(&report)?;
    }
    Ok(out)
}

fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let family = match args.family {
        GenFamily::RangeForced => InstanceFamily::RangeForced,
        GenFamily::InvertibleA => InstanceFamily::InvertibleA,
        GenFamily::Unconstrained => InstanceFamily::Unconstrained,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let g = generate(&mut rng, family, args.p, args.n, args.m)?;
    let horizon = match &args.alpha {
        Some(a) => Horizon::discounted(parse_rational(a)?)?,
        None => Horizon::finite(args.t)?,
    };
    let inst = dpsplit::DpInstance::with_options(
        g.a,
        g.b,
        g.cost,
        horizon,
        dp::InstanceOptions {
            guard: CLI_GUARD,
            require_injective: true,
        },
    )?;
    to_value(&InstanceFile::from_instance(&inst, Some(&g.decomposition)))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Check(a) => cmd_check(a),
        Command::Lqr(a) => cmd_lqr(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(v) => {
            println!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
