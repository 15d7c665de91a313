//! `gptdisc` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 oracle
//! disagreement, 4 failed certificate check.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gptdisc::discrimination::{solve_discrimination, verify_kkt};
use gptdisc::geometry::congruence_check;
use gptdisc::io::{self, ModelFile, SolutionDocument};
use gptdisc::model::{validate_ensemble, validate_model};
use gptdisc::oracle::{dual_vertex_enumeration, primal_random_search};
use gptdisc::{polygon, Error, DEFAULT_TOL};

const ORACLE_AGREEMENT: f64 = 1e-6;
const RANDOM_SEARCH_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "gptdisc", version, about = "Optimal state discrimination in polyhedral GPTs")]
struct Cli {
    /// Absolute tolerance, in (0, 1e-3].
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Attach brute-force oracle results and fail on disagreement.
    #[arg(long, global = true)]
    oracle: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the sampled lower bound attached with --oracle.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; "-" is standard output.
    #[arg(long, global = true, default_value = "-")]
    out: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an ensemble file ("-" reads standard input).
    Solve { ensemble: String },
    /// Re-verify a solution file against an ensemble.
    Verify { ensemble: String, solution: String },
    /// Write the order-n polygon model as model JSON.
    Polygon {
        #[arg(long)]
        n: usize,
    },
    /// Run a worked example: n3, n4 or no-measurement.
    Demo { name: String },
    /// Write state and effect generators of a model as CSV.
    ExportVertices { model: String },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
    OracleDisagreement(String),
    Certificate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::OracleDisagreement(_) => 3,
            Failure::Certificate(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m)
            | Failure::Numerical(m)
            | Failure::OracleDisagreement(m)
            | Failure::Certificate(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure(_) | Error::InternalInconsistency(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_input(path: &str) -> Result<(String, Option<PathBuf>), Failure> {
    if path == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::Invalid(format!("cannot read standard input: {e}")))?;
        Ok((text, None))
    } else {
        let p = Path::new(path);
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::Invalid(format!("cannot read {path}: {e}")))?;
        Ok((text, p.parent().map(Path::to_path_buf)))
    }
}

fn write_output(out: &str, text: &str) -> CmdResult {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if out == "-" {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Invalid(format!("cannot write output: {e}")))
    } else {
        std::fs::write(out, text).map_err(|e| Failure::Invalid(format!("cannot write {out}: {e}")))
    }
}

fn load_checked_ensemble(path: &str, tol: f64) -> Result<gptdisc::Ensemble, Failure> {
    let (text, base) = read_input(path)?;
    let ens = io::parse_ensemble(&text, base.as_deref())?;
    let model_report = validate_model(ens.model(), tol);
    if !model_report.is_valid() {
        return Err(Failure::Invalid(format!("invalid model: {model_report}")));
    }
    if model_report.unrestricted_effects == Some(false) {
        eprintln!("warning: effect cone is smaller than the dual of the state cone");
    }
    for w in &model_report.warnings {
        eprintln!("warning: {w}");
    }
    let report = validate_ensemble(&ens, tol);
    if !report.is_valid() {
        return Err(Failure::Invalid(format!("invalid ensemble: {report}")));
    }
    Ok(ens)
}

fn check_oracle(solver: f64, oracle: f64) -> CmdResult {
    if (solver - oracle).abs() > ORACLE_AGREEMENT {
        return Err(Failure::OracleDisagreement(format!(
            "solver p_guess {solver} disagrees with oracle {oracle}"
        )));
    }
    Ok(())
}

fn cmd_solve(cli: &Cli, path: &str) -> CmdResult {
    let ens = load_checked_ensemble(path, cli.tol)?;
    let solution = solve_discrimination(&ens, cli.tol)?;
    let kkt = verify_kkt(&ens, &solution, cli.tol);
    let geometry = congruence_check(&ens, &solution, cli.tol);
    let (oracle, random_search) = if cli.oracle {
        let o = dual_vertex_enumeration(&ens)?;
        let lb = primal_random_search(&ens, RANDOM_SEARCH_SAMPLES, cli.seed)?;
        (Some(o), Some(lb))
    } else {
        (None, None)
    };
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut doc = serde_json::to_value(SolutionDocument {
                gap: solution.gap(),
                solution: solution.clone(),
                kkt: Some(kkt),
                geometry: Some(geometry),
                oracle: oracle.clone(),
            })
            .expect("serializable");
            if let Some(lb) = random_search {
                doc["random_search_lower_bound"] = lb.into();
            }
            serde_json::to_string_pretty(&doc).expect("serializable")
        }
        Format::Csv => {
            let mut s = String::from("x,prior,success,r\n");
            for x in 0..ens.len() {
                let success = solution.measurement.effects()[x].dot(&ens.states()[x]);
                s.push_str(&format!(
                    "{x},{},{success},{}\n",
                    ens.priors()[x],
                    solution.complementary[x].r
                ));
            }
            s
        }
    };
    write_output(&cli.out, &text)?;
    if let Some(o) = oracle {
        check_oracle(solution.p_guess, o.p_guess)?;
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, ensemble: &str, solution: &str) -> CmdResult {
    let ens = load_checked_ensemble(ensemble, cli.tol)?;
    let (text, _) = read_input(solution)?;
    let doc = io::parse_solution(&text)?;
    let kkt = verify_kkt(&ens, &doc.solution, cli.tol);
    let geometry = congruence_check(&ens, &doc.solution, cli.tol);
    let geometry_ok = geometry.max_residual <= cli.tol;
    let passed = kkt.passed && geometry_ok;
    let report = serde_json::json!({
        "passed": passed,
        "kkt": kkt,
        "geometry": geometry,
    });
    write_output(&cli.out, &serde_json::to_string_pretty(&report).expect("serializable"))?;
    if passed {
        return Ok(());
    }
    let mut failures = kkt.failures(cli.tol);
    if !geometry_ok {
        failures.push(format!("congruence residual: {:e}", geometry.max_residual));
    }
    Err(Failure::Certificate(format!(
        "certificate check failed: {}",
        failures.join("; ")
    )))
}

fn cmd_polygon(cli: &Cli, n: usize) -> CmdResult {
    let model = polygon::polygon_model(n)?;
    write_output(&cli.out, &io::to_json(&ModelFile::from_model(&model)))
}

fn cmd_demo(cli: &Cli, name: &str) -> CmdResult {
    match name {
        "n3" => {
            let demo = polygon::demo_n3(cli.tol)?;
            write_output(&cli.out, &io::to_json(&demo))?;
            check_oracle(demo.solution.p_guess, demo.oracle.p_guess)
        }
        "n4" => {
            let demo = polygon::demo_n4(cli.tol)?;
            write_output(&cli.out, &io::to_json(&demo))?;
            check_oracle(demo.demo.solution.p_guess, demo.demo.oracle.p_guess)
        }
        "no-measurement" => {
            let scan = polygon::threshold_scan(&polygon::default_grid(), cli.tol)?;
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => io::scan_csv(&scan),
                Format::Json => io::to_json(&scan),
            };
            write_output(&cli.out, &text)?;
            let worst = scan
                .rows
                .iter()
                .map(|r| (r.p_guess - r.oracle_p_guess).abs())
                .fold(0.0, f64::max);
            eprintln!("threshold p* = {:.7}", scan.threshold);
            eprintln!("claimed threshold = {}", scan.claimed_threshold);
            eprintln!(
                "dual-feasibility threshold = {:.7}",
                scan.dual_feasibility_threshold
            );
            eprintln!("max |solver - oracle| = {worst:e}");
            for r in &scan.rows {
                check_oracle(r.p_guess, r.oracle_p_guess)?;
            }
            Ok(())
        }
        other => Err(Failure::Invalid(format!(
            "unknown demo '{other}' (expected n3, n4 or no-measurement)"
        ))),
    }
}

fn cmd_export_vertices(cli: &Cli, path: &str) -> CmdResult {
    let (text, _) = read_input(path)?;
    let model = io::parse_model(&text)?;
    write_output(&cli.out, &io::vertices_csv(&model))
}

fn run(cli: &Cli) -> CmdResult {
    if !(cli.tol > 0.0 && cli.tol <= 1e-3) {
        return Err(Failure::Invalid(format!(
            "tolerance must lie in (0, 1e-3], got {}",
            cli.tol
        )));
    }
    match &cli.command {
        Command::Solve { ensemble } => cmd_solve(cli, ensemble),
        Command::Verify { ensemble, solution } => cmd_verify(cli, ensemble, solution),
        Command::Polygon { n } => cmd_polygon(cli, *n),
        Command::Demo { name } => cmd_demo(cli, name),
        Command::ExportVertices { model } => cmd_export_vertices(cli, model),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the invalid-input code.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
