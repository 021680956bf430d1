use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aym_core::discretize::{compare, default_i_max, sweep_csv, ComparisonMetrics};
use aym_core::equilibrium::{
    enumerate_feasible, solve_boltzmann, solve_generalized, stirling_consistency, Enumeration, EquilibriumSolution,
    IntegerLadder, StirlingReport,
};
use aym_core::fit::{emit_overlay, fit_tail, linear_grid, log_grid, FitResult, TailDataset};
use aym_core::format::g17;
use aym_core::sampler::{goodness_of_fit, run_chains, ChainConfig, GoodnessOfFit, SampleSummary, CONNECTIVITY_CHECK_LIMIT};
use aym_core::verify::{verify, NumericsConfig, PrincipleReport};
use aym_core::{EconomyParams, EpiDistribution};
use serde::Serialize;

use crate::args::*;

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_VAR: &str = "AYM_OUTPUT_DIR";

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<aym_core::Error> for Failure {
    fn from(e: aym_core::Error) -> Self {
        let code = if e.is_convergence_failure() {
            EXIT_CONVERGENCE
        } else {
            EXIT_VALIDATION
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

/// Report envelope shared by all JSON outputs.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

struct Rendered {
    text: String,
    extension: &'static str,
}

fn json<T: Serialize>(command: &str, body: T) -> Result<Rendered, Failure> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(aym_core::Error::from)?;
    text.push('\n');
    Ok(Rendered { text, extension: "json" })
}

fn csv(text: String) -> Rendered {
    Rendered { text, extension: "csv" }
}

fn destination(command: &str, output: &OutputArgs, extension: &str) -> Option<PathBuf> {
    if let Some(path) = &output.output {
        return Some(path.clone());
    }
    std::env::var_os(OUTPUT_DIR_VAR)
        .filter(|dir| !dir.is_empty())
        .map(|dir| Path::new(&dir).join(format!("{command}.{extension}")))
}

fn emit(command: &str, output: &OutputArgs, rendered: Rendered) -> Result<(), Failure> {
    match destination(command, output, rendered.extension) {
        Some(path) => fs::write(&path, rendered.text.as_bytes())
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| invalid(format!("cannot write to standard output: {e}")))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Generalized(a) => generalized(a),
        Command::Epi(a) => epi(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Sample(a) => sample(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Fit(a) => fit(a),
        Command::Overlay(a) => overlay(a),
    }
}

fn economy(args: &EconomyArgs) -> Result<EconomyParams, Failure> {
    let params = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
    } else {
        let n = args.n.ok_or_else(|| invalid("--n is required without --config"))?;
        let demand = args.demand.ok_or_else(|| invalid("--D is required without --config"))?;
        match (&args.levels, args.sectors) {
            (Some(levels), None) => EconomyParams::new(levels.clone(), n, demand, args.a0),
            (None, Some(g)) => {
                if !(args.a0 > 0.0) {
                    return Err(invalid("--sectors builds the ladder i*a0 and needs --a0 > 0"));
                }
                EconomyParams::ladder(args.a0, g, n, demand)
            }
            _ => return Err(invalid("give exactly one of --levels, --sectors or --config")),
        }
    };
    params.check()?;
    Ok(params)
}

fn solution_table(params: &EconomyParams, solution: &EquilibriumSolution) -> String {
    let mut out = String::from("sector,level,occupation\n");
    for (i, (a, n)) in params.levels.iter().zip(&solution.occupations).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, g17(*a), g17(*n)));
    }
    out
}

#[derive(Serialize)]
struct SolveBody<'a> {
    params: &'a EconomyParams,
    #[serde(flatten)]
    solution: &'a EquilibriumSolution,
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let params = economy(&args.economy)?;
    let solution = solve_boltzmann(&params, args.tol)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json("solve", SolveBody { params: &params, solution: &solution })?,
        Format::Csv => csv(solution_table(&params, &solution)),
    };
    emit("solve", &args.output, rendered)
}

fn generalized(args: GeneralizedArgs) -> Result<(), Failure> {
    let params = economy(&args.economy)?;
    let solution = solve_generalized(&params, args.c, args.tol)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json("generalized", SolveBody { params: &params, solution: &solution })?,
        Format::Csv => csv(solution_table(&params, &solution)),
    };
    emit("generalized", &args.output, rendered)
}

fn grid(args: &GridArgs, a0: f64, largest_mean: f64) -> Result<Vec<f64>, Failure> {
    if let Some(g) = &args.grid {
        if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("grid value {bad} is not finite")));
        }
        let mut g = g.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        return Ok(g);
    }
    let lo = args.grid_min.unwrap_or(a0);
    let hi = args.grid_max.unwrap_or(a0 + 10.0 * (largest_mean - a0));
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(invalid(format!("grid range [{lo}, {hi}] is empty")));
    }
    if args.log_grid {
        Ok(log_grid(lo, hi, args.grid_points)?)
    } else {
        Ok(linear_grid(lo, hi, args.grid_points))
    }
}

#[derive(Serialize)]
struct CurvePoint {
    a: f64,
    pdf: f64,
    tail: f64,
}

#[derive(Serialize)]
struct EpiBody {
    mean_demand: f64,
    a0: f64,
    alpha: f64,
    mean: f64,
    variance: f64,
    curve: Vec<CurvePoint>,
}

fn epi(args: EpiArgs) -> Result<(), Failure> {
    let dist = EpiDistribution::new(args.law.mean_demand, args.law.a0)?;
    let cuts = grid(&args.grid, dist.a0, dist.mean_demand)?;
    let rendered = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => csv(dist.curve_csv(&cuts)),
        Format::Json => {
            let (mean, variance) = dist.moments();
            let curve = cuts
                .iter()
                .map(|&a| CurvePoint {
                    a,
                    pdf: dist.pdf(a),
                    tail: dist.tail(a),
                })
                .collect();
            json(
                "epi",
                EpiBody {
                    mean_demand: dist.mean_demand,
                    a0: dist.a0,
                    alpha: dist.alpha,
                    mean,
                    variance,
                    curve,
                },
            )?
        }
    };
    emit("epi", &args.output, rendered)
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    numerics: &'a NumericsConfig,
    #[serde(flatten)]
    report: &'a PrincipleReport,
}

fn principle_table(r: &PrincipleReport) -> String {
    let rows = [
        ("mean_demand", r.mean_demand),
        ("a0", r.a0),
        ("alpha", r.alpha),
        ("fisher_expected", r.fisher_expected),
        ("fisher_metric", r.fisher_metric),
        ("fisher_statistical", r.fisher_statistical),
        ("fisher_kinematical", r.fisher_kinematical),
        ("structural_q", r.structural_q),
        ("structural_residual", r.structural_residual),
        ("regularity_residual", r.regularity_residual),
        ("epi_residual_pointwise", r.epi_residual_pointwise),
        ("generating_residual", r.generating_residual),
        ("euler_lagrange_residual", r.euler_lagrange_residual),
        ("qtilde_value", r.qtilde_value),
        ("qtilde_spread", r.qtilde_spread),
        ("boundary_constant", r.boundary_constant),
        ("boundary_identity_residual", r.boundary_identity_residual),
        ("kappa", r.kappa),
    ];
    let mut out = String::from("quantity,value\n");
    for (name, value) in rows {
        out.push_str(&format!("{name},{}\n", g17(value)));
    }
    out
}

fn verify_cmd(args: VerifyArgs) -> Result<(), Failure> {
    let dist = EpiDistribution::new(args.law.mean_demand, args.law.a0)?;
    let numerics = NumericsConfig {
        fd_step_theta: args.fd_step_theta,
        fd_step_x: args.fd_step_x,
        quadrature_tol: args.quadrature_tol,
        grid_points: args.grid_points,
        grid_widths: args.grid_widths,
    };
    let report = verify(&dist, &numerics)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json(
            "verify",
            VerifyBody {
                numerics: &numerics,
                report: &report,
            },
        )?,
        Format::Csv => csv(principle_table(&report)),
    };
    emit("verify", &args.output, rendered)
}

#[derive(Serialize)]
struct CompareBody {
    metrics: Vec<ComparisonMetrics>,
}

fn compare_cmd(args: CompareArgs) -> Result<(), Failure> {
    let mut ratios = args.r.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let metrics: Vec<ComparisonMetrics> = std::thread::scope(|scope| {
        let handles: Vec<_> = ratios
            .iter()
            .map(|&r| scope.spawn(move || compare(r, args.i_max.unwrap_or_else(|| default_i_max(r)))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison thread panicked"))
            .collect::<Result<_, _>>()
    })?;
    let rendered = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => csv(sweep_csv(&metrics)),
        Format::Json => json("compare", CompareBody { metrics })?,
    };
    emit("compare", &args.output, rendered)
}

#[derive(Serialize)]
struct SampleBody<'a> {
    params: &'a EconomyParams,
    ladder: &'a IntegerLadder,
    config: ChainConfig,
    chains: u64,
    #[serde(flatten)]
    summary: &'a SampleSummary,
    /// Against the exact weights, when the feasible set is small enough.
    exact_comparison: Option<GoodnessOfFit>,
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let params = economy(&args.economy)?;
    let ladder = IntegerLadder::from_params(&params, args.unit)?;
    let config = ChainConfig {
        steps: args.steps,
        burn_in: args.burn_in,
        seed: args.seed,
        thin: args.thin,
    };
    config.check()?;
    let summary = run_chains(&ladder, &config, args.chains)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => csv(summary.to_csv()),
        Format::Json => {
            let exact_comparison = match enumerate_feasible(&ladder, CONNECTIVITY_CHECK_LIMIT) {
                Ok(exact) => Some(goodness_of_fit(&summary, &exact)),
                Err(aym_core::Error::InstanceTooLarge { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            json(
                "sample",
                SampleBody {
                    params: &params,
                    ladder: &ladder,
                    config,
                    chains: args.chains,
                    summary: &summary,
                    exact_comparison,
                },
            )?
        }
    };
    emit("sample", &args.output, rendered)
}

#[derive(Serialize)]
struct EnumerateBody<'a> {
    params: &'a EconomyParams,
    ladder: &'a IntegerLadder,
    count: usize,
    total_weight: String,
    #[serde(flatten)]
    enumeration: &'a Enumeration,
    stirling: Option<StirlingReport>,
}

fn enumerate(args: EnumerateArgs) -> Result<(), Failure> {
    let params = economy(&args.economy)?;
    let ladder = IntegerLadder::from_params(&params, args.unit)?;
    let enumeration = enumerate_feasible(&ladder, args.cap)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut out = String::from("state,weight,log_weight\n");
            for s in &enumeration.states {
                out.push_str(&format!("{},{},{}\n", s.occupation.key(), s.weight, g17(s.log_weight)));
            }
            csv(out)
        }
        Format::Json => {
            let stirling = if args.stirling {
                Some(stirling_consistency(&params, args.unit, args.cap)?)
            } else {
                None
            };
            json(
                "enumerate",
                EnumerateBody {
                    params: &params,
                    ladder: &ladder,
                    count: enumeration.states.len(),
                    total_weight: enumeration.total_weight().to_string(),
                    enumeration: &enumeration,
                    stirling,
                },
            )?
        }
    };
    emit("enumerate", &args.output, rendered)
}

#[derive(Serialize)]
struct FitBody<'a> {
    source: &'a str,
    points: usize,
    a0_fixed: bool,
    #[serde(flatten)]
    fit: FitResult,
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let data = TailDataset::load_csv(&args.input)?;
    let result = fit_tail(&data, args.a0)?;
    let rendered = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json(
            "fit",
            FitBody {
                source: &data.source_label,
                points: data.points.len(),
                a0_fixed: args.a0.is_some(),
                fit: result,
            },
        )?,
        Format::Csv => csv(format!(
            "d_over_n,a0,rss_log,points_used\n{},{},{},{}\n",
            g17(result.d_over_n),
            g17(result.a0),
            g17(result.rss_log),
            result.points_used
        )),
    };
    emit("fit", &args.output, rendered)
}

fn overlay(args: OverlayArgs) -> Result<(), Failure> {
    if args.output.format == Some(Format::Json) {
        return Err(invalid("overlay emits a CSV table only"));
    }
    let data = args.input.as_ref().map(TailDataset::load_csv).transpose()?;
    let largest = args.mean_demand.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cuts = grid(&args.grid, args.a0, largest)?;
    let table = emit_overlay(data.as_ref(), &args.mean_demand, args.a0, &cuts)?;
    emit("overlay", &args.output, csv(table))
}
