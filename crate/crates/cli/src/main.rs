use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Signed;

use tremble::compiler::{compile_f_eps, emit_fixp_instance};
use tremble::game::{Game, MixedProfile};
use tremble::logic::{emit_eps_pe, emit_pe, emit_pe_bound, smt2_script, BoundReport};
use tremble::numfmt::{format_dyadic, format_fixed, format_rational, format_scientific, parse_rational};
use tremble::solver::{
    approximate_pe, grid_oracle_with_budget, solve_fixed_point, SolveConfig, SolveStatus, DEFAULT_GRID_BUDGET,
};
use tremble::verifier::check_certificate;

/// Equilibrium refinement toolkit: compile games to fixed-point circuits,
/// approximate trembling-hand perfect equilibria, emit formulas.
#[derive(Debug, Parser)]
#[command(name = "tremble", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Approximate a trembling-hand perfect equilibrium with a shrinking-eps schedule.
    Solve {
        game: PathBuf,
        #[arg(long, value_parser = rational)]
        delta: BigRational,
        /// Also write the per-stage trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Search for a fixed point of F^eps at a single eps.
    SolveEps {
        game: PathBuf,
        #[arg(long, value_parser = rational)]
        eps: BigRational,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the F^eps circuit of a game.
    Compile {
        game: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check an eps-perfect equilibrium certificate for a profile.
    Verify {
        game: PathBuf,
        profile: PathBuf,
        #[arg(long, value_parser = rational)]
        eps: BigRational,
        #[arg(long, value_parser = rational, default_value = "0")]
        slack: BigRational,
    },
    /// Write the closed FIXP instance (profile polytope and circuit with eps* plugged in).
    EmitFixp {
        game: PathBuf,
        #[arg(long, value_parser = rational)]
        delta: BigRational,
        #[arg(long = "c-constant", visible_alias = "c", value_parser = rational, default_value = "1")]
        c: BigRational,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write an equilibrium formula as an SMT-LIB script.
    EmitLogic {
        game: PathBuf,
        #[arg(long, value_enum, default_value_t = FormulaKind::PeBound)]
        formula: FormulaKind,
        /// Required for pe-bound.
        #[arg(long, value_parser = rational)]
        delta: Option<BigRational>,
        /// Keep the trivially true k = l best-response clauses.
        #[arg(long)]
        no_prune: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report the size of eps* in logarithmic form.
    Bound {
        game: PathBuf,
        #[arg(long, value_parser = rational)]
        delta: BigRational,
        #[arg(long = "c-constant", visible_alias = "c", value_parser = rational, default_value = "1")]
        c: BigRational,
        /// Also print eps* itself, refused when log2(1/eps*) exceeds --max-bits.
        #[arg(long)]
        positional: bool,
        #[arg(long, default_value_t = 4096)]
        max_bits: u64,
    },
    /// Brute-force grid search for the profile of least residual.
    Oracle {
        game: PathBuf,
        #[arg(long, value_parser = rational)]
        eps: BigRational,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_BUDGET)]
        budget: u128,
        #[command(flatten)]
        format: FormatArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormulaKind {
    EpsPe,
    Pe,
    PeBound,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    /// Worker threads for the parallel starts; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 128)]
    precision_bits: u64,
    #[arg(long, default_value_t = SolveConfig::default().max_iters)]
    max_iters: usize,
    /// Abandon a start after this many iterations without a smaller residual.
    #[arg(long, default_value_t = SolveConfig::default().stall_iters)]
    stall_iters: usize,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    damping: BigRational,
    #[arg(long, value_parser = rational, default_value = "1e-12")]
    tol: BigRational,
    #[arg(long, default_value_t = 64)]
    max_stages: usize,
}

impl SolverArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            damping: self.damping.clone(),
            residual_tol: self.tol.clone(),
            max_iters: self.max_iters,
            starts: self.starts,
            seed: self.seed,
            precision_bits: self.precision_bits,
            stall_iters: self.stall_iters,
            max_stages: self.max_stages,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Args)]
struct FormatArgs {
    /// Print probabilities exactly as p/2^e (the default).
    #[arg(long, conflicts_with = "decimal")]
    exact: bool,
    /// Print probabilities rounded to this many decimal places instead.
    /// Rounded output is for reading and may not re-parse as a profile.
    #[arg(long, value_name = "DIGITS")]
    decimal: Option<usize>,
}

impl FormatArgs {
    fn profile(&self, x: &MixedProfile) -> String {
        match self.decimal {
            Some(d) => x.to_text_with(|v| format_fixed(v, d)),
            None => x.to_text_with(format_dyadic),
        }
    }
}

fn rational(s: &str) -> Result<BigRational, String> {
    parse_rational(s).ok_or_else(|| format!("`{s}` is not a rational number"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_game(path: &Path) -> Result<Game> {
    read(path)?
        .parse()
        .with_context(|| format!("invalid game file {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn require_positive(name: &str, v: &BigRational) -> Result<()> {
    if !v.is_positive() {
        bail!("--{name} must be positive");
    }
    Ok(())
}

fn status_code(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::NoConvergence => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            game,
            delta,
            trace,
            solver,
            format,
            output,
        } => {
            require_positive("delta", &delta)?;
            let g = read_game(&game)?;
            let out = approximate_pe(&g, &delta, &solver.config())?;
            let mut text = format.profile(&out.profile);
            text.push_str(&format!("# status = {}\n", out.status));
            if let Some(last) = out.trace.stages.last() {
                text.push_str(&format!("# eps = {}\n", format_dyadic(&last.eps)));
                text.push_str(&format!("# residual = {}\n", format_scientific(&last.residual, 6)));
            }
            text.push_str("# stopping rule: successive stages within delta/2 (numerical proxy, not a proof)\n");
            for line in out.trace.to_string().lines() {
                text.push_str(&format!("# {line}\n"));
            }
            if let Some(path) = trace {
                write_output(Some(&path), &out.trace.to_string())?;
            }
            write_output(output.as_deref(), &text)?;
            Ok(status_code(out.status))
        }
        Command::SolveEps {
            game,
            eps,
            solver,
            format,
            output,
        } => {
            let g = read_game(&game)?;
            let out = solve_fixed_point(&g, &eps, &solver.config())?;
            let mut text = format.profile(&out.profile);
            text.push_str(&format!("# status = {}\n", out.status));
            text.push_str(&format!("# eps = {}\n", format_rational(&eps)));
            text.push_str(&format!("# residual = {}\n", format_scientific(&out.residual, 6)));
            text.push_str(&format!("# iterations = {}\n", out.iterations));
            text.push_str(&format!("# start = {}\n", out.start));
            write_output(output.as_deref(), &text)?;
            Ok(status_code(out.status))
        }
        Command::Compile { game, output } => {
            let g = read_game(&game)?;
            write_output(output.as_deref(), &compile_f_eps(&g).to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            game,
            profile,
            eps,
            slack,
        } => {
            require_positive("eps", &eps)?;
            if slack.is_negative() {
                bail!("--slack must be non-negative");
            }
            let g = read_game(&game)?;
            let x = MixedProfile::parse(&read(&profile)?)
                .with_context(|| format!("invalid profile file {}", profile.display()))?;
            let (cert, _) = check_certificate(&g, &x, &eps, &slack)?;
            write_output(None, &format!("{cert}\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitFixp { game, delta, c, output } => {
            require_positive("delta", &delta)?;
            require_positive("c-constant", &c)?;
            let g = read_game(&game)?;
            write_output(output.as_deref(), &emit_fixp_instance(&g, &delta, &c)?.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitLogic {
            game,
            formula,
            delta,
            no_prune,
            output,
        } => {
            let g = read_game(&game)?;
            let prune = !no_prune;
            let f = match formula {
                FormulaKind::EpsPe => emit_eps_pe(&g, prune),
                FormulaKind::Pe => emit_pe(&g, prune),
                FormulaKind::PeBound => {
                    let delta = delta.context("--delta is required for the pe-bound formula")?;
                    require_positive("delta", &delta)?;
                    emit_pe_bound(&g, &delta, prune)?
                }
            };
            write_output(output.as_deref(), &smt2_script(&f))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound {
            game,
            delta,
            c,
            positional,
            max_bits,
        } => {
            require_positive("delta", &delta)?;
            require_positive("c-constant", &c)?;
            let g = read_game(&game)?;
            let report = BoundReport::for_game(&g, delta, c)?;
            let mut text = report.to_text();
            if positional {
                let eps = report.eps_star_exact(max_bits)?;
                text.push_str(&format!("eps_star = {}\n", format_rational(&eps)));
            }
            write_output(None, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            game,
            eps,
            resolution,
            budget,
            format,
        } => {
            let g = read_game(&game)?;
            let x = grid_oracle_with_budget(&g, &eps, resolution, budget)?;
            let r = tremble::solver::residual(&g, &x, &eps)?;
            let mut text = match format.decimal {
                Some(d) => x.to_text_with(|v| format_fixed(v, d)),
                None => x.to_text(),
            };
            text.push_str(&format!("# residual = {}\n", format_scientific(&r, 6)));
            write_output(None, &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
