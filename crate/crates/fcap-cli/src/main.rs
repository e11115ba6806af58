//! `fcap`: capacities, potentials and rigidity checks from the command line.

mod emit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fcap::analysis::{self, suite, AlphaOptions, TheoremReport};
use fcap::bodies::ConvexBody;
use fcap::norms::{DualNorm, NormSpec};
use fcap::pde::{self, OuterBc, SolveResult, SolverOptions};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "fcap",
    version,
    about = "Finsler p-capacity solver and theorem checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Norm: `euclidean`, `ellipsoid:a11,a12,...` (upper triangle) or `lq:Q:delta=D`.
    #[arg(long, default_value = "euclidean")]
    norm: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Nodes across the smallest truncation shape.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Truncation radii (absolute, increasing); default 4 and 6 times the body circumradius.
    #[arg(long, value_delimiter = ',')]
    rout: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = BcArg::Radial)]
    outer_bc: BcArg,
    /// Regularization schedule in units of 1/circumradius.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "FCAP_THREADS")]
    threads: Option<usize>,
    /// Output directory for the manifest, reports and fields.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write the solved field as CSV.
    #[arg(long)]
    export_field: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BcArg {
    Radial,
    Zero,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum TierArg {
    Smoke,
    Desk,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exterior capacity of a body.
    Capacity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
    },
    /// Potential of a body inside `B_H0(R)` with zero data on the outer shape.
    Annulus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long = "R")]
        big_r: f64,
    },
    /// Constancy of `H(Du)` on the outer boundary of an annulus solve.
    Overdetermined {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long = "R")]
        big_r: f64,
    },
    /// Brunn-Minkowski deficit of `(1 - lambda) K + lambda D`.
    Bm {
        #[command(flatten)]
        common: Common,
        /// Two bodies, K then D.
        #[arg(long, num_args = 1, required = true)]
        body: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Concavity exponent estimate.
    Alpha {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 20_000)]
        pairs: usize,
        #[arg(long)]
        beta_min: Option<f64>,
        #[arg(long)]
        beta_max: Option<f64>,
    },
    /// Homothety of two superlevel sets.
    Levels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 0.25)]
        t1: f64,
        #[arg(long, default_value_t = 0.5)]
        t2: f64,
    },
    /// Capacity of superlevel sets against the scaling law.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
        levels: Vec<f64>,
    },
    /// Far-field limit of `u H0^((N-p)/(p-1))`.
    Asymptotic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// The full check suite at a resolution tier.
    VerifyAll {
        #[arg(long, value_enum, default_value_t = TierArg::Smoke)]
        tier: TierArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "FCAP_THREADS")]
        threads: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Validated settings shared by the single-problem commands.
struct RunConfig {
    norm: NormSpec,
    dual: DualNorm,
    p: f64,
    q: f64,
    options: SolverOptions,
    echo: Value,
}

impl RunConfig {
    fn new(command: &str, c: &Common, bodies: &[String], extra: Value) -> Result<Self> {
        if c.grid < 16 {
            bail!("--grid must be at least 16, got {}", c.grid);
        }
        if !(c.p > 1.0 && c.p < c.dim as f64) {
            bail!(
                "--p must satisfy 1 < p < dim, got p = {} with dim = {}",
                c.p,
                c.dim
            );
        }
        if let Some(r) = &c.rout {
            if r.is_empty() || r.windows(2).any(|w| !(w[0] < w[1])) || r.iter().any(|v| !(*v > 0.0))
            {
                bail!("--rout must be positive and strictly increasing");
            }
        }
        let norm = NormSpec::parse(&c.norm, c.dim)?;
        let dual = DualNorm::new(norm.clone());
        let q = pde::radial_exponent(c.dim, c.p)?;
        let options = SolverOptions {
            resolution: c.grid,
            outer_radii: c.rout.clone(),
            outer_bc: match c.outer_bc {
                BcArg::Radial => OuterBc::RadialProfile,
                BcArg::Zero => OuterBc::Zero,
            },
            epsilon_schedule: c.epsilon.clone(),
            threads: c.threads,
            ..SolverOptions::default()
        };
        let echo = json!({
            "command": command,
            "norm": c.norm,
            "bodies": bodies,
            "p": c.p,
            "q": q,
            "dim": c.dim,
            "grid": c.grid,
            "rout": c.rout,
            "outer_bc": options.outer_bc,
            "epsilon": c.epsilon,
            "seed": c.seed,
            "threads": c.threads,
            "extra": extra,
        });
        Ok(Self {
            norm,
            dual,
            p: c.p,
            q,
            options,
            echo,
        })
    }

    fn body(&self, spec: &str) -> Result<ConvexBody> {
        Ok(ConvexBody::parse(spec, &self.dual)?)
    }

    fn exterior(&self, body: &ConvexBody) -> Result<SolveResult> {
        Ok(pde::solve_exterior(
            &self.norm,
            &self.dual,
            body,
            self.p,
            &self.options,
        )?)
    }
}

/// What a pipeline produced.
#[derive(Default)]
struct Outcome {
    reports: Vec<TheoremReport>,
    solves: Vec<Value>,
    field: Option<fcap::pde::ScalarField>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let start = Instant::now();
    let (out_dir, echo, q, outcome) = match &cli.command {
        Command::VerifyAll {
            tier,
            seed,
            threads,
            out,
        } => {
            let tier = match tier {
                TierArg::Smoke => suite::Tier::Smoke,
                TierArg::Desk => suite::Tier::Desk,
            };
            let reports = suite::run_suite(tier, *seed, *threads)?;
            let echo = json!({ "command": "verify-all", "tier": tier.name(), "seed": seed, "threads": threads });
            (
                out.clone(),
                echo,
                Value::Null,
                Outcome {
                    reports,
                    ..Outcome::default()
                },
            )
        }
        cmd => {
            let (name, common, bodies, extra) = describe(cmd);
            let cfg = RunConfig::new(name, common, &bodies, extra)?;
            let outcome = execute(cmd, &cfg)?;
            let export = common.export_field;
            let outcome = Outcome {
                field: if export { outcome.field } else { None },
                ..outcome
            };
            (common.out.clone(), cfg.echo, json!(cfg.q), outcome)
        }
    };
    let violated = outcome.reports.iter().any(TheoremReport::is_violated);
    let manifest = json!({
        "config": echo,
        "q": q,
        "versions": { "fcap": fcap::VERSION, "fcap-cli": env!("CARGO_PKG_VERSION") },
        "solves": outcome.solves,
        "checks": outcome.reports,
        "status": if violated { "violated" } else { "consistent" },
    });
    emit::write_outputs(
        &out_dir,
        &manifest,
        &outcome.reports,
        outcome.field.as_ref(),
        start.elapsed(),
    )?;
    println!(
        "{}",
        emit::render(
            &json!({ "status": manifest["status"], "checks": outcome.reports.iter().map(|r| json!({"check": r.check, "verdict": r.verdict})).collect::<Vec<_>>(), "solves": manifest["solves"] })
        )?
    );
    Ok(if violated {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn describe(cmd: &Command) -> (&'static str, &Common, Vec<String>, Value) {
    match cmd {
        Command::Capacity { common, body } => ("capacity", common, vec![body.clone()], Value::Null),
        Command::Annulus {
            common,
            body,
            big_r,
        } => ("annulus", common, vec![body.clone()], json!({ "R": big_r })),
        Command::Overdetermined {
            common,
            body,
            big_r,
        } => (
            "overdetermined",
            common,
            vec![body.clone()],
            json!({ "R": big_r }),
        ),
        Command::Bm {
            common,
            body,
            lambda,
        } => ("bm", common, body.clone(), json!({ "lambda": lambda })),
        Command::Alpha {
            common,
            body,
            pairs,
            beta_min,
            beta_max,
        } => (
            "alpha",
            common,
            vec![body.clone()],
            json!({ "pairs": pairs, "beta_min": beta_min, "beta_max": beta_max }),
        ),
        Command::Levels {
            common,
            body,
            t1,
            t2,
        } => (
            "levels",
            common,
            vec![body.clone()],
            json!({ "t1": t1, "t2": t2 }),
        ),
        Command::Scaling {
            common,
            body,
            levels,
        } => (
            "scaling",
            common,
            vec![body.clone()],
            json!({ "levels": levels }),
        ),
        Command::Asymptotic {
            common,
            body,
            radii,
        } => (
            "asymptotic",
            common,
            vec![body.clone()],
            json!({ "radii": radii }),
        ),
        Command::VerifyAll { .. } => unreachable!("handled separately"),
    }
}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let keep = |r: SolveResult, out: &mut Outcome| {
        out.solves.push(r.to_json());
        out.field = Some(r.field.clone());
        r
    };
    match cmd {
        Command::Capacity { body, .. } => {
            let r = keep(cfg.exterior(&cfg.body(body)?)?, &mut out);
            if let Some(rep) = analysis::check_radial(&r)? {
                out.reports.push(rep);
            }
        }
        Command::Annulus { body, big_r, .. } => {
            let body = cfg.body(body)?;
            keep(
                pde::solve_annulus(&cfg.norm, &cfg.dual, &body, cfg.p, *big_r, &cfg.options)?,
                &mut out,
            );
        }
        Command::Overdetermined { body, big_r, .. } => {
            let body = cfg.body(body)?;
            let r = keep(
                pde::solve_annulus(&cfg.norm, &cfg.dual, &body, cfg.p, *big_r, &cfg.options)?,
                &mut out,
            );
            out.reports
                .push(analysis::check_overdetermined(&r, *big_r)?);
        }
        Command::Bm { body, lambda, .. } => {
            if body.len() != 2 {
                bail!("bm needs exactly two --body arguments, got {}", body.len());
            }
            let rk = keep(cfg.exterior(&cfg.body(&body[0])?)?, &mut out);
            let rd = keep(cfg.exterior(&cfg.body(&body[1])?)?, &mut out);
            out.reports
                .push(analysis::check_bm_with(&rk, &rd, *lambda, &cfg.options)?);
        }
        Command::Alpha {
            body,
            pairs,
            beta_min,
            beta_max,
            ..
        } => {
            let r = keep(cfg.exterior(&cfg.body(body)?)?, &mut out);
            let window = match (beta_min, beta_max) {
                (Some(a), Some(b)) => Some((*a, *b)),
                (None, None) => None,
                _ => bail!("--beta-min and --beta-max must be given together"),
            };
            let opts = AlphaOptions {
                beta_range: window,
                sample_pairs: *pairs,
                seed: cfg.echo["seed"].as_u64().unwrap_or(0),
                ..AlphaOptions::default()
            };
            out.reports.push(analysis::check_alpha(&r, &opts)?);
        }
        Command::Levels { body, t1, t2, .. } => {
            let r = keep(cfg.exterior(&cfg.body(body)?)?, &mut out);
            out.reports
                .push(analysis::check_homothetic_levels(&r, *t1, *t2)?);
        }
        Command::Scaling { body, levels, .. } => {
            let r = keep(cfg.exterior(&cfg.body(body)?)?, &mut out);
            out.reports
                .push(analysis::check_scaling(&r, levels, &cfg.options)?);
        }
        Command::Asymptotic { body, radii, .. } => {
            let r = keep(cfg.exterior(&cfg.body(body)?)?, &mut out);
            let radii = radii
                .clone()
                .unwrap_or_else(|| analysis::default_radii(&r, 4));
            out.reports.push(analysis::asymptotic_constant(&r, &radii)?);
        }
        Command::VerifyAll { .. } => unreachable!("handled separately"),
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).context("fcap failed") {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
