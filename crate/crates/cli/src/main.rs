//! `strainchain`: generate instances, solve, evaluate designs, run policy
//! studies and verify finished runs.
//!
//! Exit status: 0 on success, 1 on bad input (including unknown flags),
//! 2 when the solver fails or a verification finds violations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use strainchain::policy::{run_study, StudySpec, StudySummary};
use strainchain::recourse::{check_structural_theorems, solve_recourse};
use strainchain::report::{
    country_rows, flow_rows, income_rows, read_report, write_csv, write_report, write_timings,
    RunArtifact, Timings,
};
use strainchain::saa::{
    evaluate_design, evaluate_seed, optimize_seed, run_saa, Evaluation, SaaConfig,
};
use strainchain::scenario::{read_scenarios_csv, write_scenarios_csv};
use strainchain::{
    generate_synthetic_instance, load_instance, sample_batch, write_instance, Design, Error,
    Instance, Result, RiskProfile, SyntheticSpec,
};

#[derive(Parser, Debug)]
#[command(
    name = "strainchain",
    version,
    about = "Supply chain design under export-ban risk"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "STRAINCHAIN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic instance.
    Gen {
        #[arg(long, default_value_t = 8)]
        countries: usize,
        #[arg(long, default_value_t = 3)]
        suppliers: usize,
        #[arg(long, default_value_t = 3)]
        plants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Risk::Low)]
        risk: Risk,
        /// Output instance file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run SAA on an instance.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write every replication's optimization scenarios.
        #[arg(long)]
        dump_scenarios: bool,
    },
    /// Evaluate a fixed design on the evaluation sample.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Design as a JSON map `{"plant": 0|1}` or a path to such a file.
        #[arg(long)]
        design: String,
        #[arg(long)]
        dump_scenarios: bool,
    },
    /// Run the policy study named in the config file.
    Study {
        #[command(flatten)]
        common: Common,
    },
    /// Re-solve a finished run's evaluation scenarios and check the
    /// structural optimality conditions.
    Verify {
        /// Run directory written by `solve`.
        run: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Risk {
    Low,
    High,
}

/// Config file: SAA settings plus an optional study.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    saa: SaaConfig,
    study: Option<StudySpec>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::NonFinite(e.to_string()))? + "\n";
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn load(common: &Common) -> Result<(Instance, RunConfig)> {
    let instance = load_instance(&common.instance)?;
    let mut config: RunConfig = match &common.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.saa.base_seed = seed;
    }
    config.saa.validate()?;
    Ok((instance, config))
}

fn parse_design(instance: &Instance, arg: &str) -> Result<Design> {
    let values: BTreeMap<String, f64> = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Error::Parse {
            what: "--design".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        read_json(Path::new(arg))?
    };
    Design::from_partial(instance, &values)
}

fn print_summary(label: &str, a: &RunArtifact) {
    let r = &a.report;
    println!(
        "{label}: design {} | eval objective {:.6} (se {:.6}) | L {:.6} U {:.6} gap {:.6} | global shortage {:.4}",
        r.incumbent.label(),
        r.eval_objective,
        r.eval_std_error,
        r.lower_bound,
        r.upper_bound,
        r.gap,
        a.global_shortage_fraction
    );
    if let Some(w) = &r.warning {
        println!("warning: {w}");
    }
}

fn solve(common: &Common, dump: bool, threads: usize) -> Result<()> {
    let start = Instant::now();
    let (instance, config) = load(common)?;
    let report = run_saa(&instance, &config.saa)?;
    let artifact = RunArtifact::new(&instance, &config.saa, report);
    write_run(&common.out, &instance, &artifact)?;
    if dump {
        let pass = artifact.report.passes - 1;
        let saa = &config.saa;
        for m in 0..saa.replications {
            let scen = sample_batch(
                &instance,
                optimize_seed(saa.base_seed, pass, m),
                saa.scenarios,
                &saa.optimize,
            );
            write_scenarios_csv(
                &instance,
                &scen,
                &common.out.join(format!("optimize_scenarios_{}.csv", m + 1)),
            )?;
        }
        let eval = eval_sample(&instance, saa, pass);
        write_scenarios_csv(&instance, &eval, &common.out.join("scenarios.csv"))?;
    }
    write_timings(
        &Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            threads,
        },
        &common.out,
    )?;
    print_summary("solve", &artifact);
    Ok(())
}

fn write_run(dir: &Path, instance: &Instance, artifact: &RunArtifact) -> Result<()> {
    write_report(artifact, dir)?;
    write_instance(instance, dir.join("instance.json"))
}

fn eval_sample(instance: &Instance, saa: &SaaConfig, pass: usize) -> Vec<strainchain::Scenario> {
    sample_batch(
        instance,
        evaluate_seed(saa.base_seed, pass),
        saa.eval_scenarios,
        &saa.evaluate,
    )
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    design: &'a Design,
    evaluation: &'a Evaluation,
}

fn evaluate(common: &Common, design: &str, dump: bool) -> Result<()> {
    let (instance, config) = load(common)?;
    let design = parse_design(&instance, design)?;
    let scenarios = eval_sample(&instance, &config.saa, 0);
    let eval = evaluate_design(&instance, &design, &scenarios)?;
    create_dir(&common.out)?;
    write_json(
        &common.out.join("evaluation.json"),
        &EvaluateOutput {
            design: &design,
            evaluation: &eval,
        },
    )?;
    let rows = country_rows(&instance, &design, &eval);
    write_csv(&common.out.join("shortage_by_country.csv"), &rows)?;
    write_csv(
        &common.out.join("shortage_by_income.csv"),
        &income_rows(&rows),
    )?;
    write_csv(&common.out.join("flows.csv"), &flow_rows(&instance, &eval))?;
    if dump {
        write_scenarios_csv(&instance, &scenarios, &common.out.join("scenarios.csv"))?;
    }
    println!(
        "evaluate: design {} | objective {:.6} (se {:.6}) over {} scenarios",
        design.label(),
        eval.mean_objective,
        eval.std_error,
        eval.num_scenarios
    );
    Ok(())
}

fn study(common: &Common) -> Result<()> {
    let (instance, config) = load(common)?;
    let spec = config
        .study
        .as_ref()
        .ok_or_else(|| Error::Config("the config file has no `study` section".into()))?;
    let outcome = run_study(&instance, &config.saa, spec)?;
    for arm in &outcome.arms {
        let artifact = RunArtifact::new(&arm.instance, &arm.config, arm.report.clone());
        write_run(&common.out.join(&arm.name), &arm.instance, &artifact)?;
        print_summary(&arm.name, &artifact);
    }
    let summary: StudySummary = outcome.summary();
    write_json(&common.out.join("study.json"), &summary)
}

#[derive(Serialize)]
struct VerifyOutput {
    scenarios: usize,
    violations: Vec<String>,
    mean_objective: f64,
    reported_objective: f64,
}

fn verify(dir: &Path) -> Result<bool> {
    let artifact = read_report(dir)?;
    let instance = load_instance(dir.join("instance.json"))?;
    let stored = dir.join("scenarios.csv");
    let scenarios = if stored.exists() {
        read_scenarios_csv(&instance, &stored)?
    } else {
        eval_sample(&instance, &artifact.config, artifact.report.passes - 1)
    };
    let design = &artifact.report.incumbent;
    let mut violations = Vec::new();
    let mut total = 0.0;
    for (w, s) in scenarios.iter().enumerate() {
        let sol = solve_recourse(&instance, design, s)?;
        total += design.fixed_cost(&instance) + sol.objective;
        for v in check_structural_theorems(&instance, design, s, &sol) {
            violations.push(format!("scenario {}: {v}", w + 1));
        }
    }
    let mean = total / scenarios.len() as f64;
    let reported = artifact.report.eval_objective;
    if (mean - reported).abs() > 1e-9 * reported.abs().max(1.0) {
        violations.push(format!(
            "re-evaluated objective {mean} differs from reported {reported}"
        ));
    }
    write_json(
        &dir.join("verify.json"),
        &VerifyOutput {
            scenarios: scenarios.len(),
            violations: violations.clone(),
            mean_objective: mean,
            reported_objective: reported,
        },
    )?;
    println!(
        "verify: {} scenarios, {} violations",
        scenarios.len(),
        violations.len()
    );
    for v in &violations {
        println!("  {v}");
    }
    Ok(violations.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Gen {
            countries,
            suppliers,
            plants,
            seed,
            risk,
            out,
        } => {
            let spec = SyntheticSpec {
                suppliers,
                plants,
                countries,
                seed,
                risk: match risk {
                    Risk::Low => RiskProfile::Low,
                    Risk::High => RiskProfile::High,
                },
            };
            write_instance(&generate_synthetic_instance(&spec)?, &out)?;
            println!("gen: wrote {}", out.display());
        }
        Command::Solve {
            common,
            dump_scenarios,
        } => solve(&common, dump_scenarios, threads)?,
        Command::Evaluate {
            common,
            design,
            dump_scenarios,
        } => evaluate(&common, &design, dump_scenarios)?,
        Command::Study { common } => study(&common)?,
        Command::Verify { run } => return verify(&run),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
