mod campaign;
mod ops;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use campaign::{
    load_campaign, prepare, run_job, write_json, write_series, CliError, JobEntry, JobReport, OutputLayout, Summary,
};

const OUT_ENV: &str = "DUALITY_LAB_OUT";

#[derive(Parser)]
#[command(name = "duality-lab", version, about = "Run lattice duality experiment campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign file.
    Run {
        config: PathBuf,
        /// Number of jobs to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides DUALITY_LAB_OUT and the campaign's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validate and budget-check without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// List the canned campaigns.
    ListSuites,
    /// Print the campaign schema with every operation's defaults.
    Schema,
    /// Print a canned campaign as JSON.
    Suite { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, seed, out, dry_run } => run(&config, jobs, seed, out, dry_run),
        Command::ListSuites => {
            for (name, about) in suites::SUITES {
                println!("{name:<18} {about}");
            }
            Ok(0)
        }
        Command::Schema => print_json(&schema()),
        Command::Suite { name } => match suites::suite(&name) {
            Some(c) => print_json(&c),
            None => Err(CliError::Schema(format!("unknown suite {name}"))),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<u8, CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(0)
}

fn run(config: &Path, threads: usize, seed: Option<u64>, out: Option<PathBuf>, dry_run: bool) -> Result<u8, CliError> {
    let campaign = load_campaign(config)?;
    let jobs = prepare(&campaign)?;
    if dry_run {
        println!("{}: {} jobs validated", campaign.name, jobs.len());
        return Ok(0);
    }
    let root = out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| campaign.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("duality-out"));
    let layout = OutputLayout::create(root)?;
    let base_seed = seed.unwrap_or(campaign.seed);

    let execute = |job: &campaign::PreparedJob| -> Result<JobReport, CliError> {
        let report = run_job(job, base_seed.wrapping_add(job.index as u64));
        let stem = job.file_stem();
        write_json(&layout.report_path(&stem), &report)?;
        if !report.series.columns.is_empty() {
            write_series(&layout.series_path(&stem), &report.series)?;
        }
        let status = if report.passed { "PASS" } else { "FAIL" };
        match &report.error {
            Some(e) => println!("[{status}] {}: {e}", job.name),
            None => println!("[{status}] {}", job.name),
        }
        Ok(report)
    };
    let reports: Vec<Result<JobReport, CliError>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(execute).collect())
    } else {
        jobs.iter().map(execute).collect()
    };

    let mut summary = Summary {
        campaign: campaign.name.clone(),
        seed: base_seed,
        total: jobs.len(),
        passed: 0,
        failed: 0,
        failed_jobs: vec![],
        jobs: vec![],
    };
    let mut budget_refused = false;
    for (job, report) in jobs.iter().zip(reports) {
        let report = report?;
        budget_refused |= report.budget_refused;
        if report.passed {
            summary.passed += 1;
        } else {
            summary.failed += 1;
            summary.failed_jobs.push(job.name.clone());
        }
        summary.jobs.push(JobEntry {
            name: job.name.clone(),
            report: format!("jobs/{}.json", job.file_stem()),
            passed: report.passed,
        });
    }
    write_json(&layout.summary_path(), &summary)?;
    println!("{}: {} of {} jobs passed", summary.campaign, summary.passed, summary.total);
    Ok(if budget_refused {
        3
    } else if summary.failed > 0 {
        1
    } else {
        0
    })
}

fn type_of(v: &Value) -> Value {
    match v {
        Value::Bool(_) => json!({ "type": "boolean" }),
        Value::Number(n) if n.is_u64() => json!({ "type": "integer", "minimum": 0 }),
        Value::Number(_) => json!({ "type": "number" }),
        Value::String(_) => json!({ "type": "string" }),
        Value::Array(items) => json!({ "type": "array", "items": items.first().map(type_of).unwrap_or(json!({})) }),
        Value::Object(_) => object_schema(v),
        Value::Null => json!({}),
    }
}

fn object_schema(defaults: &Value) -> Value {
    let mut props = Map::new();
    if let Value::Object(map) = defaults {
        for (k, v) in map {
            let mut t = type_of(v);
            t["default"] = v.clone();
            props.insert(k.clone(), t);
        }
    }
    json!({ "type": "object", "additionalProperties": false, "properties": props })
}

fn schema() -> Value {
    let variants: Vec<Value> = ops::registry()
        .iter()
        .map(|op| {
            let (params, tols, schedule) = op.defaults();
            json!({
                "description": op.summary,
                "type": "object",
                "additionalProperties": false,
                "required": ["module", "operation"],
                "properties": {
                    "name": { "type": "string" },
                    "module": { "const": op.module },
                    "operation": { "const": op.name },
                    "parameters": object_schema(&params),
                    "tolerances": object_schema(&tols),
                    "schedule": { "type": "array", "items": { "type": "number" }, "default": schedule },
                }
            })
        })
        .collect();
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "duality-lab campaign",
        "type": "object",
        "additionalProperties": false,
        "required": ["name"],
        "properties": {
            "name": { "type": "string", "minLength": 1 },
            "seed": { "type": "integer", "minimum": 0, "default": 0 },
            "output_dir": { "type": "string" },
            "jobs": { "type": "array", "items": { "oneOf": variants } },
        }
    })
}
