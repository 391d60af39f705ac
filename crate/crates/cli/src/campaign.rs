use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ops::{self, Task};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("resource budget refused: {0}")]
    Budget(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub jobs: Vec<JobConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub module: String,
    pub operation: String,
    #[serde(default = "empty_object")]
    pub parameters: Value,
    #[serde(default = "empty_object")]
    pub tolerances: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl JobConfig {
    pub fn new(module: &str, operation: &str) -> Self {
        Self {
            name: None,
            module: module.into(),
            operation: operation.into(),
            parameters: empty_object(),
            tolerances: empty_object(),
            schedule: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_parameters(mut self, parameters: Value) -> Self {
        self.parameters = parameters;
        self
    }

    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}.{}", self.module, self.operation))
    }
}

/// A validated job ready to run.
pub struct PreparedJob {
    pub index: usize,
    pub name: String,
    pub config: JobConfig,
    pub task: Box<dyn Task>,
}

impl PreparedJob {
    pub fn file_stem(&self) -> String {
        let slug: String = self
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
            .collect();
        format!("{:02}-{}", self.index, slug)
    }
}

pub fn parse_campaign(text: &str) -> Result<Campaign, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
}

pub fn load_campaign(path: &Path) -> Result<Campaign, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    parse_campaign(&text)
}

/// Schema validation of every job followed by the budget check; nothing runs unless
/// both succeed for the whole campaign.
pub fn prepare(campaign: &Campaign) -> Result<Vec<PreparedJob>, CliError> {
    if campaign.name.trim().is_empty() {
        return Err(CliError::Schema("campaign name is empty".into()));
    }
    let mut jobs = Vec::with_capacity(campaign.jobs.len());
    for (index, config) in campaign.jobs.iter().enumerate() {
        let name = config.display_name();
        let task = ops::prepare(config).map_err(|e| CliError::Schema(format!("job {index} ({name}): {e}")))?;
        jobs.push(PreparedJob {
            index,
            name,
            config: config.clone(),
            task,
        });
    }
    for job in &jobs {
        job.task
            .cost()
            .check()
            .map_err(|e| CliError::Budget(format!("job {} ({}): {e}", job.index, job.name)))?;
    }
    Ok(jobs)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: "<", limit, passed: value < limit }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: ">", limit, passed: value > limit }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let passed = (lo..=hi).contains(&value);
        let limit = if value < lo { lo } else { hi };
        Self { name: name.into(), value, relation: "in band", limit, passed }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: "==",
            limit: 1.0,
            passed: ok,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct JobOutcome {
    pub checks: Vec<Check>,
    pub data: Value,
    pub series: Series,
}

#[derive(Serialize)]
pub struct JobReport {
    pub name: String,
    pub module: String,
    pub operation: String,
    pub seed: u64,
    pub passed: bool,
    pub parameters: Value,
    pub tolerances: Value,
    pub schedule: Vec<f64>,
    pub checks: Vec<Check>,
    pub data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub budget_refused: bool,
    #[serde(skip)]
    pub series: Series,
}

#[derive(Serialize)]
pub struct JobEntry {
    pub name: String,
    pub report: String,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct Summary {
    pub campaign: String,
    pub seed: u64,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub failed_jobs: Vec<String>,
    pub jobs: Vec<JobEntry>,
}

pub fn run_job(job: &PreparedJob, seed: u64) -> JobReport {
    let (parameters, tolerances, schedule) = job.task.effective();
    let mut report = JobReport {
        name: job.name.clone(),
        module: job.config.module.clone(),
        operation: job.config.operation.clone(),
        seed,
        passed: false,
        parameters,
        tolerances,
        schedule,
        checks: vec![],
        data: Value::Null,
        error: None,
        budget_refused: false,
        series: Series::default(),
    };
    match job.task.run(seed) {
        Ok(outcome) => {
            report.passed = !outcome.checks.is_empty() && outcome.checks.iter().all(|c| c.passed);
            report.checks = outcome.checks;
            report.data = outcome.data;
            report.series = outcome.series;
        }
        Err(e) => {
            report.budget_refused = matches!(e, duality_core::Error::Budget { .. });
            report.error = Some(e.to_string());
        }
    }
    report
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_series(path: &Path, series: &Series) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&series.columns).map_err(io)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        for dir in [root.join("jobs"), root.join("series")] {
            fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
        Ok(Self { root })
    }

    pub fn report_path(&self, stem: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{stem}.json"))
    }

    pub fn series_path(&self, stem: &str) -> PathBuf {
        self.root.join("series").join(format!("{stem}.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.root.join("summary.json")
    }
}
