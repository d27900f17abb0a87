use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::process::ExitCode;

use thiserror::Error;

use misuse_core::bench::dataset::{Dataset, DatasetError, Origin, ProjectVersion};
use misuse_core::bench::experiment::{ExperimentKind, ExperimentResult};
use misuse_core::config::{ConfigError, PartialConfig, RunConfig};
use misuse_core::detect::RunStatus;
use misuse_core::extract::write_facts_file;
use misuse_core::par::{configure_threads, Execution};
use misuse_core::pipeline::{Pipeline, PipelineError};
use misuse_core::review::summary_csv;
use misuse_review::{AppState, ServeError, TokenError, TokenTable};

use crate::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Tokens(#[from] TokenError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Dataset(d) => CliError::Dataset(d),
            e => CliError::Pipeline(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Pipeline(_) | CliError::Serve(_) => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    }
}

fn status_code(all_ok: bool) -> ExitCode {
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Left-aligned columns separated by two spaces.
fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        println!("{}", s.join("  ").trim_end());
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.global.config {
        Some(p) => PartialConfig::load(p)?,
        None => PartialConfig::default(),
    };
    Ok(file.overlay(cli.global.partial()).resolve()?)
}

fn find_version<'a>(ds: &'a Dataset, wanted: &str) -> Result<&'a ProjectVersion, CliError> {
    let matches: Vec<&ProjectVersion> = ds.versions.iter().filter(|v| v.key() == wanted || v.version == wanted).collect();
    match matches.as_slice() {
        [v] => Ok(v),
        [] => Err(CliError::Usage(format!(
            "unknown version `{wanted}`; known: {}",
            ds.versions.iter().map(|v| v.key()).collect::<Vec<_>>().join(", ")
        ))),
        _ => Err(CliError::Usage(format!("version `{wanted}` is ambiguous; use project/version"))),
    }
}

fn selected<'a>(ds: &'a Dataset, wanted: Option<&str>) -> Result<Vec<&'a ProjectVersion>, CliError> {
    match wanted {
        Some(w) => Ok(vec![find_version(ds, w)?]),
        None => Ok(ds.versions.iter().collect()),
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Command::ValidateDataset = cli.command {
        return validate_dataset(&cli);
    }
    let config = load_config(&cli)?;
    configure_threads(config.jobs);
    let exec = if cli.global.sequential { Execution::Sequential } else { Execution::Parallel };
    if let Command::Serve { port, host, store, tokens } = &cli.command {
        let tokens = TokenTable::load(tokens)?;
        let state = AppState::open(&config.workspace, store.as_deref(), tokens)?;
        misuse_review::serve_blocking(SocketAddr::new(*host, *port), state)?;
        return Ok(ExitCode::SUCCESS);
    }
    let p = Pipeline::new(config, exec)?;
    match &cli.command {
        Command::Checkout { version } => {
            let mut rows = Vec::new();
            for v in selected(&p.dataset, version.as_deref())? {
                let (dir, info) = p.checkout(v)?;
                let origin = match &info.origin {
                    Origin::Local(_) => "local",
                    Origin::Git { .. } => "git",
                };
                rows.push(vec![v.key(), origin.into(), info.tree_hash[..12].to_owned(), dir.display().to_string()]);
            }
            print_table(&["version", "origin", "tree", "path"], &rows);
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract { version, facts_out } => {
            let versions = selected(&p.dataset, version.as_deref())?;
            if facts_out.is_some() && versions.len() != 1 {
                return Err(CliError::Usage("--facts-out needs a single --version".into()));
            }
            let mut rows = Vec::new();
            for v in versions {
                let prep = p.prepare(v)?;
                if let Some(out) = facts_out {
                    write_facts_file(&prep.models.models, out).map_err(|e| CliError::Pipeline(e.into()))?;
                }
                rows.push(vec![
                    v.key(),
                    prep.models.models.len().to_string(),
                    prep.warnings.len().to_string(),
                    if prep.cached { "yes" } else { "no" }.into(),
                ]);
            }
            print_table(&["version", "methods", "warnings", "cached"], &rows);
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect { version, facts_in } => {
            let v = find_version(&p.dataset, version)?;
            let models = match facts_in {
                Some(path) => p.load_facts(v, path)?,
                None => p.prepare(v)?.models,
            };
            let statuses = p.detect(&models)?;
            let mut rows = Vec::new();
            for (kind, status) in &statuses {
                let detail = match status {
                    RunStatus::Completed { findings } => findings.findings.len().to_string(),
                    RunStatus::Timeout { elapsed } => format!("after {:.3}s", elapsed.as_secs_f64()),
                    RunStatus::Error { message } => message.clone(),
                };
                rows.push(vec![kind.to_string(), status.label().into(), detail]);
            }
            print_table(&["detector", "status", "findings"], &rows);
            Ok(status_code(statuses.iter().all(|(_, s)| matches!(s, RunStatus::Completed { .. }))))
        }
        Command::Exp { experiment, misuse } => {
            let exp: ExperimentKind = (*experiment).into();
            let outcome = match (exp, misuse) {
                (ExperimentKind::Rub, m) => p.run_rub(m.as_deref())?,
                (_, Some(_)) => return Err(CliError::Usage("--misuse only applies to experiment rub".into())),
                (ExperimentKind::P, None) => p.run_p()?,
                (ExperimentKind::R, None) => p.run_r()?,
            };
            if outcome.cached {
                log::info!("experiment {}: inputs unchanged, reusing results", exp.as_str());
            }
            print_experiment(&outcome.result);
            Ok(status_code(outcome.result.failed_runs() == 0))
        }
        Command::Stats { experiment, primary } => {
            let exp: ExperimentKind = (*experiment).into();
            let stats = p.stats(exp, primary)?;
            let csv = summary_csv(exp, &stats);
            let mut lines = csv.lines().map(|l| l.split(',').map(str::to_owned).collect::<Vec<_>>());
            let header = lines.next().unwrap_or_default();
            let rows: Vec<Vec<String>> = lines.collect();
            print_table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { .. } | Command::ValidateDataset => unreachable!("handled above"),
    }
}

fn print_experiment(result: &ExperimentResult) {
    let detectors: BTreeSet<&str> = result.runs.iter().map(|r| r.detector_id.as_str()).collect();
    let rows: Vec<Vec<String>> = detectors
        .into_iter()
        .map(|d| {
            let runs: Vec<_> = result.runs.iter().filter(|r| r.detector_id == d).collect();
            let hits: BTreeSet<&str> =
                result.hits.iter().filter(|h| h.detector_id == d).map(|h| h.misuse_id.as_str()).collect();
            vec![
                d.to_owned(),
                runs.len().to_string(),
                runs.iter().filter(|r| !r.succeeded()).count().to_string(),
                result.findings.iter().filter(|f| f.detector_id == d).count().to_string(),
                hits.len().to_string(),
            ]
        })
        .collect();
    print_table(&["detector", "runs", "failed", "findings", "potential_hits"], &rows);
    for r in result.runs.iter().filter(|r| !r.succeeded()) {
        let cell = r.misuse.clone().unwrap_or_else(|| format!("{}/{}", r.project, r.version));
        eprintln!("{} {} on {}: {}", r.detector_id, r.status, cell, r.message.as_deref().unwrap_or(""));
    }
}

fn validate_dataset(cli: &Cli) -> Result<ExitCode, CliError> {
    let file = match &cli.global.config {
        Some(p) => PartialConfig::load(p)?,
        None => PartialConfig::default(),
    };
    let root = file
        .overlay(cli.global.partial())
        .dataset
        .ok_or_else(|| CliError::Usage("no dataset given (--dataset)".into()))?;
    let ds = Dataset::load(&root)?;
    let cells: BTreeSet<_> = ds.misuses.iter().flat_map(|m| m.muc_labels.iter().copied()).collect();
    let crafted = ds.misuses.iter().filter(|m| m.crafted_usage.is_some()).count();
    print_table(
        &["versions", "misuses", "crafted", "muc_cells"],
        &[vec![
            ds.versions.len().to_string(),
            ds.misuses.len().to_string(),
            crafted.to_string(),
            cells.len().to_string(),
        ]],
    );
    Ok(ExitCode::SUCCESS)
}
