use std::fs;
use std::path::{Path, PathBuf};

use bifb::data::{load_dataset, write_dataset, Dataset};
use bifb::eval::{
    compare_reports, grid_search, outcomes_from_csv, outcomes_to_csv, refine_bandwidths,
    EvalReport, PreparedDataset, TrialOutcome,
};

use crate::config::ExperimentConfig;
use crate::{Cli, CliError, Command};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate => cmd_simulate(&single_config(cli)?, cli.out.as_deref()),
        Command::Validate => cmd_validate(&single_config(cli)?),
        Command::Run => cmd_run(&single_config(cli)?, cli.out.as_deref()).map(|_| ()),
        Command::Gridsearch => cmd_gridsearch(&single_config(cli)?, cli.out.as_deref()),
        Command::Compare => {
            if cli.config.len() < 2 {
                return Err(CliError::Config(
                    "compare needs at least two --config files".into(),
                ));
            }
            let configs = cli
                .config
                .iter()
                .map(|p| ExperimentConfig::load(Some(p), &cli.set))
                .collect::<Result<Vec<_>, _>>()?;
            cmd_compare(&configs, cli.out.as_deref())
        }
        Command::Report { runs } => cmd_report(runs, cli.out.as_deref()),
    }
}

fn single_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    if cli.config.len() > 1 {
        return Err(CliError::Config(
            "this command takes a single --config".into(),
        ));
    }
    ExperimentConfig::load(cli.config.first().map(PathBuf::as_path), &cli.set)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), CliError> {
    let sim = cfg.simulate.clone().unwrap_or_default();
    let dir = cfg.output_dir(out)?;
    let ds = sim.generate()?;
    ensure_dir(&dir)?;
    write_dataset(&dir, &ds)?;
    println!(
        "wrote {} trials ({} subjects, {} stimuli) to {}",
        ds.recordings.len(),
        sim.subjects,
        sim.stimulus_frequencies_hz.len(),
        dir.display()
    );
    Ok(())
}

fn load(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    Ok(load_dataset(cfg.dataset_path()?)?)
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ds = load(cfg)?;
    cfg.pipeline.validate_for(&ds)?;
    if let Some(axes) = &cfg.grid {
        let spec = axes.to_spec(&cfg.pipeline);
        spec.validate()?;
        for p in spec.points() {
            p.apply(&cfg.pipeline).validate_for(&ds)?;
        }
    }
    println!(
        "ok: {} trials, {} subjects, {} classes, method {}",
        ds.recordings.len(),
        ds.subjects().len(),
        ds.n_classes(),
        cfg.pipeline.method
    );
    Ok(())
}

/// Leave-one-out outcomes and their report for one configuration.
fn evaluate(
    cfg: &ExperimentConfig,
    ds: &Dataset,
) -> Result<(PreparedDataset, Vec<TrialOutcome>, EvalReport), CliError> {
    cfg.pipeline.validate_for(ds)?;
    let prepared = PreparedDataset::new(ds, &cfg.pipeline.preprocess)?;
    let outcomes = prepared.loo_cv(&cfg.pipeline)?;
    let report = EvalReport::from_outcomes(&outcomes, ds.n_classes())?
        .with_hyperparameters(cfg.pipeline.hyperparameters());
    if report.pooled.decided == 0 {
        log::warn!(
            "{}: no trial reached a decision; MRT and ITR unavailable",
            report.method
        );
    }
    Ok((prepared, outcomes, report))
}

/// Writes `report.txt`, `report.csv`, `report.json`, `outcomes.csv`,
/// `config.json` and, for trainable methods, `models/<subject>.json`.
pub fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<EvalReport, CliError> {
    let dir = cfg.output_dir(out)?;
    let ds = load(cfg)?;
    let (prepared, outcomes, report) = evaluate(cfg, &ds)?;
    ensure_dir(&dir)?;
    let text = report.to_text();
    write(&dir.join("report.txt"), &text)?;
    write(&dir.join("report.csv"), &report.to_csv())?;
    write(&dir.join("report.json"), &to_json(&report))?;
    write(
        &dir.join("outcomes.csv"),
        &outcomes_to_csv(&outcomes, ds.stimuli()),
    )?;
    write(&dir.join("config.json"), &to_json(&cfg.to_value()))?;
    let models = prepared.train_subject_models(&cfg.pipeline)?;
    if !models.is_empty() {
        let mdir = dir.join("models");
        ensure_dir(&mdir)?;
        for (subject, model) in &models {
            let mut json = model.to_json()?;
            json.push('\n');
            write(&mdir.join(format!("{subject}.json")), &json)?;
        }
    }
    print!("{text}");
    Ok(report)
}

pub fn cmd_gridsearch(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), CliError> {
    let dir = cfg.output_dir(out)?;
    let ds = load(cfg)?;
    cfg.pipeline.validate_for(&ds)?;
    let axes = cfg.grid.clone().unwrap_or_default();
    let spec = axes.to_spec(&cfg.pipeline);
    spec.validate()?;
    eprintln!("grid search over {} points", spec.points().len());
    let result = grid_search(&ds, &cfg.pipeline, &spec)?;
    ensure_dir(&dir)?;
    write(&dir.join("grid.csv"), &result.to_csv())?;
    let best_row = result.best_row();
    let mut best = cfg.clone();
    best.pipeline = best_row.point.apply(&cfg.pipeline);
    best.grid = None;
    write(&dir.join("best_config.json"), &to_json(&best.to_value()))?;
    let p = &best_row.point;
    println!(
        "best: gamma {} beta {} segment {} s overlap {} lambda {} learning_rate {} -> accuracy {:.4}, ITR {}",
        p.gamma,
        p.beta,
        p.segment_length_s,
        p.overlap,
        p.lambda,
        p.learning_rate,
        best_row.accuracy,
        best_row
            .itr_bits_per_min
            .map_or_else(|| "n/a".into(), |v| format!("{v:.3} bits/min"))
    );
    if let Some(mults) = &axes.refine_bandwidths {
        let (refined, itr) = refine_bandwidths(&ds, &best.pipeline, mults)?;
        let mut r = best.clone();
        r.pipeline = refined;
        write(&dir.join("refined_config.json"), &to_json(&r.to_value()))?;
        println!(
            "refined bandwidths {:?} -> ITR {}",
            r.pipeline.bifb.bandwidths.as_deref().unwrap_or_default(),
            itr.map_or_else(|| "n/a".into(), |v| format!("{v:.3} bits/min"))
        );
    }
    Ok(())
}

/// Unique labels: the method name, suffixed on repeats.
fn labels(methods: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in methods {
        let mut label = m.clone();
        let mut n = 2;
        while out.contains(&label) {
            label = format!("{m}-{n}");
            n += 1;
        }
        out.push(label);
    }
    out
}

fn write_comparison(dir: Option<&Path>, runs: &[(String, EvalReport)]) -> Result<(), CliError> {
    let cmp = compare_reports(runs);
    let text = cmp.to_text();
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        write(&dir.join("compare.txt"), &text)?;
        write(&dir.join("compare.csv"), &cmp.to_csv())?;
        write(&dir.join("ttests.csv"), &cmp.tests_csv())?;
    }
    print!("{text}");
    Ok(())
}

pub fn cmd_compare(configs: &[ExperimentConfig], out: Option<&Path>) -> Result<(), CliError> {
    let dir = configs[0].output_dir(out)?;
    let ds = load(&configs[0])?;
    for c in &configs[1..] {
        let path = c.dataset_path()?;
        if path != configs[0].dataset_path()? && load_dataset(path)? != ds {
            return Err(bifb::Error::DatasetMismatch(format!(
                "{} differs from {}",
                path.display(),
                configs[0].dataset_path()?.display()
            ))
            .into());
        }
    }
    let methods: Vec<String> = configs
        .iter()
        .map(|c| c.pipeline.method.to_string())
        .collect();
    let labels = labels(&methods);
    let mut runs = Vec::new();
    ensure_dir(&dir)?;
    for (label, cfg) in labels.iter().zip(configs) {
        let (_, outcomes, report) = evaluate(cfg, &ds)?;
        write(
            &dir.join(format!("outcomes_{label}.csv")),
            &outcomes_to_csv(&outcomes, ds.stimuli()),
        )?;
        write(&dir.join(format!("report_{label}.txt")), &report.to_text())?;
        runs.push((label.clone(), report));
    }
    write_comparison(Some(&dir), &runs)
}

/// Rebuilds reports from `outcomes.csv` and the stored `report.json`
/// (for K and the hyperparameters) of each run directory.
pub fn cmd_report(run_dirs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for dir in run_dirs {
        let stored: EvalReport = serde_json::from_str(&read(&dir.join("report.json"))?)
            .map_err(|e| CliError::Config(format!("{}: {e}", dir.join("report.json").display())))?;
        let outcomes = outcomes_from_csv(&read(&dir.join("outcomes.csv"))?)?;
        let report = EvalReport::from_outcomes(&outcomes, stored.k)?
            .with_hyperparameters(stored.hyperparameters);
        runs.push(report);
    }
    let methods: Vec<String> = runs.iter().map(|r| r.method.clone()).collect();
    let labelled: Vec<(String, EvalReport)> = labels(&methods).into_iter().zip(runs).collect();
    let mut text = String::new();
    for (_, r) in &labelled {
        text.push_str(&r.to_text());
        text.push('\n');
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write(&dir.join("report.txt"), &text)?;
    }
    print!("{text}");
    if labelled.len() > 1 {
        write_comparison(out, &labelled)?;
    }
    Ok(())
}
