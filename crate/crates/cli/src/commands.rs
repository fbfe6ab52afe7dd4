use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use esn_plasticity::dataset::{
    generate_synthetic_subjects, label_trial, load_dataset, save_dataset, split_train_test, LabelScheme,
    SchemeKind, Subject, SyntheticSpec,
};
use esn_plasticity::features::extract_trial_features;
use esn_plasticity::pipeline::{sweep as run_sweep, sweep_csv, train_model, EvaluationReport, TrainedModel};

use crate::config::{read_json, DataSource, RunConfig};
use crate::{CliError, EvalArgs, GenArgs, InspectArgs, RunArgs, SweepArgs};

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
    write_text(path, &text)
}

/// The report with the data source echoed next to the experiment config.
fn report_with_source(report: &EvaluationReport, data: &DataSource) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["data"] = serde_json::to_value(data).expect("data source serializes");
    v
}

pub fn gen_synthetic(a: &GenArgs) -> Result<(), CliError> {
    let mut spec: SyntheticSpec = match &a.config {
        Some(path) => read_json(path, "synthetic spec")?,
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(kind) = a.scheme {
        spec.scheme = LabelScheme { kind, ..spec.scheme };
    }
    let subjects = generate_synthetic_subjects(&spec)?;
    create_out(&a.out)?;
    let manifest = save_dataset(&a.out, &subjects, spec.sample_rate_hz)?;
    log::info!("wrote {} trials, manifest {}", spec.total_trials(), manifest.display());
    write_json(&a.out.join("synthetic.json"), &spec)
}

pub fn extract_features(a: &RunArgs) -> Result<(), CliError> {
    let mut run = RunConfig::resolve(a.config.as_deref(), a.data.as_deref())?;
    run.apply(&a.overrides);
    let data = run.load_data(run.experiment.scheme)?;
    let opts = &run.experiment.features.extraction;
    opts.bands.validate()?;

    let mut rows = Vec::with_capacity(data.len());
    for t in &data.trials {
        rows.push((t, extract_trial_features(&t.trial, opts)?));
    }
    create_out(&a.out)?;

    let csv_path = a.out.join("features.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::Usage(format!("{}: {e}", csv_path.display())))?;
    let csv_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", csv_path.display()));
    if let Some((_, fv)) = rows.first() {
        let mut header = vec!["subject".to_string(), "trial".into(), "label".into()];
        for c in 0..fv.channels {
            header.extend(fv.band_names.iter().map(|b| format!("ch{c}_{b}")));
        }
        w.write_record(&header).map_err(csv_err)?;
    }
    for (t, fv) in &rows {
        let mut rec = vec![t.id.subject.clone(), t.id.trial.to_string(), data.class_names[t.label].clone()];
        rec.extend(fv.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    log::info!("wrote {}", csv_path.display());

    let trials: Vec<Value> = rows
        .iter()
        .map(|(t, fv)| json!({ "id": t.id, "label": t.label, "values": fv.values }))
        .collect();
    let doc = json!({
        "data": run.data,
        "scheme": run.experiment.scheme,
        "extraction": opts,
        "sample_rate_hz": data.sample_rate_hz,
        "class_names": data.class_names,
        "band_names": rows.first().map(|(_, fv)| fv.band_names.clone()).unwrap_or_default(),
        "channels": rows.first().map_or(0, |(_, fv)| fv.channels),
        "trials": trials,
    });
    write_json(&a.out.join("features.json"), &doc)
}

pub fn train(a: &RunArgs) -> Result<(), CliError> {
    let mut run = RunConfig::resolve(a.config.as_deref(), a.data.as_deref())?;
    run.apply(&a.overrides);
    let data = run.prepare()?;
    log::info!(
        "training on {} trials, R = {}, rule {}, readout {:?}",
        data.len(),
        run.experiment.reservoir.reservoir_size,
        run.experiment.plasticity.as_ref().map_or("none", |r| r.name()),
        run.experiment.readout.mode
    );
    for w in run.experiment.warnings() {
        log::warn!("{w}");
    }
    let (model, report) = train_model(&run.experiment, &data)?;
    log::info!("test accuracy {:.4} over {} trials", report.accuracy, report.test_trials);
    create_out(&a.out)?;
    write_json(&a.out.join("report.json"), &report_with_source(&report, &run.data))?;
    let model_path = a.out.join("model.json");
    model.save(&model_path)?;
    log::info!("wrote {}", model_path.display());
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = TrainedModel::load(&a.model)?;
    let run = RunConfig::resolve(a.config.as_deref(), a.data.as_deref())?;
    let data = run.load_data(model.config.scheme)?;
    let report = if a.all {
        model.evaluate(&data, None)?
    } else {
        let split = split_train_test(&data, model.config.split.train_fraction, model.config.split.seed)?;
        model.evaluate(&data, Some(&split.test))?
    };
    log::info!("accuracy {:.4} over {} trials", report.accuracy, report.test_trials);
    create_out(&a.out)?;
    let mut doc = report_with_source(&report, &run.data);
    doc["model"] = json!(a.model);
    write_json(&a.out.join("report.json"), &doc)
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let mut run = RunConfig::resolve(a.run.config.as_deref(), a.run.data.as_deref())?;
    run.apply(&a.run.overrides);
    let data = run.prepare()?;
    let seeds = if a.seeds.is_empty() {
        vec![run.experiment.reservoir.seed]
    } else {
        a.seeds.clone()
    };
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    log::info!(
        "sweeping {} over {} values x {} seeds on {} threads",
        a.param.name(),
        a.values.len(),
        seeds.len(),
        a.jobs
    );
    let rows = run_sweep(&run.experiment, a.param, &a.values, &seeds, &data, a.jobs)?;
    create_out(&a.run.out)?;
    write_text(&a.run.out.join("sweep.csv"), &sweep_csv(&rows))?;
    let doc = json!({
        "data": run.data,
        "experiment": run.experiment,
        "parameter": a.param,
        "values": a.values,
        "seeds": seeds,
        "rows": rows,
    });
    write_json(&a.run.out.join("sweep.json"), &doc)
}

#[derive(Serialize)]
struct RatingRange {
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: &'static str,
    class_names: Vec<String>,
    counts: Vec<usize>,
    labeled: usize,
    unlabeled: usize,
}

#[derive(Serialize)]
struct Inspection {
    manifest: String,
    subjects: usize,
    trials: usize,
    channels: usize,
    samples_per_trial: usize,
    sample_rate_hz: u32,
    ratings: Vec<(&'static str, Option<RatingRange>)>,
    schemes: Vec<SchemeSummary>,
}

fn summarize(manifest: &Path, subjects: &[Subject], channels: usize, samples: usize, rate: u32) -> Inspection {
    let trials: Vec<_> = subjects.iter().flat_map(|s| &s.trials).collect();
    let names = ["valence", "arousal", "dominance", "liking"];
    let ratings = names
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let range = trials.iter().map(|t| t.ratings.as_array()[k]).fold(None, |acc: Option<RatingRange>, v| {
                Some(match acc {
                    None => RatingRange { min: v, max: v },
                    Some(r) => RatingRange { min: r.min.min(v), max: r.max.max(v) },
                })
            });
            (name, range)
        })
        .collect();
    let schemes = SchemeKind::ALL
        .iter()
        .map(|&kind| {
            let scheme = LabelScheme::new(kind);
            let mut counts = vec![0; scheme.num_classes()];
            let mut unlabeled = 0;
            for t in &trials {
                match label_trial(&t.ratings, &scheme) {
                    Some(c) => counts[c] += 1,
                    None => unlabeled += 1,
                }
            }
            SchemeSummary {
                scheme: kind.name(),
                class_names: scheme.class_names(),
                labeled: trials.len() - unlabeled,
                counts,
                unlabeled,
            }
        })
        .collect();
    Inspection {
        manifest: manifest.display().to_string(),
        subjects: subjects.len(),
        trials: trials.len(),
        channels,
        samples_per_trial: samples,
        sample_rate_hz: rate,
        ratings,
        schemes,
    }
}

fn render(ins: &Inspection) -> String {
    let mut s = format!("dataset {}\n", ins.manifest);
    s += &format!(
        "{} subjects, {} trials, {} channels, {} samples per trial at {} Hz\n",
        ins.subjects, ins.trials, ins.channels, ins.samples_per_trial, ins.sample_rate_hz
    );
    if ins.trials == 0 {
        return s;
    }
    s += "ratings:\n";
    for (name, r) in &ins.ratings {
        if let Some(r) = r {
            s += &format!("  {name:<10} [{}, {}]\n", r.min as f32, r.max as f32);
        }
    }
    s += "classes by scheme:\n";
    for sc in &ins.schemes {
        s += &format!("  {} ({} of {} trials labeled)\n", sc.scheme, sc.labeled, ins.trials);
        for (name, n) in sc.class_names.iter().zip(&sc.counts) {
            s += &format!("    {name:<12} {n}\n");
        }
    }
    s
}

pub fn inspect(a: &InspectArgs) -> Result<(), CliError> {
    let ins = match (&a.data, &a.config) {
        (Some(path), _) => {
            let d = load_dataset(path)?;
            let m = &d.manifest;
            summarize(path, &d.subjects, m.channels, m.samples_per_trial, m.sample_rate_hz)
        }
        (None, Some(cfg)) => {
            let run = RunConfig::resolve(Some(cfg), None)?;
            match &run.data {
                DataSource::Manifest(path) => {
                    let d = load_dataset(path)?;
                    let m = &d.manifest;
                    summarize(path, &d.subjects, m.channels, m.samples_per_trial, m.sample_rate_hz)
                }
                DataSource::Synthetic(spec) => {
                    let subjects = generate_synthetic_subjects(spec)?;
                    summarize(Path::new("<synthetic>"), &subjects, spec.channels, spec.samples, spec.sample_rate_hz)
                }
            }
        }
        (None, None) => unreachable!("clap requires --data or --config"),
    };
    print!("{}", render(&ins));
    if let Some(out) = &a.out {
        create_out(out)?;
        write_json(&out.join("inspect.json"), &ins)?;
    }
    Ok(())
}
