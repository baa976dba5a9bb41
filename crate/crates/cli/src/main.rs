use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gnssmap::geo::{ElevationBounds, FootprintDocument};
use gnssmap::ingest::{
    build_dataset, load_footprint, load_observations, summarize, BuildOptions, BuildingDataset, ObservationRecord,
};
use gnssmap::mapper::{run_bayes, run_hinge, Algorithm, ConvergenceConfig, HeightEstimate, StopReason, SweepConfig};
use gnssmap::report::{sweep_svg, write_sweep_csv, SweepEnvelope};
use gnssmap::signal_model::{
    fit_4pl_mle, log_likelihood, mcfadden_r2, null_log_likelihood, signal_classifier, ActualClass, ConfusionMatrix,
    FitError, FitOptions, FourPLParams, LabeledTuple,
};
use gnssmap::synth::{export, generate, SimulationConfig};
use gnssmap::{run_4pl, run_4plb, Error};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gnssmap", version, about = "Building height estimation from GNSS signal strength")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate one building's height from an observation log.
    Estimate(EstimateArgs),
    /// Generate a synthetic scene and export it.
    Simulate(SimulateArgs),
    /// Run every algorithm across a range of initial thresholds.
    Sweep(SweepArgs),
    /// Fit the signal classifier on truth-labelled observations.
    FitClassifier(FitClassifierArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Observation CSV.
    #[arg(long, value_name = "PATH")]
    obs: PathBuf,
    /// Footprint JSON.
    #[arg(long, value_name = "PATH")]
    footprint: PathBuf,
    #[arg(long, value_name = "DEG", default_value_t = 10.0)]
    elev_min: f64,
    #[arg(long, value_name = "DEG", default_value_t = 85.0)]
    elev_max: f64,
    /// Ground altitude; receivers are placed 1 m above it.
    #[arg(long, value_name = "METRES")]
    dem_alt: Option<f64>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value_t = 0.9)]
    init_a: f64,
    #[arg(long, default_value_t = 0.2)]
    init_b: f64,
    #[arg(long, default_value_t = 30.0)]
    init_c: f64,
    #[arg(long, default_value_t = 0.1)]
    init_d: f64,
}

impl InitArgs {
    fn params(&self) -> Result<FourPLParams> {
        FourPLParams::new(self.init_a, self.init_b, self.init_c, self.init_d)
            .map_err(Error::from)
            .context("initial signal classifier")
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    init: InitArgs,
    #[arg(long, default_value = "4plb")]
    algo: Algorithm,
    /// Write estimate.json and summary.txt here instead of JSON to stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config JSON; every field is optional.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.9)]
    init_a: f64,
    #[arg(long, default_value_t = 0.2)]
    init_b: f64,
    #[arg(long, default_value_t = 0.1)]
    init_d: f64,
    #[arg(long, default_value_t = 20.0)]
    sweep_c_min: f64,
    #[arg(long, default_value_t = 40.0)]
    sweep_c_max: f64,
    #[arg(long, default_value_t = 1.0)]
    sweep_c_step: f64,
    /// Known height; enables RMSE in the summary and the truth rule in the chart.
    #[arg(long, value_name = "METRES")]
    truth_height: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FitClassifierArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    init: InitArgs,
    /// Write classifier.json here instead of JSON to stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Successful run, or one that finished without a usable answer.
enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::FitClassifier(args) => cmd_fit_classifier(&args),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// Error chain joined with `: `, skipping causes whose text an outer
/// message already repeats.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if text.contains(&msg) {
            continue;
        }
        if !text.is_empty() {
            text += ": ";
        }
        text += &msg;
    }
    text
}

struct Loaded {
    records: Vec<ObservationRecord>,
    dataset: BuildingDataset,
}

fn load_inputs(input: &InputArgs) -> Result<Loaded> {
    let bounds = ElevationBounds::new(input.elev_min, input.elev_max).map_err(Error::from)?;
    let footprint = load_footprint(&input.footprint).map_err(Error::from)?;
    let loaded = load_observations(&input.obs).map_err(Error::from)?;
    for row in &loaded.malformed {
        log::warn!("skipped line {}: {}", row.line, row.reason);
    }
    let opts = BuildOptions { bounds, dem_altitude: input.dem_alt };
    let dataset = build_dataset(&loaded.records, &footprint, &opts).map_err(Error::from)?;
    log::info!(
        "{} records, {} intersecting tuples for {}",
        loaded.records.len(),
        dataset.len(),
        dataset.building_id
    );
    Ok(Loaded { records: loaded.records, dataset })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn stop_reason_text(reason: StopReason) -> &'static str {
    match reason {
        StopReason::LabelsSettled => "labels settled",
        StopReason::ParametersSettled => "parameters settled",
        StopReason::IterationCap => "iteration cap reached",
        StopReason::SinglePass => "single pass",
        StopReason::Degenerate => "degenerate data",
    }
}

fn logistic_summary(est: &HeightEstimate) -> String {
    let mut s = match est.height {
        Some(h) => format!(
            "height {:.2} m, range {:.2} .. {:.2} m\n",
            h.point, h.range_low, h.range_high
        ),
        None => "no height estimate\n".to_string(),
    };
    s += &format!("{} after {} iteration(s)", stop_reason_text(est.stop_reason), est.iterations);
    if !est.converged {
        s += ", not converged";
    }
    s.push('\n');
    if let Some(reason) = &est.failure {
        s += &format!("reason: {reason}\n");
    }
    s
}

fn cmd_estimate(args: &EstimateArgs) -> Result<Outcome> {
    let init = args.init.params()?;
    let loaded = load_inputs(&args.input)?;
    let ds = &loaded.dataset;
    let summary = summarize(&loaded.records, Some(ds));

    let mut doc = json!({
        "algorithm": args.algo,
        "building_id": ds.building_id,
        "init": init,
        "dataset": summary,
        "provenance": ds.provenance,
    });
    let mut text = format!(
        "building {}: {} records ({} blocked), {} intersecting tuples\nalgorithm {}: ",
        ds.building_id, summary.total, summary.blocked, summary.intersecting, args.algo
    );
    let (body, converged) = match args.algo {
        Algorithm::FourPlB | Algorithm::FourPl => {
            let est = if args.algo == Algorithm::FourPlB {
                run_4plb(ds, &init, &ConvergenceConfig::default())
            } else {
                run_4pl(ds, &init)
            }
            .map_err(Error::from)?;
            text += &logistic_summary(&est);
            (serde_json::to_value(&est)?, est.converged)
        }
        Algorithm::Hinge => {
            let est = run_hinge(ds, &init).map_err(Error::from)?;
            text += &format!("height {:.2} m, loss {:.3}\n", est.height, est.loss);
            if est.one_class {
                text += "reason: every tuple carries the same signal label\n";
            }
            let body = json!({"point": est.height, "loss": est.loss, "one_class": est.one_class, "converged": !est.one_class});
            (body, !est.one_class)
        }
        Algorithm::Bayes => {
            let est = run_bayes(ds, &init).map_err(Error::from)?;
            text += &format!("height {:.2} m, log-likelihood {:.3}\n", est.height, est.log_likelihood);
            (json!({"point": est.height, "log_likelihood": est.log_likelihood, "converged": true}), true)
        }
    };
    if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
        doc.extend(body);
    }

    let rendered = pretty(&doc)?;
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join("estimate.json"), &rendered)?;
            write_file(&dir.join("summary.txt"), &text)?;
            print!("{text}");
        }
        None => {
            print!("{rendered}");
            eprint!("{text}");
        }
    }
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimulationConfig::from_json(&text).map_err(Error::from)?
        }
        None => SimulationConfig::default(),
    };
    let seed = match args.seed.or(config.scene.seed) {
        Some(seed) => seed,
        None => {
            let seed = rand::random::<u64>();
            println!("seed: {seed}");
            seed
        }
    };
    let spec = config.scene_spec(seed).map_err(Error::from)?;
    let synth = generate(&spec, &config.signal).map_err(Error::from)?;

    ensure_dir(&args.out)?;
    export(&synth, args.out.join("observations.csv")).map_err(Error::from)?;
    write_file(&args.out.join("footprint.json"), pretty(&FootprintDocument::from_footprint(&spec.footprint))?)?;
    let truth = json!({
        "building_id": spec.footprint.id(),
        "true_height": synth.truth.height,
        "seed": spec.seed,
        "records": synth.records.len(),
        "blocked": synth.records.iter().filter(|r| r.is_blocked()).count(),
        "intersecting": synth.true_intersections.iter().filter(|h| h.is_some()).count(),
        "signal": config.signal,
    });
    write_file(&args.out.join("truth.json"), pretty(&truth)?)?;
    println!("wrote {} records to {}", synth.records.len(), args.out.display());
    Ok(Outcome::Done)
}

fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    let cfg = SweepConfig {
        a: args.init_a,
        b: args.init_b,
        d: args.init_d,
        c_min: args.sweep_c_min,
        c_max: args.sweep_c_max,
        c_step: args.sweep_c_step,
        convergence: ConvergenceConfig::default(),
    };
    // fail on bad parameters before the (slow) data load
    cfg.init_for(cfg.c_min).map_err(Error::from).context("initial signal classifier")?;
    cfg.thresholds().map_err(Error::from)?;
    let loaded = load_inputs(&args.input)?;
    let ds = &loaded.dataset;
    let rows = gnssmap::mapper::run_sweep(ds, &cfg).map_err(Error::from)?;

    ensure_dir(&args.out)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows).map_err(Error::from)?;
    write_file(&args.out.join("sweep.csv"), csv)?;
    let envelope = SweepEnvelope::new(
        cfg,
        summarize(&loaded.records, Some(ds)),
        ds.provenance,
        args.truth_height,
        &rows,
    );
    write_file(&args.out.join("sweep.json"), pretty(&envelope)?)?;
    write_file(&args.out.join("sweep.svg"), sweep_svg(&rows, args.truth_height))?;

    println!("{:<6} {:>9} {:>9} {:>9} {:>9}", "algo", "converged", "rmse", "min", "max");
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
    for s in &envelope.summary {
        let r = &s.report;
        println!(
            "{:<6} {:>9} {:>9} {:>9} {:>9}",
            s.algorithm.as_str(),
            format!("{}/{}", r.converged, r.estimates),
            fmt(r.rmse),
            fmt(r.min_point),
            fmt(r.max_point)
        );
    }
    Ok(Outcome::Done)
}

fn cmd_fit_classifier(args: &FitClassifierArgs) -> Result<Outcome> {
    let init = args.init.params()?;
    let loaded = load_inputs(&args.input)?;
    let ds = &loaded.dataset;

    let training: Vec<LabeledTuple> = ds
        .tuples
        .iter()
        .filter_map(|t| Some(LabeledTuple { y: t.truth?.is_open(), x: t.cn0? }))
        .collect();
    let fit = match fit_4pl_mle(&training, &init, &FitOptions::default()) {
        Ok(fit) => fit,
        Err(e @ (FitError::Degenerate(_) | FitError::InsufficientData { .. })) => {
            eprintln!("error: {}", Error::from(e));
            return Ok(Outcome::NotConverged);
        }
        Err(e) => return Err(Error::from(e).into()),
    };
    let ll_null = null_log_likelihood(&training);
    let r2 = mcfadden_r2(log_likelihood(&fit.params, &training), ll_null);

    let mut in_dataset = vec![None; loaded.records.len()];
    for t in &ds.tuples {
        in_dataset[t.source_index] = Some(t);
    }
    let mut confusion = ConfusionMatrix::default();
    for (rec, tuple) in loaded.records.iter().zip(&in_dataset) {
        let Some(truth) = rec.truth_label else { continue };
        let actual = match (tuple, truth.is_open()) {
            (None, _) => ActualClass::NotIntersecting,
            (Some(_), true) => ActualClass::Open,
            (Some(_), false) => ActualClass::Closed,
        };
        confusion.add(signal_classifier(&fit.params, rec.cn0) > 0.5, actual);
    }

    let doc = json!({
        "building_id": ds.building_id,
        "init": init,
        "fit": fit,
        "training_tuples": training.len(),
        "null_log_likelihood": ll_null,
        "mcfadden_r2": r2,
        "confusion": {
            "columns": ["open", "closed", "n/a"],
            "predicted_open": confusion.predicted_open,
            "predicted_closed": confusion.predicted_closed,
        },
    });
    let p = fit.params;
    let cols = confusion.column_totals();
    let rows = confusion.row_totals();
    let mut text = format!(
        "signal classifier on {} tuples: a={:.4} b={:.4} c={:.3} d={:.4}\nMcFadden R2 {:.4}{}\n\n",
        training.len(),
        p.a,
        p.b,
        p.c,
        p.d,
        r2,
        if fit.converged { "" } else { " (fit not converged)" }
    );
    text += &format!("{:<16}{:>8}{:>8}{:>8}{:>8}\n", "predicted\\actual", "open", "closed", "n/a", "total");
    for (name, row, total) in [
        ("open", confusion.predicted_open, rows[0]),
        ("closed", confusion.predicted_closed, rows[1]),
    ] {
        text += &format!("{:<16}{:>8}{:>8}{:>8}{:>8}\n", name, row[0], row[1], row[2], total);
    }
    text += &format!("{:<16}{:>8}{:>8}{:>8}{:>8}\n", "total", cols[0], cols[1], cols[2], confusion.total());

    let rendered = pretty(&doc)?;
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join("classifier.json"), &rendered)?;
            print!("{text}");
        }
        None => {
            print!("{rendered}");
            eprint!("{text}");
        }
    }
    Ok(if fit.converged { Outcome::Done } else { Outcome::NotConverged })
}
