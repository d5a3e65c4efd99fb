//! The `bmui` command line.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use bmui_core::control::Direction;
use bmui_core::metrics::{evaluate_regressor, EvalReport};
use bmui_core::neural::{
    grad_check, load_regressor, save_classifier, save_regressor, split_trials, train_regressor, ModelKind,
    RegressorConfig, TrainConfig, TOLERANCE,
};
use bmui_core::session::{
    build_dataset, load_session_dir, preprocess_session, save_session_dir, synthesize_scripted, DatasetSpec,
    ScriptStep, SessionStage, SynthConfig, WindowPair,
};
use bmui_core::signal::ALIGNED_RATE_HZ;

use crate::calibrate::fit_direction_stage;
use crate::pipeline::{spawn, Models, PipelineConfig, CHUNK_MS};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Parser)]
#[command(name = "bmui", version, about = "EEG-to-EMG decoding and direction-proportional control of a virtual elbow")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session directory.
    Synth(SynthArgs),
    /// Align and filter a raw session into a preprocessed one.
    Preprocess(PreprocessArgs),
    /// Train the EEG-to-envelope regressor.
    Train(TrainArgs),
    /// Train the direction classifier and write the magnitude calibration.
    TrainCls(TrainClsArgs),
    /// Score a regressor and write an evaluation report.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Run the real-time pipeline behind a WebSocket endpoint.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output session directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    subject: String,
    #[arg(long, default_value_t = 40)]
    trials: usize,
    #[arg(long, default_value_t = 3.0)]
    trial_s: f64,
    #[arg(long, default_value_t = 2.0)]
    rest_s: f64,
    #[arg(long, default_value_t = 16)]
    eeg_channels: usize,
    #[arg(long, default_value_t = 6)]
    emg_channels: usize,
    /// EEG-to-EMG lag of the simulated drive.
    #[arg(long, default_value_t = 50.0)]
    delay_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    eeg_snr: f64,
    #[arg(long, default_value_t = 10.0)]
    emg_snr: f64,
    /// Amplitude of the 50 Hz interference.
    #[arg(long, default_value_t = 5.0)]
    line_uv: f64,
    /// Comma-separated steps replacing the trial protocol, e.g.
    /// `rest:2,flex:1.0:10,extend:1.0:10`.
    #[arg(long)]
    script: Option<String>,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Raw session directory.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct WindowArgs {
    #[arg(long, default_value_t = 200.0)]
    window_ms: f64,
    #[arg(long, default_value_t = 50.0)]
    stride_ms: f64,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Seed for weight initialisation, batching and the trial split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, validation and test fractions over whole trials.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.15, 0.15])]
    split: Vec<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Session directory (raw or preprocessed).
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Also write the loss history as JSON.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainClsArgs {
    /// Raw session directory.
    #[arg(long)]
    data: PathBuf,
    /// Trained regressor.
    #[arg(long)]
    regressor: PathBuf,
    /// Output classifier file.
    #[arg(long)]
    out: PathBuf,
    /// Output calibration JSON.
    #[arg(long)]
    calibration: PathBuf,
    /// Split seed and fractions the regressor was trained with.
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    /// Seed for the classifier's own training.
    #[arg(long, default_value_t = 0)]
    cls_seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Trained regressor.
    #[arg(long)]
    model: PathBuf,
    /// Session directory.
    #[arg(long)]
    data: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Split seed and fractions used in training; the test trials are scored.
    #[command(flatten)]
    split: SplitArgs,
    /// Score every window instead of the test trials.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Regressor,
    Classifier,
    Both,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    kind: KindArg,
    /// Number of seeds, starting at 0.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "BMUI_PORT", default_value_t = DEFAULT_PORT, value_parser = clap::value_parser!(u16).range(1024..))]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// `synthetic:<seed>` or `replay:<dir>`.
    #[arg(long, default_value = "synthetic:42")]
    source: String,
    #[arg(long, requires_all = ["classifier", "calibration"])]
    regressor: Option<PathBuf>,
    #[arg(long, requires_all = ["regressor", "calibration"])]
    classifier: Option<PathBuf>,
    #[arg(long, requires_all = ["regressor", "classifier"])]
    calibration: Option<PathBuf>,
    /// Directory of the UI bundle served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Run unpaced.
    #[arg(long)]
    fast: bool,
    /// Stop after this many chunks.
    #[arg(long)]
    max_chunks: Option<u64>,
    /// Scales the arm's angular speed.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    #[arg(long, default_value_t = 0.0)]
    threshold_fraction: f64,
    /// Wait for a `start` message before processing.
    #[arg(long)]
    paused: bool,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a usage error, 2 on a runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::TrainCls(a) => train_cls(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Serve(a) => serve(a),
    }
}

/// Parses `rest:<s>` and `<direction>:<level>:<s>` steps.
pub fn parse_script(text: &str) -> anyhow::Result<Vec<ScriptStep>> {
    text.split(',')
        .map(|step| {
            let parts: Vec<&str> = step.trim().split(':').collect();
            let num = |s: &str| s.parse::<f64>().with_context(|| format!("bad number {s:?} in step {step:?}"));
            match parts.as_slice() {
                ["rest", d] => Ok(ScriptStep::rest(num(d)?)),
                [dir, level, d] => {
                    let direction: Direction = dir.parse()?;
                    Ok(ScriptStep::hold(direction, num(level)?, num(d)?))
                }
                _ => bail!("bad script step {step:?}"),
            }
        })
        .collect()
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        seed: a.seed,
        subject_id: a.subject,
        n_trials: a.trials,
        trial_duration_s: a.trial_s,
        rest_duration_s: a.rest_s,
        n_eeg_ch: a.eeg_channels,
        n_emg_ch: a.emg_channels,
        delay_ms: a.delay_ms,
        eeg_snr: a.eeg_snr,
        emg_snr: a.emg_snr,
        line_noise_uv: a.line_uv,
        ..SynthConfig::default()
    };
    let script = match &a.script {
        Some(s) => parse_script(s)?,
        None => cfg.protocol(),
    };
    let s = synthesize_scripted(&cfg, &script)?;
    save_session_dir(&a.out, &s.session, SessionStage::Raw, Some(&s.truth))?;
    println!(
        "wrote {} ({:.1} s, {} EEG / {} EMG channels, {} labelled periods)",
        a.out.display(),
        s.session.emg.duration_s(),
        s.session.eeg.n_channels(),
        s.session.emg.n_channels(),
        s.intervals.len()
    );
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> anyhow::Result<()> {
    let stored = load_session_dir::<f64>(&a.input)?;
    if stored.stage != SessionStage::Raw {
        bail!("{} is already preprocessed", a.input.display());
    }
    let aligned = preprocess_session(&stored.session)?;
    let n = aligned.n_samples();
    save_session_dir(&a.out, &aligned.into_raw(), SessionStage::Preprocessed, stored.ground_truth.as_ref())?;
    println!("wrote {} ({n} samples at {ALIGNED_RATE_HZ} Hz)", a.out.display());
    Ok(())
}

fn train_config(split: &SplitArgs, epochs: usize) -> TrainConfig {
    let mut fractions = [0.0; 3];
    fractions.copy_from_slice(&split.split);
    TrainConfig { epochs, seed: split.seed, split: fractions, ..TrainConfig::default() }
}

fn dataset_spec(w: &WindowArgs) -> DatasetSpec {
    DatasetSpec { window_ms: w.window_ms, stride_ms: w.stride_ms, ..DatasetSpec::default() }
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let stored = load_session_dir::<f64>(&a.data)?;
    let ds = build_dataset(&stored, &dataset_spec(&a.window))?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.lr,
        patience: a.patience,
        ..train_config(&a.split, a.epochs)
    };
    let n_eeg = ds.session.eeg.n_channels();
    let n_emg = ds.session.emg.n_channels();
    let model_cfg = RegressorConfig {
        window: bmui_core::session::ms_to_samples(a.window.window_ms, ds.session.rate_hz()),
        ..RegressorConfig::standard(n_eeg, n_emg)
    };
    println!("{} windows from {} trials ({} skipped)", ds.windows.len(), ds.trials.len(), ds.skipped_trials);
    let fit = train_regressor(&ds.windows, model_cfg, &cfg)?;
    save_regressor(&fit.model, &a.out)?;
    if let Some(p) = &a.history {
        std::fs::write(p, serde_json::to_string_pretty(&fit.history)? + "\n")?;
    }
    let h = &fit.history;
    println!(
        "best epoch {} of {}: val loss {:.4} (untrained {:.4}){}",
        h.best_epoch,
        h.val_loss.len() - 1,
        h.best_val_loss(),
        h.val_loss[0],
        if h.stopped_early { ", stopped early" } else { "" }
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train_cls(a: TrainClsArgs) -> anyhow::Result<()> {
    let stored = load_session_dir::<f64>(&a.data)?;
    if stored.stage != SessionStage::Raw {
        bail!("train-cls decodes through the live front end and needs a raw session");
    }
    let regressor = load_regressor(&a.regressor)?;
    let split = train_config(&a.split, 1);
    let cls_cfg = TrainConfig { epochs: a.epochs, seed: a.cls_seed, ..TrainConfig::default() };
    let fit = fit_direction_stage(&stored, &regressor, &split, &cls_cfg, CHUNK_MS)?;
    save_classifier(&fit.classifier, &a.out)?;
    fit.calibration.save(&a.calibration)?;
    println!("{} sequences, held-out accuracy {:.3}", fit.n_sequences, fit.test_accuracy);
    println!(
        "calibrated channel {} (validation SCC {:.3}), envelope range [{:.4}, {:.4}]",
        fit.calibration.channel_index,
        fit.channel_scc[fit.calibration.channel_index],
        fit.calibration.env_min,
        fit.calibration.env_max
    );
    let both: Vec<usize> = (0..fit.bidirectional.len()).filter(|&c| fit.bidirectional[c]).collect();
    println!("channels active in both directions: {both:?}");
    println!("wrote {} and {}", a.out.display(), a.calibration.display());
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let model = load_regressor(&a.model)?;
    let stored = load_session_dir::<f64>(&a.data)?;
    let ds = build_dataset(&stored, &dataset_spec(&a.window))?;
    let picked: Vec<&WindowPair<f64>> = if a.all {
        ds.windows.iter().collect()
    } else {
        let ids: Vec<usize> = ds.windows.iter().map(|w| w.trial_id).collect();
        let split = split_trials(&ids, train_config(&a.split, 1).split, a.split.seed)?;
        ds.windows.iter().filter(|w| split.test.contains(&w.trial_id)).collect()
    };
    let report: EvalReport = evaluate_regressor(&model, &picked)?;
    report.save(&a.out)?;
    print!("{}", report.render_table(Some(ds.session.emg.channel_names())));
    println!("wrote {}", a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> anyhow::Result<()> {
    let kinds: &[ModelKind] = match a.kind {
        KindArg::Regressor => &[ModelKind::Regressor],
        KindArg::Classifier => &[ModelKind::Classifier],
        KindArg::Both => &[ModelKind::Regressor, ModelKind::Classifier],
    };
    let mut worst: f64 = 0.0;
    for &kind in kinds {
        for seed in 0..a.seeds {
            let r = grad_check(kind, seed, a.eps)?;
            println!("{kind:?} seed {seed}: max relative error {:.3e}", r.max_relative_error);
            worst = worst.max(r.max_relative_error);
        }
    }
    if worst > TOLERANCE {
        bail!("max relative error {worst:.3e} exceeds {TOLERANCE:.0e}");
    }
    println!("ok: max relative error {worst:.3e} <= {TOLERANCE:.0e}");
    Ok(())
}

fn load_models(a: &ServeArgs) -> anyhow::Result<Option<Arc<Models>>> {
    match (&a.regressor, &a.classifier, &a.calibration) {
        (Some(r), Some(c), Some(k)) => Ok(Some(Arc::new(Models::load(r, c, k)?))),
        _ => Ok(None),
    }
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let cfg = PipelineConfig {
        source: a.source.parse()?,
        fast: a.fast,
        max_chunks: a.max_chunks,
        start_paused: a.paused,
        gain: a.gain,
        threshold_fraction: a.threshold_fraction,
        ..PipelineConfig::default()
    };
    cfg.validate()?;
    let models = load_models(&a)?;
    let ui_dir = a.ui_dir.clone().or_else(|| Some(PathBuf::from("arm-ui/dist")).filter(|p| p.is_dir()));
    let runtime = tokio::runtime::Runtime::new()?;
    let summary = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        let pipeline = spawn(&cfg, models)?;
        println!("listening on ws://{}/ws ({} source, {} mode)", listener.local_addr()?, pipeline.source, pipeline.mode);
        crate::server::serve_on(listener, pipeline, ui_dir, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    println!("{}", summary.describe());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_parsing() {
        let s = parse_script("rest:2, flex:1.0:10,extend:0.5:3").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].direction, Direction::Flex);
        assert_eq!(s[2].level, 0.5);
        assert!(parse_script("flex:1").is_err());
        assert!(parse_script("up:1:2").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["bmui", "train", "--bogus"]), 1);
        assert_eq!(run(["bmui"]), 1);
        assert_eq!(run(["bmui", "serve", "--port", "80"]), 1);
        assert_eq!(run(["bmui", "--help"]), 0);
    }
}
