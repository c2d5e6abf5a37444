use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use midlime::audio::{encode_wav, StftConfig, WindowKind};
use midlime::fixtures;
use midlime::lime::{FillStrategy, LimeConfig};
use midlime::pipeline::{run_stability, run_two_level, PipelineError, PredictorSpec, RunConfig, TargetSpec};
use midlime::segmentation::SegmentationConfig;

#[derive(Parser)]
#[command(name = "midlime", version, about = "Two-level explanations of music emotion predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explain one clip and write the explanation bundle.
    Explain(ExplainArgs),
    /// Repeat the explanation across seeds and sample counts.
    Stability(StabilityArgs),
    /// Write a synthetic fixture clip.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fill {
    #[value(alias = "silence-floor")]
    Silence,
    SegmentMean,
    GlobalMean,
}

impl From<Fill> for FillStrategy {
    fn from(f: Fill) -> Self {
        match f {
            Fill::Silence => FillStrategy::SilenceFloor,
            Fill::SegmentMean => FillStrategy::SegmentMean,
            Fill::GlobalMean => FillStrategy::GlobalMean,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    audio: PathBuf,
    /// builtin, builtin:constant or exec:"COMMAND"
    #[arg(long, default_value = "builtin")]
    predictor: PredictorSpec,
    /// Seed of the builtin synthetic model.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    /// auto, mid:NAME, mid:INDEX, emotion:NAME or emotion:INDEX
    #[arg(long, default_value = "auto")]
    target: TargetSpec,
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    #[arg(long, default_value_t = 0.25)]
    kernel_width: f64,
    #[arg(long, default_value_t = 1e-6)]
    ratio_threshold: f64,
    #[arg(long, value_enum, default_value = "silence")]
    fill: Fill,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 25.0)]
    scale: f64,
    #[arg(long, default_value_t = 40)]
    min_size: usize,
    #[arg(long, default_value_t = 0.8)]
    sigma: f64,
    #[arg(long, default_value_t = 2048)]
    frame_size: usize,
    #[arg(long, default_value_t = 512)]
    hop: usize,
    #[arg(long, default_value_t = -80.0, allow_hyphen_values = true)]
    floor_db: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Perturbed spectrograms built per predictor call.
    #[arg(long, default_value_t = 64)]
    lime_batch: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Seconds to wait for each external predictor reply.
    #[arg(long, env = "MIDLIME_PREDICTOR_TIMEOUT", default_value_t = 30)]
    predictor_timeout: u64,
    /// Spectrograms per external predict request.
    #[arg(long, env = "MIDLIME_PREDICTOR_BATCH", default_value_t = 16)]
    predictor_batch: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 32)]
    gl_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    synth_gain: f64,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1000,50000")]
    sample_counts: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Drum-like hits over a sustained chord.
    Drums,
    /// A 2 kHz tone burst over a quiet bed.
    ToneBurst,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, value_enum, default_value = "drums")]
    kind: FixtureKind,
    #[arg(long, default_value_t = 3.0)]
    seconds: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn into_config(self) -> RunConfig {
        let mut cfg = RunConfig::new(self.audio, self.out);
        cfg.predictor = self.predictor;
        cfg.model_seed = self.model_seed;
        cfg.target = self.target;
        cfg.lime = LimeConfig {
            n_samples: self.samples,
            kernel_width: self.kernel_width,
            fill: self.fill.into(),
            ridge_alpha: self.alpha,
            ratio_threshold: self.ratio_threshold,
            seed: self.seed,
            batch_size: self.lime_batch,
        };
        cfg.segmentation = SegmentationConfig { scale: self.scale, min_size: self.min_size, sigma: self.sigma };
        cfg.stft = StftConfig {
            frame_size: self.frame_size,
            hop_size: self.hop,
            window: WindowKind::Hann,
            floor_db: self.floor_db,
        };
        cfg.workers = self.workers;
        cfg.predictor_timeout_secs = self.predictor_timeout;
        cfg.predictor_batch_size = self.predictor_batch;
        cfg
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Explain(args) => {
            let mut cfg = args.common.into_config();
            cfg.gl_iterations = args.gl_iters;
            cfg.synth_gain = args.synth_gain;
            let bundle = run_two_level(&cfg)?;
            println!(
                "{}: {} of {} segments selected ({} positive, {} negative) -> {}",
                bundle.explanation.target,
                bundle.explanation.selected.len(),
                bundle.segment_count,
                bundle.explanation.positive_ids.len(),
                bundle.explanation.negative_ids.len(),
                bundle.out_dir.display()
            );
        }
        Command::Stability(args) => {
            let cfg = args.common.into_config();
            let report = run_stability(&cfg, &args.seeds, &args.sample_counts)?;
            for s in &report.summary {
                println!(
                    "n_samples={} mean_pairwise_jaccard={:.4} mean_selected={:.1}",
                    s.n_samples, s.mean_pairwise_jaccard, s.mean_selected
                );
            }
        }
        Command::Fixture(args) => {
            if !(args.seconds > 0.0 && args.seconds.is_finite()) {
                return Err(PipelineError::config("seconds must be positive"));
            }
            let clip = match args.kind {
                FixtureKind::Drums => fixtures::drums_over_pad(args.seconds, args.seed),
                FixtureKind::ToneBurst => {
                    fixtures::tone_burst(args.seconds, 2000.0, args.seconds / 3.0, 2.0 * args.seconds / 3.0)
                }
            };
            encode_wav(&clip, &args.out).map_err(|e| PipelineError::new(midlime::pipeline::Stage::Write, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIDLIME_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e.source);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
