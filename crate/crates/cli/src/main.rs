use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsm_cli::{cmd_copysynth, cmd_export, cmd_train, cmd_vocode, CopyArgs, ExportKind, TrainArgs, VocodeArgs};

#[derive(Parser)]
#[command(name = "dsm", version, about = "Deterministic plus stochastic residual vocoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Synthesis {
    /// Triangular noise envelope floor, overriding the model.
    #[arg(long)]
    beta: Option<f64>,
    /// Stochastic-to-deterministic RMS ratio, overriding the model.
    #[arg(long)]
    noise_gain: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a directory of 16 kHz mono WAV files.
    Train {
        corpus_dir: PathBuf,
        model_out: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        f0_min: f64,
        #[arg(long, default_value_t = 240.0)]
        f0_max: f64,
        /// Maximum voiced frequency, Hz.
        #[arg(long, default_value_t = 4000.0)]
        max_voiced: f64,
        #[arg(long, default_value_t = 0.8)]
        coverage: f64,
        /// Directory with `<stem>.f0` files (`time f0 voiced` lines).
        #[arg(long)]
        f0_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Fit PCA on uncentred frames.
        #[arg(long)]
        no_center: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analyse a WAV file and resynthesise it.
    Copysynth {
        model: PathBuf,
        wav_in: PathBuf,
        wav_out: PathBuf,
        /// PCA weights per frame; 0 uses the first eigenvector only.
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        f0_file: Option<PathBuf>,
        /// Write the extracted parameters to this file.
        #[arg(long)]
        params_out: Option<PathBuf>,
        #[command(flatten)]
        synthesis: Synthesis,
    },
    /// Synthesise speech from a parameter file.
    Vocode {
        model: PathBuf,
        params: PathBuf,
        wav_out: PathBuf,
        /// Overrides the seed stored in the parameter file.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        synthesis: Synthesis,
    },
    /// Write model data as CSV: dispersion, eigenvector:<i>, ar-response or decomposition:<wav>.
    Export {
        model: PathBuf,
        what: ExportKind,
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let head: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", head.join(" "));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Train {
            corpus_dir,
            model_out,
            f0_min,
            f0_max,
            max_voiced,
            coverage,
            f0_dir,
            gamma,
            beta,
            no_center,
            jobs,
        } => cmd_train(&TrainArgs {
            corpus_dir,
            model_out,
            f0_min,
            f0_max,
            max_voiced,
            coverage,
            f0_dir,
            gamma,
            beta,
            center: !no_center,
            jobs,
        }),
        Command::Copysynth {
            model,
            wav_in,
            wav_out,
            k,
            seed,
            f0_file,
            params_out,
            synthesis,
        } => cmd_copysynth(&CopyArgs {
            model,
            wav_in,
            wav_out,
            k,
            seed,
            beta: synthesis.beta,
            noise_gain: synthesis.noise_gain,
            f0_file,
            params_out,
        }),
        Command::Vocode {
            model,
            params,
            wav_out,
            seed,
            synthesis,
        } => cmd_vocode(&VocodeArgs {
            model,
            params,
            wav_out,
            seed,
            beta: synthesis.beta,
            noise_gain: synthesis.noise_gain,
        }),
        Command::Export { model, what, out } => cmd_export(&model, &what, &out),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
