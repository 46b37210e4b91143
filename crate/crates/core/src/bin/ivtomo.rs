use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ivtomo::cli::{resume, run, write_presets, Experiment, GeomPreset, RunConfig, RunReport, StageError};
use ivtomo::io;

/// Circular-means tomography experiments (interior, exterior, IVPA, IVUS).
#[derive(Parser)]
#[command(name = "ivtomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
    /// Redo the reconstruction from a previous run directory.
    Resume {
        dir: PathBuf,
    },
    /// Render a stored image array as an 8-bit PGM with a fixed window.
    Render {
        /// Array base path (without `.bin`/`.json`).
        base: PathBuf,
        output: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
    },
    /// Write the built-in phantoms as JSON feature lists.
    Presets {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment name; same as --experiment.
    #[arg(value_enum)]
    name: Option<Experiment>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Relative L2 noise level (0.05 = 5%).
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<f64>,
    /// Peak relative speed perturbation for ivus-* runs.
    #[arg(long, allow_hyphen_values = true)]
    contrast: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    geom_preset: Option<GeomPreset>,
    /// Height of the vertical contour segment.
    #[arg(long = "contour-a", allow_hyphen_values = true)]
    contour_a: Option<f64>,
    /// Length of the horizontal contour segment.
    #[arg(long = "contour-M", allow_hyphen_values = true)]
    contour_m: Option<f64>,
    /// Relative margin by which the visibility cone is narrowed.
    #[arg(long, allow_hyphen_values = true)]
    cone_margin: Option<f64>,
    /// Phantom feature list (JSON); replaces the experiment's preset.
    #[arg(long)]
    phantom: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, StageError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json_file(p).map_err(|error| StageError { stage: "config", error })?,
            None => RunConfig::default(),
        };
        if let Some(e) = self.experiment.or(self.name) {
            c.experiment = e;
        }
        if let Some(v) = self.noise {
            c.noise = v;
        }
        if let Some(v) = self.contrast {
            c.contrast = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if let Some(p) = self.geom_preset {
            c.geom_preset = Some(p);
            c.geometry = None;
        }
        if self.contour_a.is_some() {
            c.inversion.a = self.contour_a;
        }
        if self.contour_m.is_some() {
            c.inversion.m = self.contour_m;
        }
        if let Some(v) = self.cone_margin {
            c.inversion.margin = v;
        }
        if let Some(p) = self.phantom {
            c.phantom_file = Some(p);
            c.phantom = None;
        }
        Ok(c)
    }
}

fn report(r: Result<RunReport, StageError>) -> ExitCode {
    match r {
        Ok(rep) => {
            println!("{}", serde_json::to_string_pretty(&rep.metrics).expect("metrics serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &StageError) -> ExitCode {
    eprintln!("error {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match args.into_config() {
            Ok(cfg) => report(run(&cfg)),
            Err(e) => fail(&e),
        },
        Command::Resume { dir } => report(resume(&dir)),
        Command::Render { base, output, lo, hi } => {
            let r = io::load_image(&base).and_then(|img| io::render(&img, &output, lo, hi));
            match r {
                Ok(()) => ExitCode::SUCCESS,
                Err(error) => fail(&StageError { stage: "render", error }),
            }
        }
        Command::Presets { dir } => match write_presets(&dir) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(error) => fail(&StageError { stage: "output", error }),
        },
    }
}
