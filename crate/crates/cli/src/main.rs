use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use darkgrid_cli::commands::{cmd_compare, cmd_detect, cmd_eval, cmd_inspect, EvalArgs, EvalSource};
use darkgrid_cli::error::CliError;
use darkgrid_cli::pipeline::{RunConfig, WeightSource};

/// Inference and evaluation toolkit for Darknet-style detection networks.
#[derive(Parser)]
#[command(name = "darkgrid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct NetworkFlags {
    /// Network configuration file.
    #[arg(long)]
    cfg: Option<PathBuf>,
    /// Binary weight file.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Deterministic random weights from this seed instead of a file.
    #[arg(long)]
    seed: Option<u64>,
    /// Square input-size override (positive multiple of 32).
    #[arg(long)]
    size: Option<usize>,
    /// Confidence cut applied before suppression.
    #[arg(long, default_value_t = 0.25)]
    conf_thresh: f64,
    /// Suppression IoU threshold; 0 disables suppression.
    #[arg(long, default_value_t = 0.45)]
    nms_thresh: f64,
    /// Aspect-preserving letterbox fit instead of direct stretch.
    #[arg(long)]
    letterbox: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the per-layer shape table of a configuration.
    Inspect {
        cfg: PathBuf,
        /// Square input-size override (positive multiple of 32).
        #[arg(long)]
        size: Option<usize>,
    },
    /// Detect objects in one image and dump the boxes as text.
    Detect {
        #[command(flatten)]
        network: NetworkFlags,
        /// Write the detection dump here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        image: PathBuf,
    },
    /// Evaluate detections over an image list against annotations.
    Eval {
        #[command(flatten)]
        network: NetworkFlags,
        /// Evaluation IoU threshold (true-positive cut).
        #[arg(long, default_value_t = 0.25)]
        iou_thresh: f64,
        /// AP integration: "allpoint" or "11point".
        #[arg(long, default_value = "allpoint")]
        ap_method: String,
        /// Planted detections file; bypasses the network entirely.
        #[arg(long, conflicts_with_all = ["cfg", "weights", "seed"])]
        detections_file: Option<PathBuf>,
        /// Skip unreadable images (counted in the report) instead of failing.
        #[arg(long)]
        skip_missing: bool,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the PR curve as CSV here.
        #[arg(long)]
        pr_out: Option<PathBuf>,
        /// Write the PR curve as SVG here.
        #[arg(long)]
        pr_svg: Option<PathBuf>,
        /// Emit the report as JSON instead of the flat text format.
        #[arg(long)]
        json: bool,
        /// Image list, one path per line, relative to the list file.
        images: PathBuf,
        /// Annotation file.
        annotations: PathBuf,
    },
    /// Compare two serialized reports metric by metric.
    Compare { report_a: PathBuf, report_b: PathBuf },
}

fn weight_source(flags: &NetworkFlags) -> Result<WeightSource, CliError> {
    match (&flags.weights, flags.seed) {
        (Some(path), None) => Ok(WeightSource::File(path.clone())),
        (None, Some(seed)) => Ok(WeightSource::Seed(seed)),
        (None, None) => Err(CliError::usage("provide --weights FILE or --seed N")),
        (Some(_), Some(_)) => Err(CliError::usage("--weights and --seed are exclusive")),
    }
}

fn run_config(
    flags: &NetworkFlags,
    iou_thresh: f64,
    ap_method: darkgrid_core::eval::ApMethod,
) -> Result<RunConfig, CliError> {
    let cfg = flags
        .cfg
        .clone()
        .ok_or_else(|| CliError::usage("--cfg is required"))?;
    let config = RunConfig {
        cfg,
        weights: weight_source(flags)?,
        size: flags.size,
        conf_thresh: flags.conf_thresh,
        nms_thresh: flags.nms_thresh,
        iou_thresh,
        ap_method,
        letterbox: flags.letterbox,
    };
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Inspect { cfg, size } => {
            print!("{}", cmd_inspect(&cfg, size)?);
            Ok(())
        }
        Command::Detect {
            network,
            out,
            image,
        } => {
            let config = run_config(&network, 0.25, darkgrid_core::eval::ApMethod::AllPoint)?;
            let (doc, _) = cmd_detect(&config, &image)?;
            match out {
                Some(path) => std::fs::write(path, doc)?,
                None => print!("{doc}"),
            }
            Ok(())
        }
        Command::Eval {
            network,
            iou_thresh,
            ap_method,
            detections_file,
            skip_missing,
            out,
            pr_out,
            pr_svg,
            json,
            images,
            annotations,
        } => {
            let ap_method = ap_method
                .parse::<darkgrid_core::eval::ApMethod>()
                .map_err(CliError::Usage)?;
            let source = match detections_file {
                Some(path) => EvalSource::Planted(path),
                None => EvalSource::Network(Box::new(run_config(&network, iou_thresh, ap_method)?)),
            };
            let args = EvalArgs {
                source,
                image_list: images,
                annotations,
                iou_thresh,
                ap_method,
                skip_missing,
                report_out: out.clone(),
                pr_out,
                pr_svg,
                json,
            };
            let (_, rendered) = cmd_eval(&args)?;
            if out.is_none() {
                print!("{rendered}");
            }
            Ok(())
        }
        Command::Compare { report_a, report_b } => {
            let (table, _) = cmd_compare(&report_a, &report_b)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
