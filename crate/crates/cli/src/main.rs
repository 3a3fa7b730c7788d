use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swapattn::report::sig;
use swapattn::{Error, Result};
use swapattn_cli::commands::*;
use swapattn_cli::config::RunConfig;
use swapattn_cli::exit;

#[derive(Parser)]
#[command(name = "swapattn", version, about = "Swap-test attention phase recognition on cluster-Ising chains")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training and experiment seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SWAPATTN_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the parameter grid and write the dataset manifest.
    Gen,
    /// Train on a random subset of the dataset.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Training-set size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Predict every grid point and report held-out accuracy.
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Dump the attention matrix at one parameter point.
    Attention {
        #[arg(long, allow_hyphen_values = true)]
        h1: f64,
        #[arg(long, allow_hyphen_values = true)]
        h2: f64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Estimate each entry from this many swap-test shots.
        #[arg(long)]
        shots: Option<u64>,
        /// Simulate the ancilla circuit instead of the direct overlap.
        #[arg(long)]
        circuit: bool,
    },
    /// Contrast and correlation-length sweep at fixed h1.
    Analyze {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export the string-order grid, labels and boundary points.
    PhaseDiagram {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Accuracy versus training-set size over repeated random draws.
    AccuracyCurve {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the effective configuration and its digest.
    Config,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
        cfg.accuracy.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    match &cli.command {
        Command::Train { size: Some(n), .. } => cfg.train_size = *n,
        Command::Attention { shots, circuit, .. } => {
            if shots.is_some() {
                cfg.attention.shots = *shots;
            }
            cfg.attention.circuit |= *circuit;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if let Some(j) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Command::Config = cli.command {
        print!("# digest = \"{}\"\n{}", cfg.digest(), cfg.to_toml()?);
        return Ok(());
    }
    let ctx = Context::new(cfg)?;
    println!("config digest {}", ctx.digest);
    match &cli.command {
        Command::Gen => {
            let s = cmd_gen(&ctx)?;
            println!("wrote {} ({} records)", s.manifest.display(), s.records);
            println!(
                "labels: AFM {}, SPT {}, PM {}",
                s.label_counts[0], s.label_counts[1], s.label_counts[2]
            );
            let b: Vec<String> = s.row_boundaries.iter().map(|x| format!("{x:.4}")).collect();
            println!("boundaries along h2 at h1 = {:.4}: [{}]", s.row_h1, b.join(", "));
        }
        Command::Train { manifest, .. } => {
            let s = cmd_train(&ctx, manifest.as_deref(), ctx.cfg.train_size)?;
            println!(
                "wrote {} (loss {} -> {})",
                s.checkpoint.display(),
                sig(s.initial_loss, 6),
                sig(s.final_loss, 6)
            );
        }
        Command::Eval { manifest, checkpoint } => {
            let s = cmd_eval(&ctx, manifest.as_deref(), checkpoint.as_deref())?;
            println!(
                "held-out accuracy {:.4} over {} points (all points {:.4})",
                s.held_out_accuracy, s.held_out, s.overall_accuracy
            );
        }
        Command::Attention { h1, h2, checkpoint, .. } => {
            let s = cmd_attention(&ctx, checkpoint.as_deref(), *h1, *h2)?;
            println!(
                "wrote {} and {} (label {}, min off-diagonal {:.4})",
                s.csv.display(),
                s.json.display(),
                s.label,
                s.min_off_diagonal()
            );
        }
        Command::Analyze { checkpoint } => {
            let s = cmd_analyze(&ctx, checkpoint.as_deref())?;
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
            println!("sweep at h1 = {:.4}, {} points", s.h1, s.points.len());
            println!("energy-curvature boundaries: [{}]", fmt(&s.boundaries));
            println!("contrast sign changes: [{}]", fmt(&s.contrast_sign_changes));
            for &k in &s.representative {
                let p = &s.points[k];
                if let Some(f) = &p.profile {
                    println!(
                        "h2 = {:+.3} ({}): xi = {}{}",
                        p.record.h2,
                        p.record.label,
                        sig(f.xi, 4),
                        if f.non_decaying { " (non-decaying)" } else { "" }
                    );
                }
            }
        }
        Command::PhaseDiagram { manifest } => {
            let s = cmd_phase_diagram(&ctx, manifest.as_deref())?;
            println!("{} grid rows, {} boundary points", s.rows, s.boundary_points);
        }
        Command::AccuracyCurve { manifest } => {
            let t = cmd_accuracy_curve(&ctx, manifest.as_deref())?;
            for s in &t.summary {
                println!(
                    "size {:>4}: mean {:.4} ± {:.4} (std {:.4}, {} failed)",
                    s.size, s.mean, s.ci95, s.std, s.failed
                );
            }
        }
        Command::Config => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(exit::code_for(&e) as u8)
        }
    }
}
