use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use surfel_depth::pipeline::{
    check_jacobians, eval_pfm, format_bench_csv, run, synth_bench, write_synthetic_dataset, RunConfig, Source,
};

/// Environment variable selecting the worker thread count.
const THREADS_ENV: &str = "SURFEL_DEPTH_THREADS";

#[derive(Parser)]
#[command(
    name = "surfel-depth",
    version,
    about = "Dense monocular depth from photometrically optimized surfels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a dataset directory or a synthetic scene.
    Run(RunArgs),
    /// Render a synthetic scene into the dataset layout.
    Synth(RunArgs),
    /// Sweep surfel radii with the normal Jacobian on and off.
    SynthBench {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated surfel radii in pixels.
        #[arg(long, value_delimiter = ',', default_value = "5,10,12")]
        radii: Vec<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare analytic Jacobians with finite differences.
    CheckJacobians {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Score an inverse-depth PFM against a reference PFM.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (images/, calibration.txt, trajectory.txt).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Synthetic scene: fronto, slanted, desk or corridor.
    #[arg(long)]
    scene: Option<String>,
    /// Synthetic trajectory: strafe, dolly, rotate or diagonal.
    #[arg(long)]
    trajectory: Option<String>,
    #[arg(long)]
    frames: Option<usize>,
    /// Surfel radius in pixels.
    #[arg(long)]
    radius: Option<f64>,
    /// Estimate normals (on) or only depth (off).
    #[arg(long)]
    normals: Option<String>,
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    export_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Any other setting, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let path_str = |p: &PathBuf| p.display().to_string();
        if let Some(v) = &self.dataset {
            flags.push(("dataset", path_str(v)));
        }
        if let Some(v) = &self.scene {
            flags.push(("scene", v.clone()));
        }
        if let Some(v) = &self.trajectory {
            flags.push(("trajectory", v.clone()));
        }
        if let Some(v) = self.frames {
            flags.push(("frames", v.to_string()));
        }
        if let Some(v) = self.radius {
            flags.push(("radius", v.to_string()));
        }
        if let Some(v) = &self.normals {
            flags.push(("normals", v.clone()));
        }
        if let Some(v) = self.window_size {
            flags.push(("window_size", v.to_string()));
        }
        if let Some(v) = self.export_every {
            flags.push(("export_every", v.to_string()));
        }
        if let Some(v) = self.seed {
            flags.push(("seed", v.to_string()));
        }
        if let Some(v) = &self.output {
            flags.push(("output", path_str(v)));
        }
        for (k, v) in flags {
            cfg.set(k, &v)?;
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a thread count, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let summary = run(&cfg)?;
            println!("frames: {}", summary.records.len());
            println!("keyframes: {}", summary.keyframes);
            if let Some(last) = summary.records.last() {
                println!("surfels: {}", last.surfels);
            }
            if let Some(m) = summary.final_metrics {
                println!("mean relative depth error: {:.6}", m.mean_rel_depth_error);
                println!("inverse depth rmse: {:.6}", m.inv_depth_rmse);
                if let Some(n) = m.mean_normal_error_deg {
                    println!("mean normal error (deg): {n:.4}");
                }
                println!("coverage: {:.4}", m.coverage);
            }
            if let Some(dir) = &cfg.output_dir {
                println!("artifacts: {}", dir.display());
            }
            Ok(true)
        }
        Command::Synth(args) => {
            let cfg = args.config()?;
            let Source::Synthetic(spec) = &cfg.source else {
                bail!("synth renders a synthetic scene; drop --dataset");
            };
            let Some(out) = &cfg.output_dir else {
                bail!("synth needs --output");
            };
            let written = write_synthetic_dataset(spec, cfg.seed, out)?;
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(true)
        }
        Command::SynthBench { run, radii, csv } => {
            let cfg = run.config()?;
            let rows = synth_bench(&cfg, &radii)?;
            let text = format_bench_csv(&rows);
            match csv {
                Some(path) => std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::CheckJacobians { seed, trials } => {
            let report = check_jacobians(seed, trials)?;
            println!("trials: {}", report.trials);
            println!(
                "max inverse-depth jacobian error: {:.3e}",
                report.max_inverse_depth_error
            );
            println!("max cost gradient error: {:.3e}", report.max_cost_gradient_error);
            println!("failures: {}", report.failures);
            Ok(report.passed())
        }
        Command::Eval { estimate, truth } => {
            let m = eval_pfm(&estimate, &truth)?;
            println!("joint pixels: {}", m.joint_pixels);
            println!("coverage: {:.6}", m.coverage);
            println!("inverse depth rmse: {:.6e}", m.inv_depth_rmse);
            println!("mean relative depth error: {:.6e}", m.mean_rel_depth_error);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| execute(cli));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
