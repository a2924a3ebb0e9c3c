use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cgfem::experiment::{run_suite, to_csv, ExperimentConfig, MeshChoice};
use cgfem::plot::emit_plots;
use cgfem::spaces::Method;
use clap::{Args, Parser, Subcommand};

/// Condensed GFEM experiment driver.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth Neumann problem u = exp(2x + y) on the unit square.
    Smooth(SuiteArgs),
    /// Poisson crack problem on [-1, 1]^2 with a slit ending at the origin.
    Crack(SuiteArgs),
    /// SVG and gnuplot output from a results CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, env = "CGFEM_OUT", default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SuiteArgs {
    /// Comma-separated subset of fem, ftgfem, sgfem, cgfem, crack_gfem.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Polynomial degrees (smooth suite only).
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<u32>>,
    /// uniform and/or perturbed (smooth suite only).
    #[arg(long, value_delimiter = ',')]
    mesh: Option<Vec<MeshChoice>>,
    /// Divisions N (smooth) or levels j with n = 2^(j+1) + 1 (crack).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Flat-top width parameter.
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Flat-top exponent.
    #[arg(long = "ft-l", default_value_t = 1)]
    ft_l: u32,
    /// Half side of the singular enrichment square.
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    /// Seed of the mesh perturbation.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Node perturbation as a fraction of h.
    #[arg(long, default_value_t = 0.1)]
    perturbation: f64,
    /// Tip refinement depths: ASSEMBLY[,ERROR].
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    tip_depth: Option<Vec<usize>>,
    /// Skip the scaled condition number.
    #[arg(long)]
    no_scn: bool,
    /// Write zero timings so the CSV depends only on the configuration.
    #[arg(long)]
    no_timings: bool,
    /// Output directory.
    #[arg(long, env = "CGFEM_OUT", default_value = "results")]
    out: PathBuf,
}

impl SuiteArgs {
    fn config(&self, mut c: ExperimentConfig) -> ExperimentConfig {
        if let Some(m) = &self.methods {
            c.methods = m.clone();
        }
        if let Some(d) = &self.degrees {
            c.degrees = d.clone();
        }
        if let Some(m) = &self.mesh {
            c.meshes = m.clone();
        }
        if let Some(s) = &self.sizes {
            c.sizes = s.clone();
        }
        c.sigma = self.sigma;
        c.ft_exponent = self.ft_l;
        c.radius = self.radius;
        c.seed = self.seed;
        c.perturbation = self.perturbation;
        if let Some(d) = &self.tip_depth {
            c.quadrature.tip_depth_assembly = d[0];
            c.quadrature.tip_depth_error = *d.get(1).unwrap_or(&d[0].max(c.quadrature.tip_depth_error));
        }
        c.scn = !self.no_scn;
        c.timings = !self.no_timings;
        c
    }
}

fn run(args: &SuiteArgs, config: ExperimentConfig) -> Result<bool> {
    let name = config.suite.to_string();
    let records = run_suite(&config)?;
    let csv = to_csv(&records);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(format!("{name}.csv"));
    fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    for line in csv.lines().filter(|l| l.starts_with("#slope,") || l.starts_with("#error,")) {
        println!("{line}");
    }
    println!("wrote {}", path.display());
    Ok(records.iter().all(|r| r.error.is_none()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Smooth(a) => run(a, a.config(ExperimentConfig::smooth())),
        Command::Crack(a) => {
            if a.degrees.as_ref().is_some_and(|d| d != &[1]) {
                Err(anyhow::anyhow!("the crack suite is degree 1 only"))
            } else if a.mesh.as_ref().is_some_and(|m| m.contains(&MeshChoice::Perturbed)) {
                Err(anyhow::anyhow!("perturbed meshes are only used by the smooth suite"))
            } else {
                run(a, a.config(ExperimentConfig::crack()))
            }
        }
        Command::Plot { csv, out } => plot(csv, out).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn plot(csv: &Path, out: &Path) -> Result<()> {
    if !csv.exists() {
        bail!("{} does not exist", csv.display());
    }
    let (files, skipped) = emit_plots(csv, out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    if !skipped.is_empty() {
        println!("skipped {} malformed row(s)", skipped.len());
    }
    Ok(())
}
