use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use probekit::extract::{bootstrap_uncertainty, BootstrapConfig};
use probekit::fit::{fit_histogram, goodness_of_fit};
use probekit_cli::config::PipelineConfig;
use probekit_cli::format::read_histogram;
use probekit_cli::output::{emit_outputs, g9};
use probekit_cli::pipeline::{bootstrap_seed, collect_inputs, run_pipeline, PipelineOutput};
use probekit_cli::simulate::{simulate_dataset, SimulationConfig};

#[derive(Parser)]
#[command(name = "probekit", version, about = "Quantum-dot decay analysis and LDOS maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic campaign of decay histograms
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e6)]
        photons: f64,
        #[arg(long, default_value_t = 88)]
        n_crystal: usize,
        #[arg(long, default_value_t = 5)]
        n_reference: usize,
        #[arg(long, default_value_t = 1000)]
        bins: usize,
        #[arg(long, default_value_t = 1e-4)]
        background_fraction: f64,
    },
    /// Fit one histogram
    Fit {
        file: PathBuf,
    },
    /// Fit one histogram and extract its rates
    Extract {
        file: PathBuf,
        #[command(flatten)]
        opts: PipelineArgs,
    },
    /// Run the full pipeline and write rates, map, comparison and summary
    Map {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: PipelineArgs,
    },
    /// Run the pipeline and print extracted versus naive inhibition
    Compare {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: PipelineArgs,
    },
}

/// Command-line overrides of the configuration file.
#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rep_period: Option<f64>,
    /// "lo,hi" in nm
    #[arg(long)]
    wavelength_window: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n_index: Option<f64>,
    #[arg(long)]
    n_boot: Option<usize>,
    /// "lo,hi" in a/lambda
    #[arg(long)]
    gap_window: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    overlay_x: Option<PathBuf>,
    #[arg(long)]
    overlay_y: Option<PathBuf>,
    #[arg(long)]
    overlay_scale: Option<f64>,
    #[arg(long)]
    overlay_offset: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl PipelineArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let cwd = std::path::Path::new(".");
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v, cwd));
        set("rep_period", self.rep_period.map(|v| v.to_string()))?;
        set("wavelength_window", self.wavelength_window.clone())?;
        set("beta", self.beta.map(|v| v.to_string()))?;
        set("n_index", self.n_index.map(|v| v.to_string()))?;
        set("n_boot", self.n_boot.map(|v| v.to_string()))?;
        set("gap_window", self.gap_window.clone())?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("overlay_x", self.overlay_x.as_ref().map(|p| p.display().to_string()))?;
        set("overlay_y", self.overlay_y.as_ref().map(|p| p.display().to_string()))?;
        set("overlay_scale", self.overlay_scale.map(|v| v.to_string()))?;
        set("overlay_offset", self.overlay_offset.map(|v| v.to_string()))?;
        set("jobs", self.jobs.map(|v| v.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn pipeline(inputs: &[PathBuf], opts: &PipelineArgs) -> anyhow::Result<PipelineOutput> {
    let cfg = opts.resolve()?;
    let files = collect_inputs(inputs)?;
    if files.is_empty() {
        anyhow::bail!("no input histograms");
    }
    run_pipeline(&cfg, &files)
}

fn report_quarantine(out: &PipelineOutput) -> ExitCode {
    for q in &out.quarantine {
        eprintln!("quarantined {}: {}", q.path.display(), q.reason);
    }
    if out.quarantine.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            out,
            seed,
            photons,
            n_crystal,
            n_reference,
            bins,
            background_fraction,
        } => {
            let cfg = SimulationConfig {
                n_crystal,
                n_reference,
                photons,
                n_bins: bins,
                background_fraction,
                seed,
            };
            let dots = simulate_dataset(&cfg, &out)?;
            println!("wrote {} histograms to {}", dots.len(), out.join("curves").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { file } => {
            let f = read_histogram(&file).with_context(|| file.display().to_string())?;
            let fit = fit_histogram(&f.hist)?;
            let gof = goodness_of_fit(&f.hist, &fit);
            let se = fit.std_errors();
            let p = fit.params().to_array();
            println!("id = {}", f.meta.id);
            for (k, name) in ["gamma_f", "gamma_s", "a_f", "a_s", "background"].iter().enumerate() {
                println!("{name} = {} +- {}", g9(p[k]), g9(se[k]));
            }
            println!("nll = {}", g9(fit.nll));
            println!("converged = {} ({} iterations)", fit.converged, fit.n_iter);
            println!("reduced_chi2 = {} (dof {})", g9(gof.reduced_chi2), gof.dof);
            for w in &fit.warnings {
                println!("warning: {w}");
            }
            if gof.lack_of_fit {
                println!("warning: lack-of-fit");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract { file, opts } => {
            let cfg = opts.resolve()?;
            let f = read_histogram(&file).with_context(|| file.display().to_string())?;
            let tau = cfg.rep_period.unwrap_or(f.meta.rep_period);
            let fit = fit_histogram(&f.hist)?;
            let boot = BootstrapConfig {
                n_boot: cfg.n_boot,
                seed: bootstrap_seed(cfg.seed, &f.meta.id),
                beta: cfg.beta,
            };
            let rates = bootstrap_uncertainty(&f.hist, &fit, tau, &boot)?;
            println!("id = {}", f.meta.id);
            let vals = [rates.gamma_rad, rates.gamma_nrad, rates.gamma_db];
            for (k, name) in ["gamma_rad", "gamma_nrad", "gamma_db"].iter().enumerate() {
                let ci = rates.ci.map(|c| [c.gamma_rad, c.gamma_nrad, c.gamma_db][k]);
                match ci {
                    Some(ci) => println!("{name} = {} [{}, {}]", g9(vals[k]), g9(ci.lo), g9(ci.hi)),
                    None => println!("{name} = {}", g9(vals[k])),
                }
            }
            println!("naive_rate = {}", g9(fit.solution.gamma_f));
            for flag in &rates.flags {
                println!("flag: {flag}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Map { inputs, out, opts } => {
            let result = pipeline(&inputs, &opts)?;
            for p in emit_outputs(&result, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(report_quarantine(&result))
        }
        Command::Compare { inputs, out, opts } => {
            let result = pipeline(&inputs, &opts)?;
            let Some(m) = &result.map else {
                anyhow::bail!("comparison needs reference and in-crystal curves");
            };
            println!("id,dipole,norm_freq,inhibition_extracted,inhibition_naive");
            for c in &m.comparison {
                println!("{},{},{},{},{}", c.id, c.dipole, g9(c.norm_freq), g9(c.extracted), g9(c.naive));
            }
            if let Some(dir) = out {
                emit_outputs(&result, &dir)?;
            }
            Ok(report_quarantine(&result))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
