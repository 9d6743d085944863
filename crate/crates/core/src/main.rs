use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use highrise::config::{Overrides, ScenarioConfig, Seeds};
use highrise::experiment;
use highrise::Error;

#[derive(Parser)]
#[command(name = "highrise", version, about = "Ray-traced BS-to-vehicle links in statistical high-rise cities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed_city: Option<u64>,
    #[arg(long)]
    seed_ue: Option<u64>,
    /// Carrier in GHz: 4.6, 8.2, 15 or 28.
    #[arg(long)]
    band: Option<f64>,
    /// BS density per km^2 (overrides the configured ISD).
    #[arg(long)]
    density: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one city layout and print its statistics.
    GenCity(Common),
    /// Evaluate one band at one density.
    Run(Common),
    /// Coverage of every configured band across the configured densities.
    SweepDensity(Common),
    /// Quantiles and band gaps of metrics files written by `run`.
    Report {
        /// metrics.csv files or run output directories.
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Element and array gain pattern of the BS antenna.
    DumpPattern(Common),
    /// Retained paths of realization 0.
    DumpPaths {
        #[command(flatten)]
        common: Common,
        /// Only this UE.
        #[arg(long)]
        ue: Option<usize>,
        /// Also write one CIR file per link.
        #[arg(long)]
        cir: bool,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed_city: self.seed_city,
            seed_ue: self.seed_ue,
            band_ghz: self.band,
            density: self.density,
            output_dir: self.out.clone(),
        }
    }

    fn load(&self) -> highrise::Result<ScenarioConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("--config is required".into()))?;
        let mut cfg = ScenarioConfig::load(path)?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnsupportedBand(_) => 2,
        _ => 3,
    }
}

fn execute(cmd: Command) -> highrise::Result<()> {
    match cmd {
        Command::GenCity(c) => {
            let cfg = match &c.config {
                Some(_) => c.load()?,
                None => {
                    let seed = c
                        .seed_city
                        .ok_or_else(|| Error::Config("gen-city needs --config or --seed-city".into()))?;
                    let mut cfg = ScenarioConfig::desk(Seeds {
                        city: seed,
                        ue: 0,
                        drop_excess: 0,
                    });
                    cfg.area_km = 1.2;
                    cfg.apply(&c.overrides())?;
                    cfg
                }
            };
            let (layout, stats, path) = experiment::gen_city(&cfg)?;
            println!("wrote {}", path.display());
            println!("side_km          {}", layout.side_km);
            println!("street_m         {:.3}", layout.street_width_m);
            println!("buildings        {}", stats.n_buildings);
            println!("alpha            {:.4} (target {})", stats.achieved_alpha, cfg.city.alpha0);
            println!("beta_per_km2     {:.2} (target {})", stats.achieved_beta, cfg.city.beta0);
            println!("height_ks        {:.4} (p = {:.4})", stats.height_ks_stat, stats.height_ks_p_value);
        }
        Command::Run(c) => {
            let cfg = c.load()?;
            let s = experiment::run(&cfg, c.workers)?;
            let outage = s.samples.iter().filter(|x| x.serving_bs.is_none()).count();
            println!(
                "band {} GHz, ISD {} m: {} samples, {} in outage, coverage(SINR > {} dB) = {:.4}",
                s.band.ghz(),
                s.isd_m,
                s.samples.len(),
                outage,
                cfg.gamma_th_db,
                s.coverage
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::SweepDensity(c) => {
            let cfg = c.load()?;
            let (points, path) = experiment::sweep_density(&cfg, c.workers)?;
            println!("{:>10} {:>8} {:>8} {:>9}", "bs_per_km2", "isd_m", "band", "coverage");
            for p in &points {
                println!("{:>10} {:>8} {:>8} {:>9.4}", p.bs_per_km2, p.isd_m, p.band_ghz, p.coverage);
            }
            println!("wrote {}", path.display());
        }
        Command::Report { inputs, out } => {
            let (_, text, path) = experiment::report(&inputs, &out)?;
            print!("{text}");
            println!("wrote {}", path.display());
        }
        Command::DumpPattern(c) => {
            let cfg = c.load()?;
            for f in experiment::dump_pattern(&cfg)? {
                println!("wrote {}", f.display());
            }
        }
        Command::DumpPaths { common, ue, cir } => {
            let cfg = common.load()?;
            let files = experiment::dump_paths(&cfg, ue, cir, common.workers)?;
            println!("wrote {} files into {}", files.len(), cfg.output_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
