use clap::{Args, Parser, Subcommand};
use mhd2d::runner::refine::{default_levels, RefineLevel};
use mhd2d::runner::{refine_study, run, ScenarioConfig};
use mhd2d::vacuum::VacuumMode;
use mhd2d::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mhd2d", version, about = "Free-interface incompressible MHD in 2D")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the energy CSV, step JSON and dumps.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run the identity suite described by a JSON file.
    Verify {
        #[arg(long)]
        suite: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario at several resolutions and print observed orders.
    Refine {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// JSON list of levels `{plasma: {radial, angular}, vacuum: {...}, dt}`.
        #[arg(long)]
        resolutions: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
    },
}

/// Command-line values that replace the matching config fields.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    report_every: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    vacuum_mode: Option<VacuumMode>,
    #[arg(long)]
    dump_final: bool,
}

fn parse_mode(s: &str) -> std::result::Result<VacuumMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.output.dir = Some(v.clone());
        }
        if let Some(v) = self.report_every {
            cfg.checks.report_every = v;
        }
        if let Some(v) = self.vacuum_mode {
            cfg.vacuum_mode = v;
        }
        if self.dump_final {
            cfg.output.dump_final = true;
        }
    }
}

fn load(path: &PathBuf, over: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    over.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, over } => {
            let cfg = load(&config, &over)?;
            let r = run(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&r.summary).map_err(|e| Error::Parse(e.to_string()))?
            );
        }
        Cmd::Verify { suite, out, seed } => {
            let mut s = mhd2d::verifier::SuiteConfig::load(&suite)?;
            if let Some(v) = seed {
                s.seed = v;
            }
            let rep = mhd2d::verifier::run_suite(&s)?;
            print!("{}", mhd2d::verifier::format_table(&rep.reports));
            let text = serde_json::to_string_pretty(&rep.reports).map_err(|e| Error::Parse(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
            if !rep.passed() {
                return Err(Error::Invariant(format!(
                    "{} hard check(s) failed: {}",
                    rep.failures.len(),
                    rep.failures.join(", ")
                )));
            }
        }
        Cmd::Refine {
            config,
            levels,
            resolutions,
            over,
        } => {
            let cfg = load(&config, &over)?;
            let lv: Vec<RefineLevel> = match resolutions {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Parse(e.to_string()))?,
                None => default_levels(&cfg, levels)?,
            };
            let t = refine_study(&cfg, &lv)?;
            print!("{}", t.to_text());
            if let Some(dir) = &cfg.output.dir {
                std::fs::create_dir_all(dir)?;
                let text = serde_json::to_string_pretty(&t).map_err(|e| Error::Parse(e.to_string()))?;
                std::fs::write(dir.join("refine.json"), text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
