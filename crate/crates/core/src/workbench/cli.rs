//! Command-line front end. Exit codes: 0 success, 2 input error,
//! 3 convergence failure, 4 partial results.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::commands::{self, Artifact, ModelContext, Outcome};
use super::experiments::load_experiments;
use super::fluid::load_fluid;
use super::run::{RunRecord, RECORD_FILE};
use crate::error::{Error, Result};
use crate::flash::Mixture;
use crate::metrics::MetricKind;
use crate::mixing::{GroupInteractionTable, KijOverride};
use crate::optimizer::Method;
use crate::saturation::Strategy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "phasefit", version, about = "Cubic-EOS phase behavior and k_ij calibration for CO2-oil systems")]
pub struct Cli {
    /// Fluid definition (TOML).
    #[arg(long, global = true)]
    pub fluid: Option<PathBuf>,
    /// Group interaction table (TOML); the bundled table is used otherwise.
    #[arg(long, global = true)]
    pub groups: Option<PathBuf>,
    /// Run directory for artifacts and the run record.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Fixed k_ij override, e.g. CO2:CH4=0.105. Repeatable.
    #[arg(long = "kij", value_name = "PAIR=VALUE", global = true)]
    pub kij: Vec<String>,
    #[arg(long, global = true, default_value = "mse")]
    pub metric: MetricKind,
    #[arg(long, global = true, default_value = "grid")]
    pub method: Method,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
pub enum Command {
    /// Group-contribution k_ij matrices.
    Kij {
        /// Temperatures in K, comma separated.
        #[arg(long = "temperature", short = 't', value_delimiter = ',', required = true)]
        temperatures: Vec<f64>,
    },
    /// Stability test and two-phase flash at one state.
    Flash {
        /// K.
        #[arg(long, short = 't')]
        temperature: f64,
        /// MPa.
        #[arg(long, short = 'p')]
        pressure: f64,
    },
    /// Saturation pressures along increasing CO2 loading.
    Envelope {
        /// K.
        #[arg(long, short = 't')]
        temperature: f64,
        /// CO2 mole fractions, comma separated.
        #[arg(long = "z-co2", value_delimiter = ',', conflicts_with = "z_range")]
        z_co2: Vec<f64>,
        /// Evenly spaced loadings as START:STOP:COUNT, ends included.
        #[arg(long = "z-range")]
        z_range: Option<String>,
        #[arg(long, default_value = "warm")]
        strategy: Strategy,
    },
    /// Calibrate one k_ij against measured saturation pressures.
    Fit {
        /// Experiment CSV.
        #[arg(long)]
        experiments: PathBuf,
        /// Isotherm in K; every isotherm in the file when omitted.
        #[arg(long, short = 't')]
        temperature: Option<f64>,
        /// Pair to calibrate.
        #[arg(long, default_value = "CO2:CH4")]
        pair: String,
    },
    /// Error metrics between two series files.
    Metrics {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        actual: PathBuf,
        /// Also export radar-chart values (MSE / 10, RMSLE x 10).
        #[arg(long)]
        spider: bool,
    },
    /// Re-run a recorded run and compare its artifacts.
    Replay {
        /// run.json or the directory holding it.
        record: PathBuf,
    },
}

pub fn exit_code_for(e: &Error) -> i32 {
    if e.is_convergence() {
        EXIT_CONVERGENCE
    } else {
        EXIT_INPUT
    }
}

/// Artifacts of one command plus how complete they are.
struct Produced {
    artifacts: Vec<Artifact>,
    /// Artifacts echoed to stdout when no run directory is given.
    primary: Vec<String>,
    outcome: Outcome,
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidInput(format!("--z-range expects START:STOP:COUNT, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![a]),
        // Rounded so decimal grids print as typed.
        _ => Ok((0..n)
            .map(|i| {
                let v = a + (b - a) * i as f64 / (n - 1) as f64;
                (v * 1e12).round() / 1e12
            })
            .collect()),
    }
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    let o: KijOverride = format!("{s}=0").parse()?;
    Ok((o.first, o.second))
}

impl Cli {
    fn context(&self) -> Result<ModelContext> {
        let table = match &self.groups {
            Some(p) => GroupInteractionTable::parse(&std::fs::read_to_string(p)?, &p.display().to_string())?,
            None => GroupInteractionTable::bundled(),
        };
        let overrides = self.kij.iter().map(|s| s.parse()).collect::<Result<Vec<KijOverride>>>()?;
        Ok(ModelContext {
            table: Arc::new(table),
            overrides,
        })
    }

    fn fluid(&self, ctx: &ModelContext) -> Result<Mixture> {
        let path = self
            .fluid
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("this command needs --fluid".into()))?;
        let f = load_fluid(path, &ctx.table)?;
        for w in &f.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        Ok(f.mixture)
    }

    /// Files whose content the run depends on.
    fn inputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = self.fluid.iter().chain(&self.groups).cloned().collect();
        match &self.command {
            Command::Fit { experiments, .. } => v.push(experiments.clone()),
            Command::Metrics { predicted, actual, .. } => {
                v.push(predicted.clone());
                v.push(actual.clone());
            }
            _ => {}
        }
        v
    }

    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Kij { .. } => "kij",
            Command::Flash { .. } => "flash",
            Command::Envelope { .. } => "envelope",
            Command::Fit { .. } => "fit",
            Command::Metrics { .. } => "metrics",
            Command::Replay { .. } => "replay",
        }
    }

    /// Copy with everything that does not affect outputs cleared.
    fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(c).expect("cli serializes")
    }

    fn produce(&self) -> Result<Produced> {
        let ctx = self.context()?;
        let done = |artifacts: Vec<Artifact>, primary: &[&str]| Produced {
            artifacts,
            primary: primary.iter().map(|s| s.to_string()).collect(),
            outcome: Outcome::Complete,
        };
        match &self.command {
            Command::Kij { temperatures } => {
                let fluid = self.fluid(&ctx)?;
                Ok(done(commands::cmd_kij(&fluid, temperatures, &ctx)?, &["kij.csv"]))
            }
            Command::Flash {
                temperature,
                pressure,
            } => {
                let fluid = self.fluid(&ctx)?;
                let a = commands::cmd_flash(&fluid, *temperature, *pressure, &ctx)?;
                Ok(done(a, &["flash.json"]))
            }
            Command::Envelope {
                temperature,
                z_co2,
                z_range,
                strategy,
            } => {
                let fluid = self.fluid(&ctx)?;
                let grid = match z_range {
                    Some(r) => parse_range(r)?,
                    None if !z_co2.is_empty() => z_co2.clone(),
                    None => return Err(Error::InvalidInput("give --z-co2 or --z-range".into())),
                };
                let e = commands::cmd_envelope(&fluid, *temperature, &grid, *strategy, &ctx)?;
                Ok(Produced {
                    artifacts: e.artifacts,
                    primary: vec!["envelope.csv".into()],
                    outcome: e.outcome,
                })
            }
            Command::Fit {
                experiments,
                temperature,
                pair,
            } => {
                let fluid = self.fluid(&ctx)?;
                let data = load_experiments(experiments)?;
                let pair = parse_pair(pair)?;
                let temps = match temperature {
                    Some(t) => vec![*t],
                    None => data.isotherms(),
                };
                let mut artifacts = Vec::new();
                let mut primary = Vec::new();
                let mut failed = Vec::new();
                let mut partial = false;
                for t in &temps {
                    match commands::cmd_fit(&fluid, &data, *t, self.method, self.metric, pair.clone(), &ctx) {
                        Ok(f) => {
                            partial |= f.result.best().is_some_and(|b| !b.failures.is_empty());
                            primary.push(f.artifacts[1].name.clone());
                            artifacts.extend(f.artifacts);
                        }
                        Err(e) if e.is_convergence() && temps.len() > 1 => {
                            eprintln!("error: fit at {t} K: {e}");
                            failed.push(*t);
                        }
                        Err(e) => return Err(e),
                    }
                }
                let outcome = if failed.len() == temps.len() {
                    Outcome::Failed
                } else if partial || !failed.is_empty() {
                    Outcome::Partial
                } else {
                    Outcome::Complete
                };
                Ok(Produced {
                    artifacts,
                    primary,
                    outcome,
                })
            }
            Command::Metrics {
                predicted,
                actual,
                spider,
            } => {
                let read = |p: &Path| -> Result<Vec<f64>> {
                    commands::parse_series(&std::fs::read_to_string(p)?, &p.display().to_string())
                };
                let (_, a) = commands::cmd_metrics(&read(predicted)?, &read(actual)?, *spider)?;
                let primary: Vec<&str> = if *spider {
                    vec!["metrics.json", "spider.csv"]
                } else {
                    vec!["metrics.json"]
                };
                Ok(done(a, &primary))
            }
            Command::Replay { .. } => unreachable!("replay is dispatched separately"),
        }
    }

    fn replay(&self, record: &Path) -> Result<i32> {
        let path = if record.is_dir() {
            record.join(RECORD_FILE)
        } else {
            record.to_path_buf()
        };
        let original = RunRecord::load(&path)?;
        let changed = original.changed_inputs();
        if !changed.is_empty() {
            return Err(Error::InvalidInput(format!(
                "inputs changed since the run: {}",
                changed.join(", ")
            )));
        }
        let mut cli: Cli = serde_json::from_value(original.config.clone())
            .map_err(|e| Error::InvalidInput(format!("unreadable run config: {e}")))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cli.out = Some(self.out.clone().unwrap_or_else(|| base.join("replay")));
        let code = cli.execute()?;
        let out = cli.out.as_ref().expect("set above");
        let rerun = RunRecord::load(&out.join(RECORD_FILE))?;
        let diff = original.output_mismatches(&rerun);
        if diff.is_empty() && code == original.exit_code {
            println!("replay of {} reproduced {} artifacts", original.run_id, rerun.outputs.len());
            Ok(EXIT_OK)
        } else {
            eprintln!("replay of {} differs: {}", original.run_id, diff.join(", "));
            Ok(EXIT_CONVERGENCE)
        }
    }

    /// Runs the command; errors are returned for the caller to report.
    pub fn execute(&self) -> Result<i32> {
        if let Command::Replay { record } = &self.command {
            return self.replay(record);
        }
        let mut record = RunRecord::start(self.command_name(), self.snapshot(), &self.inputs())?;
        let produced = self.produce()?;
        let code = match produced.outcome {
            Outcome::Complete => EXIT_OK,
            Outcome::Partial => EXIT_PARTIAL,
            Outcome::Failed => EXIT_CONVERGENCE,
        };
        let out = match (&self.out, &self.command) {
            (Some(o), _) => Some(o.clone()),
            (None, Command::Fit { .. }) => Some(PathBuf::from("runs").join(&record.run_id)),
            _ => None,
        };
        match out {
            Some(dir) => {
                let p = record.persist(&dir, &produced.artifacts, code)?;
                for name in &produced.primary {
                    if let Some(a) = produced.artifacts.iter().find(|a| &a.name == name) {
                        print!("{}", a.contents);
                    }
                }
                eprintln!("run {} written to {}", record.run_id, p.display());
            }
            None => {
                for name in &produced.primary {
                    if let Some(a) = produced.artifacts.iter().find(|a| &a.name == name) {
                        print!("{}", a.contents);
                    }
                }
            }
        }
        Ok(code)
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match cli.execute() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
