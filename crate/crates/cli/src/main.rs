use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vamod::accountability::{group_gaps, Characteristic, DEFAULT_RANK_THRESHOLDS};
use vamod::cohort::Cohort;
use vamod::design::SpecName;
use vamod::io::{self, Comparison, GapPair, RunOptions};
use vamod::synth::{generate_cohort, SynthConfig};
use vamod::valueadded::run_pipeline;

#[derive(Parser)]
#[command(name = "vamod", version, about = "School value-added scores, bandings and comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check pupil and school files against the schemas and cohort rules.
    Validate(CohortFiles),
    /// Generate a synthetic cohort.
    Synth {
        /// Generator config (`key = value` lines); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit both models and write the report files.
    Run {
        #[command(flatten)]
        files: CohortFiles,
        #[arg(long)]
        out: PathBuf,
        /// Skip the shrinkage estimates.
        #[arg(long)]
        no_shrinkage: bool,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RANK_THRESHOLDS)]
        thresholds: Vec<usize>,
    },
    /// Compare two school score files: correlations, rank movement, bands.
    Compare {
        /// Run directory; reads its scores_base.csv and scores_adjusted.csv
        /// and writes the comparison there.
        #[arg(long, required_unless_present_all = ["a", "b"])]
        out: Option<PathBuf>,
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RANK_THRESHOLDS)]
        thresholds: Vec<usize>,
    },
    /// Progress by category of one pupil or school characteristic.
    Gaps {
        #[arg(long, value_parser = parse_characteristic)]
        characteristic: Characteristic,
        /// Run directory; its cohort copy is used unless files are given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "schools")]
        pupils: Option<PathBuf>,
        #[arg(long, requires = "pupils")]
        schools: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CohortFiles {
    #[arg(long)]
    pupils: PathBuf,
    #[arg(long)]
    schools: PathBuf,
}

fn parse_characteristic(s: &str) -> Result<Characteristic, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Characteristic::ALL.iter().map(|c| c.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

enum Failure {
    Usage(String),
    Lib(vamod::Error),
}

impl<E: Into<vamod::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Lib(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 1 })
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("VAMOD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("VAMOD_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(files) => {
            let cohort = io::load_cohort(&files.pupils, &files.schools)?;
            println!("ok: {} pupils in {} schools", cohort.len(), cohort.schools().len());
        }
        Command::Synth { config, seed, out } => {
            let mut cfg = match &config {
                Some(path) => io::read_config(path)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let cohort = generate_cohort(&cfg)?;
            create_dir(&out)?;
            io::write_cohort(&cohort, &out.join("pupils.csv"), &out.join("schools.csv"))?;
            io::write_config(&out.join("synth.cfg"), &cfg)?;
            println!(
                "wrote {} pupils in {} schools to {}",
                cohort.len(),
                cohort.schools().len(),
                out.display()
            );
        }
        Command::Run {
            files,
            out,
            no_shrinkage,
            thresholds,
        } => {
            let cohort = io::load_cohort(&files.pupils, &files.schools)?;
            let options = RunOptions {
                shrinkage: !no_shrinkage,
                thresholds,
            };
            let report = io::analyze(&cohort, &options)?;
            create_dir(&out)?;
            io::write_reports(&report, &cohort, &out)?;
            println!(
                "{} schools; r_squared base {:.4}, adjusted {:.4}; {} schools change band; reports in {}",
                report.schools.len(),
                report.base.fit.r_squared,
                report.adjusted.fit.r_squared,
                report.transitions.changed,
                out.display()
            );
        }
        Command::Compare { out, a, b, thresholds } => {
            let (a, b) = match (&a, &b, &out) {
                (Some(a), Some(b), _) => (a.clone(), b.clone()),
                (None, None, Some(dir)) => (dir.join("scores_base.csv"), dir.join("scores_adjusted.csv")),
                _ => return Err(Failure::Usage("give --out DIR or both --a and --b".into())),
            };
            let comparison = Comparison::from_files(&a, &b, &thresholds)?;
            if let Some(dir) = &out {
                io::write_comparison(dir, &comparison)?;
            }
            println!("{}", serde_json::to_string_pretty(&comparison.summary()).expect("json values serialise"));
        }
        Command::Gaps {
            characteristic,
            out,
            pupils,
            schools,
        } => {
            let cohort = match (pupils, schools) {
                (Some(p), Some(s)) => io::load_cohort(&p, &s)?,
                _ => {
                    let dir = out.join("cohort");
                    io::load_cohort(&dir.join("pupils.csv"), &dir.join("schools.csv"))?
                }
            };
            let gap = gap_pair(&cohort, characteristic)?;
            create_dir(&out)?;
            let path = out.join(format!("gaps_{characteristic}.csv"));
            io::write_gap_file(&path, &gap)?;
            for (spec, r) in [(SpecName::Base, &gap.base), (SpecName::Adjusted, &gap.adjusted)] {
                println!(
                    "{spec}: range {:.3} grades across {} categories, F({}, {}) = {:.3}, p = {:.4}",
                    r.range(),
                    r.categories.len(),
                    r.test.df1,
                    r.test.df2,
                    r.test.statistic,
                    r.test.p_value
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn gap_pair(cohort: &Cohort, characteristic: Characteristic) -> Result<GapPair, Failure> {
    let base = run_pipeline(cohort, SpecName::Base)?;
    let adjusted = run_pipeline(cohort, SpecName::Adjusted)?;
    Ok(GapPair {
        characteristic,
        base: group_gaps(&base.scores(), cohort, characteristic)?,
        adjusted: group_gaps(&adjusted.scores(), cohort, characteristic)?,
    })
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Lib(io::IoError::Io {
        path: dir.to_path_buf(),
        source: e,
    }.into()))
}
