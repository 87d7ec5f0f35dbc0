use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use symbreak::experiment::{load_prepared, run_experiment, ExperimentConfig, ExperimentKind};
use symbreak::gradcheck::{moe_suite, network_suite};
use symbreak::report::{emit_reports, report_from_dir};
use symbreak::{selftest, Error, NetMode};

#[derive(Parser)]
#[command(name = "symbreak", version, about = "Asymmetric MLP ensembles and mixtures of experts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write results.csv, aggregate.csv and charts.
    Train {
        #[arg(value_enum)]
        kind: Kind,
        /// JSON config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Comma-separated widths.
        #[arg(long, value_delimiter = ',')]
        hidden_dim: Option<Vec<usize>>,
        /// Comma-separated ensemble sizes or expert counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', value_enum)]
        modes: Option<Vec<Mode>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild aggregate.csv and charts from <dir>/results.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Finite-difference check of network and mixture gradients.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        cases: u64,
    },
    /// Invariant checks on splitting, scaling, initialization and mixtures.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    DeepEnsemble,
    Moe,
    GgMoe,
    Moie,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mlp,
    Wmlp,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> symbreak::Result<bool> {
    match cli.command {
        Command::Train {
            kind,
            config,
            dataset,
            data_dir,
            hidden_dim,
            sizes,
            modes,
            reps,
            workers,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            cfg.kind = match kind {
                Kind::DeepEnsemble => ExperimentKind::DeepEnsemble,
                Kind::Moe => ExperimentKind::Moe,
                Kind::GgMoe => ExperimentKind::GgMoe,
                Kind::Moie => ExperimentKind::Moie,
            };
            if let Some(v) = dataset {
                cfg.dataset = v;
            }
            if let Some(v) = data_dir {
                cfg.data_dir = v;
            }
            if let Some(v) = hidden_dim {
                if cfg.kind == ExperimentKind::DeepEnsemble {
                    cfg.hidden_dims = v;
                } else {
                    let [h] = v[..] else {
                        return Err(Error::Config("mixtures take a single --hidden-dim".into()));
                    };
                    cfg.expert_hidden = h;
                }
            }
            if let Some(v) = sizes {
                cfg.sizes = v;
            }
            if let Some(v) = modes {
                cfg.modes = v
                    .into_iter()
                    .map(|m| match m {
                        Mode::Mlp => NetMode::Mlp,
                        Mode::Wmlp => NetMode::Wmlp,
                    })
                    .collect();
            }
            if let Some(v) = reps {
                cfg.repetitions = v;
            }
            if let Some(v) = workers {
                cfg.workers = v;
            }
            if let Some(v) = out {
                cfg.out_dir = v;
            }
            cfg.validate()?;
            let data = load_prepared(&cfg)?;
            eprintln!(
                "{}: {} train / {} val / {} test rows, {} features",
                data.name,
                data.train.x.rows(),
                data.val.x.rows(),
                data.test.x.rows(),
                data.in_features()
            );
            let results = run_experiment(&cfg, &data)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("config.json"), cfg.to_json()?)?;
            for p in emit_reports(&results, &cfg.out_dir)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Report { input } => {
            for p in report_from_dir(&input)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Gradcheck { cases } => {
            let mut ok = true;
            let per_combo = cases.div_ceil(8).max(1);
            for (label, r) in network_suite(cases)?.into_iter().chain(moe_suite(per_combo)?) {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {label}: {} params, max rel err {:.2e}",
                    r.checked, r.max_rel_err
                );
                ok &= r.passed();
            }
            Ok(ok)
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                if c.passed {
                    println!("PASS {}", c.name);
                } else {
                    println!("FAIL {}: {}", c.name, c.detail);
                }
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}
