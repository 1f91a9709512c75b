use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hallkit::harness::{self, ExperimentConfig};
use hallkit::spectra::EigenCache;
use hallkit::{Error, Result};

#[derive(Parser)]
#[command(name = "hallkit", version, about = "Hall conductance of lattice fermions by exact diagonalization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// key=value overrides, e.g. experiment.grid=12
        overrides: Vec<String>,
    },
    /// Check a config without solving anything.
    Validate { config: PathBuf, overrides: Vec<String> },
    /// Inspect or clear the eigendecomposition cache ($HALLKIT_CACHE_DIR).
    Cache {
        #[command(subcommand)]
        action: CacheCmd,
    },
    /// Pretty-print a report.json (or the one inside a run directory).
    Report { path: PathBuf },
}

#[derive(Subcommand)]
enum CacheCmd {
    Inspect,
    Clear,
}

fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text, overrides)
}

fn fail(err: &Error, out_dir: Option<&Path>) -> ExitCode {
    if let Some(d) = out_dir {
        harness::write_error(d, err);
    }
    eprint!("{}", harness::error_json(err));
    ExitCode::from(err.exit_code() as u8)
}

fn cmd_run(config: &Path, overrides: &[String]) -> ExitCode {
    let cfg = match load(config, overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    let out = PathBuf::from(&cfg.output.dir);
    let outcome = match harness::run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e, Some(&out)),
    };
    let c = &outcome.manifest.cache;
    println!(
        "wrote {} to {} (cache hits {}, misses {}, spot checks {})",
        outcome.files.join(", "),
        outcome.out_dir.display(),
        c.hits,
        c.misses,
        c.spot_checks
    );
    for w in &outcome.report.warnings {
        eprintln!("warning: {w}");
    }
    match outcome.check() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, Some(&out)),
    }
}

fn cmd_validate(config: &Path, overrides: &[String]) -> ExitCode {
    let cfg = match load(config, overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    let d = harness::validate(&cfg);
    match serde_json::to_string_pretty(&d.items) {
        Ok(s) => println!("{s}"),
        Err(e) => return fail(&e.into(), None),
    }
    if d.has_errors() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_cache(action: &CacheCmd) -> Result<()> {
    let cache = EigenCache::new(EigenCache::default_root());
    match action {
        CacheCmd::Inspect => {
            let entries = cache.entries()?;
            let bytes: u64 = entries.iter().map(|(_, b)| b).sum();
            println!("{}: {} entries, {} bytes", cache.root().display(), entries.len(), bytes);
            for (name, b) in entries {
                println!("{name}  {b}");
            }
        }
        CacheCmd::Clear => {
            let n = cache.clear()?;
            println!("removed {n} entries from {}", cache.root().display());
        }
    }
    Ok(())
}

fn cmd_report(path: &Path) -> Result<()> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Run { config, overrides } => cmd_run(config, overrides),
        Cmd::Validate { config, overrides } => cmd_validate(config, overrides),
        Cmd::Cache { action } => match cmd_cache(action) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e, None),
        },
        Cmd::Report { path } => match cmd_report(path) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e, None),
        },
    }
}
