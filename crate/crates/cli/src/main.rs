//! `jensen-chain`: generate, run, verify and fuzz Jensen refinement chains.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or configuration
//! error, 3 IO error.

mod args;
mod io;

use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;

use jensen_chain_core::fuzz::{self, aggregate, Evaluated, FuzzConfig};
use jensen_chain_core::{verify_record, Arithmetic, Error, Instance, RunRecord, VerifyReport};

use args::{Cli, Command, GenArgs, Mode};
use io::CliError;

const THREADS_VAR: &str = "JENSEN_CHAIN_THREADS";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_VAR) {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => builder = builder.num_threads(n),
            _ => return Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))),
        }
    }
    builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

/// Returns whether everything passed.
fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let pool = thread_pool()?;
    match cli.command {
        Command::Gen(a) => {
            let config = fuzz_config(&a.gen, a.count, Mode::Exact)?;
            let instances = fuzz::generate(&config)?;
            io::write_lines(a.out.as_deref(), &instances)?;
            Ok(true)
        }
        Command::Run(a) => {
            let instances: Vec<Instance> = io::read_lines(&a.input)?;
            let mode = Arithmetic::from(a.mode);
            if let Some(i) = instances.iter().find(|i| i.n_steps > a.max_steps) {
                let msg = format!("N = {} exceeds --max-steps {}", i.n_steps, a.max_steps);
                return Err(CliError::Instance(i.id.clone(), Error::Config(msg)));
            }
            let mut records = pool.install(|| {
                instances
                    .par_iter()
                    .map(|i| i.run(mode).map_err(|e| CliError::Instance(i.id.clone(), e)))
                    .collect::<Result<Vec<RunRecord>, CliError>>()
            })?;
            records.sort_by(|a, b| a.instance.id.cmp(&b.instance.id));
            io::write_lines(a.out.as_deref(), &records)?;
            Ok(records.iter().all(|r| r.ok))
        }
        Command::Verify(a) => {
            let records: Vec<RunRecord> = io::read_lines(&a.input)?;
            let mut reports: Vec<VerifyReport> = pool.install(|| records.par_iter().map(verify_record).collect());
            reports.sort_by(|a, b| a.id.cmp(&b.id));
            io::write_lines(a.out.as_deref(), &reports)?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Fuzz(a) => {
            let config = fuzz_config(&a.gen, a.trials, a.mode)?;
            let instances = fuzz::generate(&config)?;
            let results: Vec<Evaluated> =
                pool.install(|| instances.par_iter().map(|i| fuzz::evaluate(i, config.mode)).collect());
            let (report, rows) = aggregate(Some(&config), results);
            io::write_pretty(a.out.as_deref(), &report)?;
            if let Some(path) = &a.csv {
                io::write_csv(path, &rows)?;
            }
            Ok(report.pass)
        }
        Command::Report(a) => {
            let records: Vec<RunRecord> = io::read_lines(&a.input)?;
            let results: Vec<Evaluated> = pool.install(|| {
                records
                    .into_par_iter()
                    .map(|r| {
                        let report = verify_record(&r);
                        (Some(r), report)
                    })
                    .collect()
            });
            let (report, rows) = aggregate(None, results);
            io::write_pretty(a.out.as_deref(), &report)?;
            if let Some(path) = &a.csv {
                io::write_csv(path, &rows)?;
            }
            Ok(report.pass)
        }
    }
}

fn fuzz_config(g: &GenArgs, trials: usize, mode: Mode) -> Result<FuzzConfig, CliError> {
    let defaults = FuzzConfig::default();
    let (mut n_lo, mut n_hi) = (*defaults.n_range.start(), *defaults.n_range.end());
    if let Some(n) = g.n {
        (n_lo, n_hi) = (n, n);
    }
    n_lo = g.n_min.unwrap_or(n_lo);
    n_hi = g.n_max.unwrap_or(n_hi);
    let steps = match g.steps {
        Some(k) => k..=k,
        None => defaults.steps_range.clone(),
    };
    let config = FuzzConfig {
        seed: g.seed,
        trials,
        n_range: n_lo..=n_hi,
        steps_range: steps,
        catalog: if g.catalog.is_empty() { defaults.catalog } else { g.catalog.clone() },
        families: if g.family.is_empty() { defaults.families } else { g.family.clone() },
        denominator_max: g.denominator_max,
        mode: mode.into(),
    };
    config.validate()?;
    Ok(config)
}
