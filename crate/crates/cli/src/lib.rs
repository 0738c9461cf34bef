//! The `regsens` command line.

pub mod args;
pub mod render;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::Path;

use regsens_core::moments::summarize;
use regsens_core::oracle::{random_dgp, sample_dataset, DgpDims, FullDgp};
use regsens_core::Error;
use serde::Serialize;

pub use args::{Cli, Command};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_SUITE: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("property suites failed")]
    SuiteFailure,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Core(_) => EXIT_NUMERIC,
            CliError::Write { .. } => EXIT_INPUT,
            CliError::SuiteFailure => EXIT_SUITE,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

/// Print the table or JSON and, with `--out`, write both to disk.
fn emit<T: Serialize>(
    out: &mut dyn Write,
    report: &T,
    table: String,
    opts: &args::OutputArgs,
) -> Result<String, CliError> {
    let json = to_json(report);
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.display().to_string(),
            source,
        })?;
        write_file(dir, "report.json", &json)?;
        write_file(dir, "report.txt", &table)?;
    }
    let shown = if opts.json { &json } else { &table };
    out.write_all(shown.as_bytes())
        .map_err(|source| CliError::Write {
            path: "stdout".into(),
            source,
        })?;
    Ok(json)
}

/// Run one command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Breakdown(a) => {
            let l = report::load(&a.input)?;
            let r = report::build_breakdown(&l, &a.input.r2long, &a.m)?;
            emit(out, &r, render::breakdown_table(&r), &a.output)?;
        }
        Command::Idset(a) => {
            let l = report::load(&a.input)?;
            let range = match a.b_range.as_deref() {
                None => None,
                Some(&[lo, hi]) if lo < hi && lo.is_finite() && hi.is_finite() => Some((lo, hi)),
                Some(v) => {
                    return Err(Error::InvalidArgument(format!(
                        "--b-range needs finite lo,hi with lo < hi, got {v:?}"
                    ))
                    .into())
                }
            };
            let r = report::build_idset(&l, &a.input.r2long, &a.delta, range, a.curve_points)?;
            emit(out, &r, render::idset_table(&r), &a.output)?;
            if let Some(dir) = &a.output.out {
                for (i, rule) in r.rules.iter().enumerate() {
                    write_file(
                        dir,
                        &format!("curve_{i}.csv"),
                        &render::curve_csv(&rule.curve),
                    )?;
                    if a.svg {
                        let title = format!(
                            "δ(b), R²_long = {} ({})",
                            render::num(rule.rule.r2long),
                            rule.rule.rule
                        );
                        let svg = render::curve_svg(&rule.curve, r.summary.beta_med, &title);
                        write_file(dir, &format!("curve_{i}.svg"), &svg)?;
                    }
                }
            }
        }
        Command::Bounds(a) => {
            let l = report::load(&a.input)?;
            let r = report::build_bounds(
                &l,
                &a.input.r2long,
                &a.delta_bar,
                &a.m,
                a.sweep_max,
                a.sweep_points,
            )?;
            emit(out, &r, render::bounds_table(&r), &a.output)?;
            if let Some(dir) = &a.output.out {
                for (i, rule) in r.rules.iter().enumerate() {
                    write_file(
                        dir,
                        &format!("sweep_{i}.csv"),
                        &render::sweep_csv(&rule.sweep),
                    )?;
                }
            }
        }
        Command::Adjust(a) => {
            let l = report::load(&a.input)?;
            let r = report::build_adjust(&l, &a.input.r2long, &a.delta, &a.delta_bar)?;
            emit(out, &r, render::adjust_table(&r), &a.output)?;
        }
        Command::OracleCheck(a) => {
            let r = report::build_oracle(a.seed, a.instances, a.inject_c3_fault);
            emit(out, &r, render::oracle_table(&r), &a.output)?;
            if let Some(dir) = &a.output.out {
                for s in &r.suites {
                    for f in &s.failures {
                        if let Some(dgp) = &f.dgp {
                            write_file(
                                dir,
                                &format!("fixture_{}_{}.json", s.name.replace(' ', "-"), f.index),
                                &dgp.to_json(),
                            )?;
                        }
                    }
                }
            }
            if !r.passed {
                return Err(CliError::SuiteFailure);
            }
        }
        Command::Simulate(a) => {
            let dgp = match a.random_dim_w1 {
                Some(k) => random_dgp(
                    a.seed,
                    DgpDims {
                        dim_w1: k,
                        force_proportional: false,
                    },
                )?,
                None => FullDgp::demo1(),
            };
            let d = sample_dataset(&dgp, a.n, a.seed)?;
            let file = fs::File::create(&a.out).map_err(|source| CliError::Write {
                path: a.out.display().to_string(),
                source,
            })?;
            d.write_csv(file)?;
            if let Some(p) = &a.model_out {
                fs::write(p, dgp.to_json()).map_err(|source| CliError::Write {
                    path: p.display().to_string(),
                    source,
                })?;
            }
            let s = summarize(&dgp.observed_moments()?)?;
            let _ = writeln!(
                out,
                "wrote {} rows to {} (population beta_med = {}, beta_long = {})",
                a.n,
                a.out.display(),
                render::num(s.beta_med),
                render::num(dgp.beta_long)
            );
        }
    }
    Ok(())
}
