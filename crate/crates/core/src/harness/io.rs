use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{AlgoId, Params, RunReport, StepRecord, SummaryRow};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("{what} `{field}`: {e}")))
}

/// `algo,seed,t,yhat,y,loss,cumloss`.
pub fn write_report_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "seed", "t", "yhat", "y", "loss", "cumloss"])?;
    for r in reports {
        for s in &r.per_step {
            w.write_record([
                r.algo.name().to_string(),
                r.seed.to_string(),
                s.t.to_string(),
                num(s.yhat),
                num(s.y),
                num(s.loss),
                num(s.cumloss),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads report rows back into per-run reports. Row order does not matter;
/// runs come back sorted by `(algo, seed)` with steps sorted by `t`.
pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<RunReport>> {
    let mut r = csv::Reader::from_reader(input);
    let mut runs: BTreeMap<(AlgoId, u64), Vec<StepRecord>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 7 {
            return Err(Error::LengthMismatch {
                expected: 7,
                got: rec.len(),
            });
        }
        let algo: AlgoId = rec[0].trim().parse()?;
        let seed: u64 = parse(&rec[1], "seed")?;
        runs.entry((algo, seed)).or_default().push(StepRecord {
            t: parse(&rec[2], "t")?,
            yhat: parse(&rec[3], "yhat")?,
            y: parse(&rec[4], "y")?,
            loss: parse(&rec[5], "loss")?,
            cumloss: parse(&rec[6], "cumloss")?,
        });
    }
    runs.into_iter()
        .map(|((algo, seed), mut steps)| {
            steps.sort_by_key(|s| s.t);
            for (i, s) in steps.iter().enumerate() {
                if s.t != i + 1 {
                    return Err(Error::Parse(format!(
                        "{algo} seed {seed}: expected step {} but found {}",
                        i + 1,
                        s.t
                    )));
                }
            }
            let cum_loss = steps.last().map_or(0.0, |s| s.cumloss);
            Ok(RunReport {
                algo,
                params: Params::new(),
                seed,
                per_step: steps,
                cum_loss,
                regret_vs_truth: f64::NAN,
                quad_trace: Vec::new(),
                post_update_w: Vec::new(),
                bound_checks: Vec::new(),
            })
        })
        .collect()
}

/// `algo,t,mean_cumloss,stderr,n`.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "t", "mean_cumloss", "stderr", "n"])?;
    for row in rows {
        w.write_record([
            row.algo.name().to_string(),
            row.t.to_string(),
            num(row.mean_cumloss),
            num(row.stderr),
            row.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `algo,seed,bound_name,lhs,rhs,slack`.
pub fn write_bounds_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "seed", "bound_name", "lhs", "rhs", "slack"])?;
    for r in reports {
        for c in &r.bound_checks {
            w.write_record([
                r.algo.name().to_string(),
                r.seed.to_string(),
                c.name.clone(),
                num(c.lhs),
                num(c.rhs),
                num(c.slack()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A gnuplot script drawing one mean cumulative-loss curve per algorithm
/// from a summary CSV.
pub fn write_plot_script<W: Write>(
    summary_csv: &str,
    algos: &[AlgoId],
    title: &str,
    mut out: W,
) -> Result<()> {
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set key left top")?;
    writeln!(out, "set xlabel 'round'")?;
    writeln!(out, "set ylabel 'mean cumulative squared loss'")?;
    writeln!(out, "set logscale y")?;
    writeln!(out, "set title '{}'", title.replace('\'', ""))?;
    let curves: Vec<String> = algos
        .iter()
        .map(|a| {
            format!(
                "'{}' using 2:(strcol(1) eq '{}' ? $3 : 1/0) every ::1 with lines title '{}'",
                summary_csv.replace('\'', ""),
                a.name(),
                a.name()
            )
        })
        .collect();
    writeln!(out, "plot {}", curves.join(", \\\n     "))?;
    Ok(())
}
