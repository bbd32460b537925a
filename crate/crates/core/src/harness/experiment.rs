use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{build_learner, run_learner, AlgoId, Params, RunOptions, RunReport};
use crate::datagen::{gen_stream, DatasetSpec, LabeledStream};
use crate::error::{Error, Result};

/// Every algorithm in `algos` on the stream of every seed.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Template; its `seed` field is replaced per run.
    pub dataset: DatasetSpec,
    pub seeds: Vec<u64>,
    pub algos: Vec<(AlgoId, Params)>,
    pub options: RunOptions,
}

/// Reports sorted by algorithm position in the spec, then seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunReport>> {
    let streams: Vec<LabeledStream> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            gen_stream(&DatasetSpec {
                seed,
                ..spec.dataset.clone()
            })
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.algos.len())
        .flat_map(|a| (0..spec.seeds.len()).map(move |s| (a, s)))
        .collect();
    jobs.par_iter()
        .map(|&(a, s)| {
            let (algo, params) = &spec.algos[a];
            let mut rep = run_learner(*algo, params, &streams[s], spec.options)?;
            rep.seed = spec.seeds[s];
            Ok(rep)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub algo: AlgoId,
    pub t: usize,
    pub mean_cumloss: f64,
    /// Sample standard deviation over `√n`; zero for a single run.
    pub stderr: f64,
    pub n: usize,
}

/// Pointwise mean cumulative loss per algorithm, ordered by `(algo, t)`.
pub fn aggregate(reports: &[RunReport]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<AlgoId, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.algo).or_default().push(r);
    }
    let mut out = Vec::new();
    for (algo, mut runs) in groups {
        runs.sort_by_key(|r| r.seed);
        let len = runs[0].per_step.len();
        for r in &runs {
            if r.per_step.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    got: r.per_step.len(),
                });
            }
        }
        let n = runs.len();
        for i in 0..len {
            let vals: Vec<f64> = runs.iter().map(|r| r.per_step[i].cumloss).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                algo,
                t: runs[0].per_step[i].t,
                mean_cumloss: mean,
                stderr,
                n,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub algo: AlgoId,
    pub grid: BTreeMap<String, Vec<f64>>,
    pub tuning_seed: u64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub algo: AlgoId,
    pub best: Params,
    pub best_loss: f64,
    /// Every valid grid point with its final cumulative loss, in grid order.
    pub evaluated: Vec<(Params, f64)>,
    /// Rejected grid points with the reason.
    pub skipped: Vec<(Params, String)>,
}

/// Grids searched when none is given.
pub fn default_grid(algo: AlgoId) -> BTreeMap<String, Vec<f64>> {
    let g: Vec<(&str, Vec<f64>)> = match algo {
        AlgoId::Laser => vec![
            ("b", vec![0.1, 1.0, 10.0]),
            (
                "c",
                vec![10.0, 30.0, 1e2, 3e2, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6, 1e7],
            ),
        ],
        AlgoId::Aar => vec![("b", vec![0.1, 1.0, 10.0, 100.0])],
        AlgoId::Nlms => vec![("eta", vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.3])],
        AlgoId::CrRls => vec![
            ("b", vec![0.01, 0.1, 1.0, 10.0]),
            ("period", vec![5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0]),
        ],
        AlgoId::HInf => vec![
            ("a", vec![1.5, 2.0, 3.0, 5.0, 10.0, 20.0]),
            ("b", vec![0.1, 1.0, 10.0]),
            ("c", vec![1.0, 10.0, 100.0, 1e3, 1e4]),
        ],
    };
    g.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn grid_points(grid: &BTreeMap<String, Vec<f64>>) -> Vec<Params> {
    let mut points = vec![Params::new()];
    for (k, vals) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(k.clone(), v);
                    q
                })
            })
            .collect();
    }
    points
}

fn tuple_cmp(a: &Params, b: &Params) -> Ordering {
    a.values()
        .zip(b.values())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Runs every grid point on the stream of `tuning_seed` and keeps the one
/// with the smallest final cumulative loss. Ties go to the lexicographically
/// smallest parameter tuple; non-finite losses rank last.
pub fn sweep(spec: &SweepSpec, dataset: &DatasetSpec) -> Result<SweepResult> {
    let stream = gen_stream(&DatasetSpec {
        seed: spec.tuning_seed,
        ..dataset.clone()
    })?;
    sweep_stream(spec, &stream)
}

/// [`sweep`] on a given stream; `tuning_seed` is ignored.
pub fn sweep_stream(spec: &SweepSpec, stream: &LabeledStream) -> Result<SweepResult> {
    if spec.grid.is_empty() || spec.grid.values().any(Vec::is_empty) {
        return Err(Error::InvalidParams("sweep grid is empty".into()));
    }
    let dim = stream.dim();
    let outcomes: Vec<(Params, std::result::Result<f64, String>)> = grid_points(&spec.grid)
        .into_par_iter()
        .map(|p| {
            let outcome = match build_learner(spec.algo, &p, dim) {
                Err(e) => Err(e.to_string()),
                Ok(_) => Ok(
                    match run_learner(spec.algo, &p, stream, RunOptions { diagnostics: false }) {
                        Ok(r) if r.cum_loss.is_finite() => r.cum_loss,
                        _ => f64::INFINITY,
                    },
                ),
            };
            (p, outcome)
        })
        .collect();

    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for (p, o) in outcomes {
        match o {
            Ok(loss) => evaluated.push((p, loss)),
            Err(msg) => skipped.push((p, msg)),
        }
    }
    let (best, best_loss) = evaluated
        .iter()
        .min_by(|(pa, la), (pb, lb)| la.total_cmp(lb).then_with(|| tuple_cmp(pa, pb)))
        .cloned()
        .ok_or_else(|| Error::InvalidParams("no valid point in the sweep grid".into()))?;
    Ok(SweepResult {
        algo: spec.algo,
        best: spec.algo.resolve(&best)?,
        best_loss,
        evaluated,
        skipped,
    })
}
