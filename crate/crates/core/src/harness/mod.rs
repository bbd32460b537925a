//! Drives learners over labeled streams and checks the regret bounds that
//! apply to each run.

mod experiment;
mod io;

pub use experiment::{
    aggregate, default_grid, run_experiment, sweep, sweep_stream, ExperimentSpec, SummaryRow, SweepResult,
    SweepSpec,
};
pub use io::{
    read_report_csv, write_bounds_csv, write_plot_script, write_report_csv, write_summary_csv,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::baselines::{Aar, CrRls, Nlms, NLMS_DEFAULT_EPS};
use crate::datagen::LabeledStream;
use crate::error::{Error, Result};
use crate::hinf::{HInf, HInfParams};
use crate::laser::{DriftPenalty, Laser, LaserParams};
use crate::learner::OnlineRegressor;
use crate::linalg::{eig_extremes, logdet, Vector};
use crate::oracle::{
    cor8_bound, lemma7_cap, theorem4_rhs, tuned_c, BoundInputs, Regime, BOUND_TOL,
};

/// Tolerance for the per-step lemma checks.
pub const STEP_TOL: f64 = 1e-9;

/// Robustness parameters tried in the H∞ regret corollary.
pub const HINF_ALPHAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoId {
    Laser,
    Aar,
    Nlms,
    CrRls,
    HInf,
}

impl AlgoId {
    pub const ALL: [AlgoId; 5] = [AlgoId::Laser, AlgoId::Aar, AlgoId::Nlms, AlgoId::CrRls, AlgoId::HInf];

    pub fn name(self) -> &'static str {
        match self {
            AlgoId::Laser => "laser",
            AlgoId::Aar => "aar",
            AlgoId::Nlms => "nlms",
            AlgoId::CrRls => "crrls",
            AlgoId::HInf => "hinf",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            AlgoId::Laser => &["b", "c"],
            AlgoId::Aar => &["b"],
            AlgoId::Nlms => &["eta", "eps"],
            AlgoId::CrRls => &["b", "period"],
            AlgoId::HInf => &["a", "b", "c"],
        }
    }

    /// Parameters used when a run does not specify them. An infinite
    /// `period` never resets.
    pub fn default_params(self) -> Params {
        let pairs: &[(&str, f64)] = match self {
            AlgoId::Laser => &[("b", 1.0), ("c", 1000.0)],
            AlgoId::Aar => &[("b", 1.0)],
            AlgoId::Nlms => &[("eta", 0.5), ("eps", NLMS_DEFAULT_EPS)],
            AlgoId::CrRls => &[("b", 1.0), ("period", 100.0)],
            AlgoId::HInf => &[("a", 2.0), ("b", 1.0), ("c", 100.0)],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    /// Overlays `given` on the defaults, rejecting unknown keys.
    pub fn resolve(self, given: &Params) -> Result<Params> {
        let mut out = self.default_params();
        for (k, &v) in given {
            if !self.keys().contains(&k.as_str()) {
                return Err(Error::InvalidParams(format!(
                    "{} has no parameter `{k}` (expected one of {:?})",
                    self.name(),
                    self.keys()
                )));
            }
            out.insert(k.clone(), v);
        }
        Ok(out)
    }
}

impl FromStr for AlgoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoId::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownAlgo(s.to_string()))
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Params = BTreeMap<String, f64>;

pub fn format_params(p: &Params) -> String {
    p.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub yhat: f64,
    pub y: f64,
    pub loss: f64,
    pub cumloss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + tol,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: lhs={:.6e} rhs={:.6e}",
            if self.holds { "ok  " } else { "FAIL" },
            self.name,
            self.lhs,
            self.rhs
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub algo: AlgoId,
    pub params: Params,
    pub seed: u64,
    pub per_step: Vec<StepRecord>,
    pub cum_loss: f64,
    /// `L_T` minus the generating comparator's loss.
    pub regret_vs_truth: f64,
    /// `x_tᵀD_t⁻¹x_t` per round (LASER only).
    pub quad_trace: Vec<f64>,
    /// Weights after each round's update (H∞ only).
    pub post_update_w: Vec<Vector>,
    pub bound_checks: Vec<BoundCheck>,
}

impl RunReport {
    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.bound_checks.iter().filter(|c| !c.holds)
    }

    pub fn yhats(&self) -> Vec<f64> {
        self.per_step.iter().map(|s| s.yhat).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Evaluate bound checks and keep LASER/H∞ traces. Sweeps turn this off.
    pub diagnostics: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { diagnostics: true }
    }
}

fn get(p: &Params, key: &str) -> f64 {
    p[key]
}

fn laser_params(p: &Params) -> Result<LaserParams> {
    LaserParams::new(get(p, "b"), DriftPenalty::from_value(get(p, "c")))
}

fn reset_period(p: &Params) -> Result<Option<usize>> {
    let v = get(p, "period");
    if v.is_infinite() && v > 0.0 {
        return Ok(None);
    }
    if !(v >= 1.0 && v.fract() == 0.0) {
        return Err(Error::InvalidParams(format!(
            "period must be a positive integer or inf, got {v}"
        )));
    }
    Ok(Some(v as usize))
}

/// Builds the learner for `algo` without running it; used to validate
/// parameters.
pub fn build_learner(algo: AlgoId, params: &Params, dim: usize) -> Result<Box<dyn OnlineRegressor + Send>> {
    let p = algo.resolve(params)?;
    Ok(match algo {
        AlgoId::Laser => Box::new(Laser::new(laser_params(&p)?, dim)?),
        AlgoId::Aar => Box::new(Aar::new(get(&p, "b"), dim)?),
        AlgoId::Nlms => Box::new(Nlms::new(get(&p, "eta"), get(&p, "eps"), dim)?),
        AlgoId::CrRls => Box::new(CrRls::new(get(&p, "b"), reset_period(&p)?, dim)?),
        AlgoId::HInf => Box::new(HInf::new(
            HInfParams::new(get(&p, "a"), get(&p, "b"), get(&p, "c"))?,
            dim,
        )?),
    })
}

fn record_steps(stream: &LabeledStream, yhats: &[f64]) -> (Vec<StepRecord>, f64) {
    let mut cum = 0.0;
    let steps = yhats
        .iter()
        .zip(&stream.ys)
        .enumerate()
        .map(|(i, (&yhat, &y))| {
            let loss = (y - yhat).powi(2);
            cum += loss;
            StepRecord {
                t: i + 1,
                yhat,
                y,
                loss,
                cumloss: cum,
            }
        })
        .collect();
    (steps, cum)
}

/// Runs `algo` over `stream` in predict-then-reveal order.
pub fn run_learner(
    algo: AlgoId,
    params: &Params,
    stream: &LabeledStream,
    opts: RunOptions,
) -> Result<RunReport> {
    let p = algo.resolve(params)?;
    let dim = stream.dim().max(1);
    let mut quad_trace = Vec::new();
    let mut post_update_w = Vec::new();
    let mut bound_checks = Vec::new();
    let yhats = match (algo, opts.diagnostics) {
        (AlgoId::Laser, true) => {
            let run = laser_diagnostics(laser_params(&p)?, stream)?;
            quad_trace = run.quads;
            bound_checks = run.checks;
            run.yhats
        }
        (AlgoId::HInf, true) => {
            let hp = HInfParams::new(get(&p, "a"), get(&p, "b"), get(&p, "c"))?;
            let mut h = HInf::new(hp, dim)?;
            let mut yhats = Vec::with_capacity(stream.len());
            for (x, &y) in stream.xs.iter().zip(&stream.ys) {
                yhats.push(h.step(x, y)?);
                post_update_w.push(h.weights().clone());
            }
            yhats
        }
        _ => {
            let mut learner = build_learner(algo, &p, dim)?;
            stream
                .xs
                .iter()
                .zip(&stream.ys)
                .map(|(x, &y)| learner.step(x, y))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let (per_step, cum_loss) = record_steps(stream, &yhats);
    let truth_loss = stream.truth.loss(&stream.xs, &stream.ys)?;
    if algo == AlgoId::HInf && opts.diagnostics {
        let hp = HInfParams::new(get(&p, "a"), get(&p, "b"), get(&p, "c"))?;
        bound_checks = hinf_checks(hp, stream, &post_update_w, cum_loss, truth_loss)?;
    }
    Ok(RunReport {
        algo,
        params: p,
        seed: 0,
        per_step,
        cum_loss,
        regret_vs_truth: cum_loss - truth_loss,
        quad_trace,
        post_update_w,
        bound_checks,
    })
}

struct LaserRun {
    yhats: Vec<f64>,
    quads: Vec<f64>,
    checks: Vec<BoundCheck>,
    /// `ln|D_T/b|`.
    logdet_ratio: f64,
}

/// Runs LASER with f tracking and evaluates the regret bound against the
/// generating comparator, plus the quadratic-sum, eigenvalue-cap and
/// per-round inequalities at every step. Each per-step check reports its
/// tightest round.
fn laser_diagnostics(params: LaserParams, stream: &LabeledStream) -> Result<LaserRun> {
    let params = params.with_f_tracking();
    let (b, c) = (params.b, params.c);
    let dim = stream.dim().max(1);
    let mut laser = Laser::new(params, dim)?;
    let ln_b = dim as f64 * b.ln();

    let mut yhats = Vec::with_capacity(stream.len());
    let mut quads = Vec::with_capacity(stream.len());
    let mut trace_sum = 0.0;
    let mut xsq_max: f64 = 0.0;
    let mut prev_q = 0.0;
    let mut lemma5 = BoundCheck::new("lemma5", 0.0, f64::INFINITY, STEP_TOL);
    let mut lemma7 = BoundCheck::new("lemma7", f64::NEG_INFINITY, f64::INFINITY, STEP_TOL);
    let mut per_step = BoundCheck::new("per_step_regret", f64::NEG_INFINITY, f64::INFINITY, STEP_TOL);
    let mut quad_sum = 0.0;
    let mut logdet_ratio = 0.0;

    let tighter = |slot: &mut BoundCheck, lhs: f64, rhs: f64| {
        let cand = BoundCheck::new(slot.name.clone(), lhs, rhs, STEP_TOL);
        if !slot.slack().is_nan() && (cand.slack().is_nan() || cand.slack() < slot.slack()) {
            *slot = cand;
        }
    };

    for (x, &y) in stream.xs.iter().zip(&stream.ys) {
        trace_sum += laser.state().d.trace();
        let yhat = laser.step(x, y)?;
        let state = laser.state();
        yhats.push(yhat);
        quads.push(state.last_x_quad);
        quad_sum += state.last_x_quad;

        logdet_ratio = logdet(&state.d)? - ln_b;
        tighter(&mut lemma5, quad_sum, logdet_ratio + trace_sum * c.inverse());

        xsq_max = xsq_max.max(x.norm_squared());
        let (_, hi) = eig_extremes(&state.d)?;
        tighter(&mut lemma7, hi, lemma7_cap(b, c.value(), xsq_max));

        let q = laser.qmin()?;
        tighter(
            &mut per_step,
            (y - yhat).powi(2) + prev_q - q,
            y * y * state.last_x_quad,
        );
        prev_q = q;
    }

    let mut checks = Vec::new();
    if !stream.is_empty() {
        let lhs: f64 = yhats.iter().zip(&stream.ys).map(|(p, y)| (y - p).powi(2)).sum();
        let rhs = theorem4_rhs(
            &stream.truth,
            &stream.xs,
            &stream.ys,
            b,
            c.value(),
            stream.y_bound,
            &quads,
        )?;
        checks.push(BoundCheck::new("theorem4_truth", lhs, rhs, BOUND_TOL));
        checks.extend([lemma5, lemma7, per_step]);
    }
    Ok(LaserRun {
        yhats,
        quads,
        checks,
        logdet_ratio,
    })
}

fn hinf_checks(
    p: HInfParams,
    stream: &LabeledStream,
    ws: &[Vector],
    cum_loss: f64,
    truth_loss: f64,
) -> Result<Vec<BoundCheck>> {
    let truth = &stream.truth;
    let filt = crate::hinf::hinf_filter_loss(ws, &stream.xs, &truth.us)?;
    let u1 = truth.first_norm_sq();
    let drift = truth.drift;
    let mut checks = vec![BoundCheck::new(
        "hinf_theorem",
        filt,
        p.a * truth_loss + p.b * u1 + p.c * drift,
        BOUND_TOL,
    )];
    let regret_rhs = |alpha: f64| {
        (1.0 + 1.0 / alpha + (1.0 + alpha) * p.a) * truth_loss
            + (1.0 + alpha) * p.b * u1
            + (1.0 + alpha) * p.c * drift
    };
    for alpha in HINF_ALPHAS {
        checks.push(BoundCheck::new(
            format!("hinf_regret_alpha={alpha}"),
            cum_loss,
            regret_rhs(alpha),
            BOUND_TOL,
        ));
    }
    let denom = p.a * truth_loss + p.c * drift + p.b * u1;
    if truth_loss > 0.0 && denom > 0.0 {
        let alpha = (truth_loss / denom).sqrt();
        checks.push(BoundCheck::new(
            "hinf_regret_alpha_opt",
            cum_loss,
            regret_rhs(alpha),
            BOUND_TOL,
        ));
    }
    Ok(checks)
}

/// Runs LASER with `c` from the tuned-bound formula for `regime` and
/// `b = eps·c`, using the stream's realized label and input bounds and its
/// generating comparator's drift. Adds the tuned bound to the checks.
pub fn run_laser_tuned(regime: Regime, eps: f64, stream: &LabeledStream) -> Result<RunReport> {
    let inputs = BoundInputs::new(
        stream.y_bound,
        stream.x_bound,
        stream.dim(),
        stream.len(),
        eps,
    )?;
    let truth = &stream.truth;
    let tuning = tuned_c(regime, &inputs, truth.drift)?;
    let params = LaserParams::new(tuning.b, DriftPenalty::Finite(tuning.c))?;
    let run = laser_diagnostics(params, stream)?;
    let (per_step, cum_loss) = record_steps(stream, &run.yhats);
    let truth_loss = truth.loss(&stream.xs, &stream.ys)?;
    let bound = cor8_bound(
        &tuning,
        &inputs,
        truth.drift,
        truth.first_norm_sq(),
        truth_loss,
        run.logdet_ratio,
    )?;
    let mut checks = run.checks;
    let name = match regime {
        Regime::LowDrift => "cor8_low_drift",
        Regime::HighDrift => "cor8_high_drift",
    };
    checks.push(BoundCheck::new(name, cum_loss, bound, BOUND_TOL));
    Ok(RunReport {
        algo: AlgoId::Laser,
        params: [("b".to_string(), tuning.b), ("c".to_string(), tuning.c)].into(),
        seed: 0,
        per_step,
        cum_loss,
        regret_vs_truth: cum_loss - truth_loss,
        quad_trace: run.quads,
        post_update_w: Vec::new(),
        bound_checks: checks,
    })
}
