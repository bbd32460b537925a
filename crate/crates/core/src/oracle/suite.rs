//! Randomized property suites behind `driftlearn verify`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::laser::{DriftPenalty, Laser, LaserParams};
use crate::learner::OnlineRegressor;

pub const QMIN_REL_TOL: f64 = 1e-8;
pub const LEMMA3_TOL: f64 = 1e-10;
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Lemma3,
    Lemma5,
    Lemma6,
    Lemma7,
    Bounds,
    All,
}

impl Suite {
    const EACH: [Suite; 6] = [
        Suite::Oracle,
        Suite::Lemma3,
        Suite::Lemma5,
        Suite::Lemma6,
        Suite::Lemma7,
        Suite::Bounds,
    ];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => Suite::Oracle,
            "lemma3" => Suite::Lemma3,
            "lemma5" => Suite::Lemma5,
            "lemma6" => Suite::Lemma6,
            "lemma7" => Suite::Lemma7,
            "bounds" => Suite::Bounds,
            "all" => Suite::All,
            other => return Err(Error::Parse(format!("unknown suite `{other}`"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Oracle => "oracle",
            Suite::Lemma3 => "lemma3",
            Suite::Lemma5 => "lemma5",
            Suite::Lemma6 => "lemma6",
            Suite::Lemma7 => "lemma7",
            Suite::Bounds => "bounds",
            Suite::All => "all",
        })
    }
}

/// Outcome of one suite. `worst` is the largest observed gap: a relative
/// error for the oracle suite, `lhs − rhs` for inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
            tolerance,
        }
    }

    fn record(&mut self, gap: f64) {
        self.cases += 1;
        if gap.is_nan() || gap > self.tolerance {
            self.violations += 1;
        }
        if gap.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(gap);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {} cases={} violations={} worst_gap={:.3e} tol={:.0e}",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases,
            self.violations,
            self.worst,
            self.tolerance
        )
    }
}

/// A random stream with standard-normal inputs and labels.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub xs: Vec<Vector>,
    pub ys: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl RandomInstance {
    /// `T ≤ max_t`, `d ≤ max_d`, `b < c` drawn from `[0.1, 10]`.
    pub fn draw<R: Rng>(rng: &mut R, max_t: usize, max_d: usize) -> Self {
        let t = rng.random_range(1..=max_t);
        let d = rng.random_range(1..=max_d);
        Self::draw_sized(rng, t, d)
    }

    pub fn draw_sized<R: Rng>(rng: &mut R, t: usize, d: usize) -> Self {
        let (b, c) = loop {
            let p: f64 = rng.random_range(0.1..10.0);
            let q: f64 = rng.random_range(0.1..10.0);
            if (p - q).abs() > 1e-3 {
                break (p.min(q), p.max(q));
            }
        };
        let xs = (0..t)
            .map(|_| Vector::from_fn(d, |_, _| rng.sample(StandardNormal)))
            .collect();
        let ys = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        Self { xs, ys, b, c }
    }
}

/// Per-round record of a LASER run with f tracking.
#[derive(Clone, Debug, Default)]
pub struct LaserTrace {
    pub yhats: Vec<f64>,
    pub quads: Vec<f64>,
    /// `D_0..D_T`.
    pub ds: Vec<SymMatrix>,
    /// `min Q_0..min Q_T`, with `min Q_0 = 0`.
    pub qmins: Vec<f64>,
}

pub fn trace_laser(xs: &[Vector], ys: &[f64], b: f64, c: f64) -> Result<LaserTrace> {
    let d = xs.first().map_or(1, |x| x.len());
    let params = LaserParams::new(b, DriftPenalty::from_value(c))?.with_f_tracking();
    let mut laser = Laser::new(params, d)?;
    let mut trace = LaserTrace {
        ds: vec![laser.state().d.clone()],
        qmins: vec![0.0],
        ..Default::default()
    };
    for (x, &y) in xs.iter().zip(ys) {
        trace.yhats.push(laser.step(x, y)?);
        trace.quads.push(laser.state().last_x_quad);
        trace.ds.push(laser.state().d.clone());
        trace.qmins.push(laser.qmin()?);
    }
    Ok(trace)
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    if suite == Suite::All {
        let mut out = Vec::new();
        for (k, s) in Suite::EACH.into_iter().enumerate() {
            out.extend(run_suite(s, trials, seed.wrapping_add(k as u64))?);
        }
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(match suite {
        Suite::Oracle => vec![oracle_suite(&mut rng, trials)?],
        Suite::Lemma3 => vec![lemma3_suite(&mut rng, trials)?],
        Suite::Lemma5 => vec![lemma5_suite(&mut rng, trials)?],
        Suite::Lemma6 => vec![lemma6_suite()?],
        Suite::Lemma7 => vec![lemma7_suite(&mut rng, trials)?],
        Suite::Bounds => bounds_suite(&mut rng, trials)?,
        Suite::All => unreachable!(),
    })
}

/// `|min Q_T − brute force| / (1 + |brute force|)` on random instances.
fn oracle_suite(rng: &mut ChaCha20Rng, trials: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("oracle qmin", QMIN_REL_TOL);
    for _ in 0..trials {
        let inst = RandomInstance::draw(rng, 20, 5);
        let trace = trace_laser(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let (brute, _) = brute_min_q(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let q = *trace.qmins.last().unwrap();
        rep.record((q - brute).abs() / (1.0 + brute.abs()));
    }
    Ok(rep)
}

fn lemma3_suite(rng: &mut ChaCha20Rng, trials: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lemma3 psd", LEMMA3_TOL);
    for _ in 0..trials {
        let d = rng.random_range(1..=6);
        let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut dm = SymMatrix::from_matrix(m.transpose() * m)?;
        dm.add_identity(rng.random_range(0.1..2.0));
        let x = Vector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let c = rng.random_range(0.1..10.0);
        rep.record(lemma3_gap(&dm, &x, c)?);
    }
    Ok(rep)
}

fn lemma5_suite(rng: &mut ChaCha20Rng, trials: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lemma5 quad sum", LEMMA_TOL);
    for _ in 0..trials {
        let inst = RandomInstance::draw_sized(rng, 50, 5);
        let trace = trace_laser(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let (lhs, rhs) = lemma5_sides(&trace.quads, &trace.ds, inst.b, inst.c)?;
        rep.record(lhs - rhs);
    }
    Ok(rep)
}

/// Deterministic grid of `3·20·20·9 = 10 800` points over `γ² ∈ {0.5, 1, 4}`,
/// `λ, β ∈ [0, 100]` and `x² ∈ [0, γ²]`.
fn lemma6_suite() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lemma6 scalar caps", LEMMA_TOL);
    let axis = |k: usize| 100.0 * k as f64 / 19.0;
    for gammasq in [0.5, 1.0, 4.0] {
        for i in 0..20 {
            for j in 0..20 {
                for k in 0..9 {
                    let xsq = gammasq * k as f64 / 8.0;
                    let (lambda, beta) = (axis(i), axis(j));
                    let f = lemma6_f(lambda, beta, xsq, gammasq)?;
                    let worst = lemma6_caps(lambda, beta, gammasq)
                        .iter()
                        .map(|cap| (f - cap) / (1.0 + cap))
                        .fold(f64::NEG_INFINITY, f64::max);
                    rep.record(worst);
                }
            }
        }
    }
    Ok(rep)
}

fn lemma7_suite(rng: &mut ChaCha20Rng, trials: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lemma7 eigen cap", LEMMA_TOL);
    for _ in 0..trials {
        let t = rng.random_range(1..=100);
        let d = rng.random_range(1..=6);
        let mut inst = RandomInstance::draw_sized(rng, t, d);
        // Spread input scales so both branches of the cap are exercised.
        let scale = rng.random_range(0.1..3.0);
        for x in &mut inst.xs {
            *x *= scale;
        }
        let trace = trace_laser(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let mut xsq: f64 = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for (x, dm) in inst.xs.iter().zip(&trace.ds[1..]) {
            xsq = xsq.max(x.norm_squared());
            let (_, hi) = eig_extremes(dm)?;
            worst = worst.max(hi - lemma7_cap(inst.b, inst.c, xsq));
        }
        rep.record(worst);
    }
    Ok(rep)
}

/// Regret bound against the optimal, zero and a random drifting comparator,
/// plus the per-round inequality behind it.
fn bounds_suite(rng: &mut ChaCha20Rng, trials: usize) -> Result<Vec<SuiteReport>> {
    let mut optimal = SuiteReport::new("theorem4 optimal u", BOUND_TOL);
    let mut zero = SuiteReport::new("theorem4 zero u", BOUND_TOL);
    let mut walk = SuiteReport::new("theorem4 random walk u", BOUND_TOL);
    let mut per_step = SuiteReport::new("per-step regret", LEMMA_TOL);
    for _ in 0..trials {
        let inst = RandomInstance::draw(rng, 20, 5);
        let (t, d) = (inst.xs.len(), inst.xs[0].len());
        let trace = trace_laser(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let y_bound = inst.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        let lhs: f64 = trace
            .yhats
            .iter()
            .zip(&inst.ys)
            .map(|(p, y)| (y - p).powi(2))
            .sum();

        let (_, best) = brute_min_q(&inst.xs, &inst.ys, inst.b, inst.c)?;
        let mut u = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut path = Vec::with_capacity(t);
        for _ in 0..t {
            path.push(u.clone());
            u += Vector::from_fn(d, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        }
        for (rep, comp) in [
            (&mut optimal, best),
            (&mut zero, ComparatorSequence::zeros(t, d)),
            (&mut walk, ComparatorSequence::new(path)),
        ] {
            let rhs = theorem4_rhs(
                &comp, &inst.xs, &inst.ys, inst.b, inst.c, y_bound, &trace.quads,
            )?;
            rep.record(lhs - rhs);
        }

        let mut worst = f64::NEG_INFINITY;
        for s in 0..t {
            let y = inst.ys[s];
            let left = (y - trace.yhats[s]).powi(2) + trace.qmins[s] - trace.qmins[s + 1];
            worst = worst.max(left - y * y * trace.quads[s]);
        }
        per_step.record(worst);
    }
    Ok(vec![optimal, zero, walk, per_step])
}
