//! Synthetic drifting-regression streams.
//!
//! Inputs are built from up to five correlated pairs, each drawn as
//! `R(45°)·diag(10, 1)·z` with `z` standard normal, followed by independent
//! `N(0, 2)` singles (the second argument is a variance). Labels are
//! `y_t = x_tᵀu_t`, plus `N(0, noise_var)` noise for the noisy kinds.
//!
//! * `A`, `C`: `u_t = (cos ωt, sin ωt)` on the first pair.
//! * `B`, `D`: angle `θ_t = θ_{t−1} + 1/t`, carried on a pair that moves to
//!   the next pair every `switch_period` rounds.
//!
//! Randomness comes from ChaCha20 seeded by `seed`, with stream 1 for inputs
//! and stream 3 for label noise, so `A` and `C` share inputs at equal seeds.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::ComparatorSequence;

const INPUT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 3;
const MAX_PAIRS: usize = 5;
const PAIR_SCALES: (f64, f64) = (10.0, 1.0);
const SINGLE_VARIANCE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetKind {
    A,
    B,
    C,
    D,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [DatasetKind::A, DatasetKind::B, DatasetKind::C, DatasetKind::D];

    pub fn is_noisy(self) -> bool {
        matches!(self, DatasetKind::C | DatasetKind::D)
    }

    pub fn is_switching(self) -> bool {
        matches!(self, DatasetKind::B | DatasetKind::D)
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(DatasetKind::A),
            "B" => Ok(DatasetKind::B),
            "C" => Ok(DatasetKind::C),
            "D" => Ok(DatasetKind::D),
            _ => Err(Error::Parse(format!("unknown dataset kind `{s}`"))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub horizon: usize,
    pub dim: usize,
    pub seed: u64,
    /// Angular step of kinds A/C.
    pub omega: f64,
    pub switch_period: usize,
    /// Label-noise variance of kinds C/D.
    pub noise_var: f64,
    /// Kinds B/D cycle back to the first pair; otherwise they stay on the last.
    pub wrap: bool,
}

impl DatasetSpec {
    pub const DEFAULT_HORIZON: usize = 2000;
    pub const DEFAULT_DIM: usize = 20;
    pub const DEFAULT_SWITCH: usize = 50;
    pub const DEFAULT_NOISE_VAR: f64 = 0.05;

    /// Defaults: one full revolution over the horizon, switch every 50
    /// rounds, noise variance 0.05.
    pub fn new(kind: DatasetKind, horizon: usize, dim: usize, seed: u64) -> Self {
        Self {
            kind,
            horizon,
            dim,
            seed,
            omega: std::f64::consts::TAU / horizon.max(1) as f64,
            switch_period: Self::DEFAULT_SWITCH,
            noise_var: Self::DEFAULT_NOISE_VAR,
            wrap: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::BadDim(self.dim));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParams("T must be positive".into()));
        }
        if self.switch_period == 0 {
            return Err(Error::InvalidParams("switch period must be positive".into()));
        }
        if !self.omega.is_finite() {
            return Err(Error::InvalidParams(format!("omega must be finite, got {}", self.omega)));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "noise variance must be non-negative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    /// Correlated pairs occupy the leading `2·pairs()` coordinates.
    pub fn pairs(&self) -> usize {
        (self.dim / 2).min(MAX_PAIRS)
    }

    /// Pair index carrying the comparator at round `t` (1-based) of kinds B/D.
    pub fn active_pair(&self, t: usize) -> usize {
        let segment = (t - 1) / self.switch_period;
        if self.wrap {
            segment % self.pairs()
        } else {
            segment.min(self.pairs() - 1)
        }
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledStream {
    pub xs: Vec<Vector>,
    pub ys: Vec<f64>,
    pub truth: ComparatorSequence,
    /// `max_t |y_t|`.
    pub y_bound: f64,
    /// `max_t ‖x_t‖`.
    pub x_bound: f64,
}

impl LabeledStream {
    pub fn new(xs: Vec<Vector>, ys: Vec<f64>, truth: ComparatorSequence) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        if truth.len() != xs.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: truth.len(),
            });
        }
        let y_bound = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        let x_bound = xs.iter().fold(0.0f64, |m, x| m.max(x.norm()));
        Ok(Self {
            xs,
            ys,
            truth,
            y_bound,
            x_bound,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }

    /// Writes `t,x_1..x_d,y,u_1..u_d` rows with round-trip precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.push("y".into());
        header.extend((1..=d).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for (t, ((x, y), u)) in self.xs.iter().zip(&self.ys).zip(&self.truth.us).enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(x.iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{y:.16e}"));
            row.extend(u.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let width = r.headers()?.len();
        if width < 4 || (width - 2) % 2 != 0 {
            return Err(Error::Parse(format!("stream header has {width} columns")));
        }
        let d = (width - 2) / 2;
        let (mut xs, mut ys, mut us) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != 2 * d + 1 {
                return Err(Error::LengthMismatch {
                    expected: 2 * d + 1,
                    got: vals.len(),
                });
            }
            xs.push(Vector::from_column_slice(&vals[..d]));
            ys.push(vals[d]);
            us.push(Vector::from_column_slice(&vals[d + 1..]));
        }
        Self::new(xs, ys, ComparatorSequence::new(us))
    }
}

pub fn gen_inputs(spec: &DatasetSpec) -> Result<Vec<Vector>> {
    spec.validate()?;
    let mut rng = spec.rng(INPUT_STREAM);
    let pairs = spec.pairs();
    let single = Normal::new(0.0, SINGLE_VARIANCE.sqrt()).expect("valid deviation");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut xs = Vec::with_capacity(spec.horizon);
    for _ in 0..spec.horizon {
        let mut x = Vector::zeros(spec.dim);
        for p in 0..pairs {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let (a, b) = (PAIR_SCALES.0 * z0, PAIR_SCALES.1 * z1);
            x[2 * p] = s * (a - b);
            x[2 * p + 1] = s * (a + b);
        }
        for i in 2 * pairs..spec.dim {
            x[i] = single.sample(&mut rng);
        }
        xs.push(x);
    }
    Ok(xs)
}

pub fn gen_truth(spec: &DatasetSpec) -> Result<ComparatorSequence> {
    spec.validate()?;
    let mut us = Vec::with_capacity(spec.horizon);
    let mut theta = 0.0;
    for t in 1..=spec.horizon {
        let mut u = Vector::zeros(spec.dim);
        if spec.kind.is_switching() {
            theta += 1.0 / t as f64;
            let p = spec.active_pair(t);
            u[2 * p] = theta.cos();
            u[2 * p + 1] = theta.sin();
        } else {
            let angle = spec.omega * t as f64;
            u[0] = angle.cos();
            u[1] = angle.sin();
        }
        us.push(u);
    }
    Ok(ComparatorSequence::new(us))
}

pub fn gen_stream(spec: &DatasetSpec) -> Result<LabeledStream> {
    let xs = gen_inputs(spec)?;
    let truth = gen_truth(spec)?;
    let mut ys: Vec<f64> = xs.iter().zip(&truth.us).map(|(x, u)| x.dot(u)).collect();
    if spec.kind.is_noisy() && spec.noise_var > 0.0 {
        let mut rng = spec.rng(NOISE_STREAM);
        let noise = Normal::new(0.0, spec.noise_var.sqrt()).expect("valid deviation");
        for y in &mut ys {
            *y += noise.sample(&mut rng);
        }
    }
    LabeledStream::new(xs, ys, truth)
}
