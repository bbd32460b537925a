//! Independent verifiers: a brute-force minimizer of the drift-penalized
//! objective, and evaluators for the regret bounds and the lemmas behind
//! them.
//!
//! The objective over a comparator sequence `u_1..u_T` is
//!
//! ```text
//! Q_T = b‖u_1‖² + c Σ_{t<T} ‖u_{t+1} − u_t‖² + Σ_t (y_t − u_tᵀx_t)²
//! ```

pub mod suite;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eig_extremes, logdet, SymMatrix, Vector};

/// Largest `T·d` accepted by [`brute_min_q`].
pub const BRUTE_BUDGET: usize = 2000;

/// Additive tolerance for every bound inequality.
pub const BOUND_TOL: f64 = 1e-6;

fn same_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// A comparator sequence with its total and average drift.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparatorSequence {
    pub us: Vec<Vector>,
    /// `V = Σ_{t<T} ‖u_{t+1} − u_t‖²`.
    pub drift: f64,
    /// `V / T`.
    pub nu: f64,
}

impl ComparatorSequence {
    pub fn new(us: Vec<Vector>) -> Self {
        let drift = us.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum();
        let nu = if us.is_empty() {
            0.0
        } else {
            drift / us.len() as f64
        };
        Self { us, drift, nu }
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        Self::new(vec![Vector::zeros(dim); len])
    }

    pub fn len(&self) -> usize {
        self.us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.us.is_empty()
    }

    /// `‖u_1‖²`, zero for an empty sequence.
    pub fn first_norm_sq(&self) -> f64 {
        self.us.first().map_or(0.0, |u| u.norm_squared())
    }

    /// Cumulative squared loss `Σ_t (y_t − u_tᵀx_t)²`.
    pub fn loss(&self, xs: &[Vector], ys: &[f64]) -> Result<f64> {
        same_len(self.us.len(), xs.len())?;
        same_len(self.us.len(), ys.len())?;
        Ok(self
            .us
            .iter()
            .zip(xs)
            .zip(ys)
            .map(|((u, x), y)| (y - u.dot(x)).powi(2))
            .sum())
    }
}

/// Evaluates `Q_T` at a given comparator sequence.
pub fn q_value(us: &[Vector], xs: &[Vector], ys: &[f64], b: f64, c: f64) -> Result<f64> {
    let comp = ComparatorSequence::new(us.to_vec());
    Ok(b * comp.first_norm_sq() + c * comp.drift + comp.loss(xs, ys)?)
}

/// Minimizes `Q_T` by a dense solve of the stacked normal equations.
pub fn brute_min_q(
    xs: &[Vector],
    ys: &[f64],
    b: f64,
    c: f64,
) -> Result<(f64, ComparatorSequence)> {
    same_len(xs.len(), ys.len())?;
    if !(b > 0.0 && c > 0.0 && b.is_finite() && c.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "brute force needs finite b, c > 0, got b = {b}, c = {c}"
        )));
    }
    let t = xs.len();
    if t == 0 {
        return Ok((0.0, ComparatorSequence::new(Vec::new())));
    }
    let d = xs[0].len();
    for x in xs {
        if x.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    let n = t * d;
    if n > BRUTE_BUDGET {
        return Err(Error::TooLarge {
            size: n,
            budget: BRUTE_BUDGET,
        });
    }

    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..t {
        let o = s * d;
        let neighbours = usize::from(s > 0) + usize::from(s + 1 < t);
        let mut diag = c * neighbours as f64;
        if s == 0 {
            diag += b;
        }
        for i in 0..d {
            for j in 0..d {
                h[(o + i, o + j)] += xs[s][i] * xs[s][j];
            }
            h[(o + i, o + i)] += diag;
            rhs[o + i] = ys[s] * xs[s][i];
        }
        if s + 1 < t {
            for i in 0..d {
                h[(o + i, o + d + i)] = -c;
                h[(o + d + i, o + i)] = -c;
            }
        }
    }
    let z = h.cholesky().ok_or(Error::SingularSystem)?.solve(&rhs);
    let us: Vec<Vector> = (0..t).map(|s| z.rows(s * d, d).into_owned()).collect();
    let value = q_value(&us, xs, ys, b, c)?;
    Ok((value, ComparatorSequence::new(us)))
}

/// Largest eigenvalue of
/// `D'D_t⁻¹xxᵀD_t⁻¹D' − D⁻¹ + D'(D_t⁻¹D' + c⁻¹I)` with `D' = (I + c⁻¹D)⁻¹`
/// and `D_t = (D⁻¹ + c⁻¹I)⁻¹ + xxᵀ`. It is never positive.
pub fn lemma3_gap(d_prev: &SymMatrix, x: &Vector, c: f64) -> Result<f64> {
    let dim = d_prev.dim();
    if x.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let d_inv = d_prev.spd_inverse()?;
    let mut shrink = d_prev.scale(1.0 / c);
    shrink.add_identity(1.0);
    let dp = shrink.spd_inverse()?;

    let mut a = d_inv.clone();
    a.add_identity(1.0 / c);
    let mut d_t = a.spd_inverse()?;
    d_t.rank_one_update(x, 1.0)?;
    let dt_inv = d_t.spd_inverse()?;

    let v = dp.as_matrix() * dt_inv.as_matrix() * x;
    let mut inner = dt_inv.as_matrix() * dp.as_matrix();
    for i in 0..dim {
        inner[(i, i)] += 1.0 / c;
    }
    let m = &v * v.transpose() - d_inv.as_matrix() + dp.as_matrix() * inner;
    let (_, hi) = eig_extremes(&SymMatrix::from_matrix(m)?)?;
    Ok(hi)
}

/// Right side of the per-run regret bound:
/// `b‖u_1‖² + cV + L_T({u_t}) + Y² Σ_t x_tᵀD_t⁻¹x_t`.
#[allow(clippy::too_many_arguments)]
pub fn theorem4_rhs(
    comparator: &ComparatorSequence,
    xs: &[Vector],
    ys: &[f64],
    b: f64,
    c: f64,
    y_bound: f64,
    quad_trace: &[f64],
) -> Result<f64> {
    same_len(xs.len(), quad_trace.len())?;
    let drift_term = if comparator.drift == 0.0 {
        0.0
    } else {
        c * comparator.drift
    };
    Ok(b * comparator.first_norm_sq()
        + drift_term
        + comparator.loss(xs, ys)?
        + y_bound * y_bound * quad_trace.iter().sum::<f64>())
}

/// Both sides of
/// `Σ_t x_tᵀD_t⁻¹x_t ≤ ln|D_T/b| + c⁻¹ Σ_{t=1}^T Tr(D_{t−1})`.
///
/// `d_traj` holds `D_0..D_T`, one more entry than `quad_trace`.
pub fn lemma5_sides(quad_trace: &[f64], d_traj: &[SymMatrix], b: f64, c: f64) -> Result<(f64, f64)> {
    same_len(quad_trace.len() + 1, d_traj.len())?;
    let last = d_traj.last().expect("trajectory holds D_0");
    let log_ratio = logdet(last)? - last.dim() as f64 * b.ln();
    let traces: f64 = d_traj[..d_traj.len() - 1].iter().map(SymMatrix::trace).sum();
    let lhs = quad_trace.iter().sum();
    Ok((lhs, log_ratio + traces / c))
}

/// `f(λ) = λβ/(λ+β) + x²`, with `f(0) = x²`.
pub fn lemma6_f(lambda: f64, beta: f64, xsq: f64, gammasq: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("beta", beta), ("x^2", xsq), ("gamma^2", gammasq)] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::DomainError(format!("{name} must be non-negative, got {v}")));
        }
    }
    if xsq > gammasq {
        return Err(Error::DomainError(format!(
            "x^2 = {xsq} exceeds gamma^2 = {gammasq}"
        )));
    }
    if lambda + beta == 0.0 {
        return Ok(xsq);
    }
    Ok(lambda * beta / (lambda + beta) + xsq)
}

/// The three upper bounds on `f(λ)`: `β + γ²`, `λ + γ²` and
/// `max{λ, (3γ² + √(γ⁴ + 4γ²β))/2}`.
pub fn lemma6_caps(lambda: f64, beta: f64, gammasq: f64) -> [f64; 3] {
    let fixed = (3.0 * gammasq + (gammasq * gammasq + 4.0 * gammasq * beta).sqrt()) / 2.0;
    [beta + gammasq, lambda + gammasq, lambda.max(fixed)]
}

/// `max{(3X² + √(X⁴ + 4X²c))/2, b + X²}`: the eigenvalue cap on `D_t` when
/// `‖x_s‖² ≤ X²`.
pub fn lemma7_cap(b: f64, c: f64, xsq: f64) -> f64 {
    let drift_cap = (3.0 * xsq + (xsq * xsq + 4.0 * xsq * c).sqrt()) / 2.0;
    drift_cap.max(b + xsq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    LowDrift,
    HighDrift,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::LowDrift => "low-drift",
            Regime::HighDrift => "high-drift",
        })
    }
}

/// Problem constants for the tuned bounds. `b = εc` is derived from `c`,
/// and `μ`, `M` from `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// Label bound `Y`.
    pub y_bound: f64,
    /// Input-norm bound `X` (so `‖x_t‖² ≤ X²`).
    pub x_bound: f64,
    pub dim: usize,
    pub horizon: usize,
    /// `ε` in `b = εc`.
    pub eps: f64,
}

impl BoundInputs {
    pub fn new(y_bound: f64, x_bound: f64, dim: usize, horizon: usize, eps: f64) -> Result<Self> {
        if !(y_bound > 0.0 && y_bound.is_finite() && x_bound > 0.0 && x_bound.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bounds must be positive, got Y = {y_bound}, X = {x_bound}"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParams(format!("eps must lie in (0, 1), got {eps}")));
        }
        if dim == 0 || horizon == 0 {
            return Err(Error::InvalidParams("d and T must be positive".into()));
        }
        Ok(Self {
            y_bound,
            x_bound,
            dim,
            horizon,
            eps,
        })
    }

    fn xsq(&self) -> f64 {
        self.x_bound * self.x_bound
    }

    /// `μ = max{9X²/8, (b + X²)²/(8X²)}`.
    pub fn mu(&self, b: f64) -> f64 {
        let xsq = self.xsq();
        (9.0 * xsq / 8.0).max((b + xsq).powi(2) / (8.0 * xsq))
    }

    /// `M = max{3X², b + X²}`.
    pub fn big_m(&self, b: f64) -> f64 {
        let xsq = self.xsq();
        (3.0 * xsq).max(b + xsq)
    }

    /// `Y²dT`.
    fn scale(&self) -> f64 {
        self.y_bound * self.y_bound * self.dim as f64 * self.horizon as f64
    }

    /// Largest `V` admitted by the low-drift regime at this `b`.
    pub fn low_threshold(&self, b: f64) -> f64 {
        self.scale() * std::f64::consts::SQRT_2 * self.x_bound / self.mu(b).powf(1.5)
    }

    /// Smallest `V` admitted by the high-drift regime at this `b`.
    pub fn high_threshold(&self, b: f64) -> f64 {
        self.scale() * self.big_m(b) / self.mu(b).powi(2)
    }

    fn low_c(&self, drift: f64) -> f64 {
        (std::f64::consts::SQRT_2 * self.scale() * self.x_bound / drift).powf(2.0 / 3.0)
    }

    fn high_c(&self, drift: f64) -> f64 {
        // c = √(kM) with M = max{3X², εc + X²}, k = Y²dT/V.
        let k = self.scale() / drift;
        let xsq = self.xsq();
        let flat = (3.0 * xsq * k).sqrt();
        if self.eps * flat <= 2.0 * xsq {
            flat
        } else {
            let ke = k * self.eps;
            (ke + (ke * ke + 4.0 * k * xsq).sqrt()) / 2.0
        }
    }

    fn violation(&self, drift: f64) -> Error {
        let (low, high) = if drift > 0.0 {
            (
                self.low_threshold(self.eps * self.low_c(drift)),
                self.high_threshold(self.eps * self.high_c(drift)),
            )
        } else {
            (self.low_threshold(0.0), self.high_threshold(0.0))
        };
        Error::RegimeViolation {
            drift,
            low_threshold: low,
            high_threshold: high,
            hint: if drift > 0.0 {
                ""
            } else {
                "; zero drift is the stationary case, use c = Infinite"
            },
        }
    }
}

/// A drift penalty chosen by [`tuned_c`], with the implied `b = εc`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tuning {
    pub regime: Regime,
    pub c: f64,
    pub b: f64,
    pub mu: f64,
    pub big_m: f64,
}

/// Drift penalty for the given regime:
/// `c = (√2·TY²dX/V)^{2/3}` (low drift) or `c = √(Y²dMT/V)` (high drift),
/// with `b = εc`. Fails if `V` lies outside the regime.
pub fn tuned_c(regime: Regime, inputs: &BoundInputs, drift: f64) -> Result<Tuning> {
    if !(drift > 0.0 && drift.is_finite()) {
        return Err(inputs.violation(drift.max(0.0)));
    }
    let c = match regime {
        Regime::LowDrift => inputs.low_c(drift),
        Regime::HighDrift => inputs.high_c(drift),
    };
    let b = inputs.eps * c;
    let ok = match regime {
        Regime::LowDrift => drift <= inputs.low_threshold(b),
        Regime::HighDrift => drift >= inputs.high_threshold(b),
    };
    if !ok {
        return Err(inputs.violation(drift));
    }
    Ok(Tuning {
        regime,
        c,
        b,
        mu: inputs.mu(b),
        big_m: inputs.big_m(b),
    })
}

/// The tuned regret bound
/// `b‖u_1‖² + G + ε/(1−ε)·Y²d + L_T({u_t}) + Y² ln|D_T/b|`, where `G` is
/// `3(√2Y²dX)^{2/3}T^{2/3}V^{1/3}` (low drift) or `2√(Y²dTMV)` (high drift).
pub fn cor8_bound(
    tuning: &Tuning,
    inputs: &BoundInputs,
    drift: f64,
    u1_norm_sq: f64,
    comparator_loss: f64,
    logdet_dt_over_b: f64,
) -> Result<f64> {
    let check = tuned_c(tuning.regime, inputs, drift)?;
    if (check.c - tuning.c).abs() > 1e-9 * tuning.c {
        return Err(Error::InvalidParams(format!(
            "c = {} is not the tuned value {} for V = {drift}",
            tuning.c, check.c
        )));
    }
    let ysq = inputs.y_bound * inputs.y_bound;
    let d = inputs.dim as f64;
    let t = inputs.horizon as f64;
    let growth = match tuning.regime {
        Regime::LowDrift => {
            3.0 * (std::f64::consts::SQRT_2 * ysq * d * inputs.x_bound).powf(2.0 / 3.0)
                * t.powf(2.0 / 3.0)
                * drift.cbrt()
        }
        Regime::HighDrift => 2.0 * (ysq * d * t * tuning.big_m * drift).sqrt(),
    };
    Ok(tuning.b * u1_norm_sq
        + growth
        + inputs.eps / (1.0 - inputs.eps) * ysq * d
        + comparator_loss
        + ysq * logdet_dt_over_b)
}
