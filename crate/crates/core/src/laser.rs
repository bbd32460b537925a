//! LASER: the last-step adaptive regressor.
//!
//! The learner keeps the sufficient statistics `(D, e, f)` of the quadratic
//!
//! ```text
//! Q_t(u_1..u_t) = b‖u_1‖² + c Σ_s ‖u_{s+1} − u_s‖² + Σ_s (y_s − u_sᵀx_s)²
//! ```
//!
//! whose minimum over `u_1..u_{t-1}` is `u_tᵀD_t u_t − 2u_tᵀe_t + f_t`.
//! Each round:
//!
//! ```text
//! D_t = (D_{t-1}⁻¹ + c⁻¹I)⁻¹ + x_t x_tᵀ
//! ŷ_t = x_tᵀ D_t⁻¹ (I + c⁻¹D_{t-1})⁻¹ e_{t-1}
//! e_t = (I + c⁻¹D_{t-1})⁻¹ e_{t-1} + y_t x_t
//! f_t = f_{t-1} − e_{t-1}ᵀ (cI + D_{t-1})⁻¹ e_{t-1} + y_t²
//! ```
//!
//! starting from `D_0 = bc/(c−b)·I`, `e_0 = 0`, `f_0 = 0`, which makes the
//! first committed matrix exactly `bI + x_1x_1ᵀ`. With an infinite drift
//! penalty the recursion is the stationary forward ridge regressor.
//!
//! `(D⁻¹ + c⁻¹I)⁻¹` is formed as `(I + c⁻¹D)⁻¹D` with one Cholesky
//! factorization of `I + c⁻¹D`, which also yields the carried vector
//! `(I + c⁻¹D)⁻¹e`. That form stays accurate for very large `c`.

use crate::error::{Error, Result};
use crate::learner::OnlineRegressor;
use crate::linalg::{SymMatrix, Vector};

/// Penalty on consecutive comparator differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriftPenalty {
    Finite(f64),
    /// No drift allowed; LASER becomes the stationary AAR recursion.
    Infinite,
}

impl DriftPenalty {
    /// `c` as a float, `f64::INFINITY` for the sentinel.
    pub fn value(self) -> f64 {
        match self {
            DriftPenalty::Finite(c) => c,
            DriftPenalty::Infinite => f64::INFINITY,
        }
    }

    /// `c⁻¹`, zero for the sentinel.
    pub fn inverse(self) -> f64 {
        match self {
            DriftPenalty::Finite(c) => 1.0 / c,
            DriftPenalty::Infinite => 0.0,
        }
    }

    pub fn from_value(c: f64) -> Self {
        if c.is_infinite() && c > 0.0 {
            DriftPenalty::Infinite
        } else {
            DriftPenalty::Finite(c)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaserParams {
    pub b: f64,
    pub c: DriftPenalty,
    pub track_f: bool,
    /// Label bound `Y` for the clipped predictor. Off by default.
    pub clip_bound: Option<f64>,
}

impl LaserParams {
    /// Requires `0 < b < c` (any `b > 0` when `c` is infinite).
    pub fn new(b: f64, c: DriftPenalty) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
        }
        if let DriftPenalty::Finite(c) = c {
            if !(c.is_finite() && c > b) {
                return Err(Error::InvalidParams(format!(
                    "need 0 < b < c, got b = {b}, c = {c}"
                )));
            }
        }
        Ok(Self {
            b,
            c,
            track_f: false,
            clip_bound: None,
        })
    }

    pub fn with_f_tracking(mut self) -> Self {
        self.track_f = true;
        self
    }

    pub fn with_clip(mut self, label_bound: f64) -> Result<Self> {
        if !(label_bound.is_finite() && label_bound > 0.0) {
            return Err(Error::InvalidParams(format!(
                "clip bound must be positive, got {label_bound}"
            )));
        }
        self.clip_bound = Some(label_bound);
        Ok(self)
    }

    /// Diagonal of `D_0`: `bc/(c−b)`, or `b` for an infinite penalty.
    pub fn initial_scale(&self) -> f64 {
        match self.c {
            DriftPenalty::Finite(c) => self.b * c / (c - self.b),
            DriftPenalty::Infinite => self.b,
        }
    }
}

/// Sufficient statistics of the recursion after `t` rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LaserState {
    pub d: SymMatrix,
    pub e: Vector,
    /// Meaningful only when f tracking is on.
    pub f: f64,
    pub t: usize,
    /// `x_tᵀ D_t⁻¹ x_t` of the most recent committed round.
    pub last_x_quad: f64,
}

/// Result of advancing `D` by one input without committing it.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub yhat: f64,
    pub next_d: SymMatrix,
    /// `(I + c⁻¹D_{t-1})⁻¹ e_{t-1}`.
    pub carried_e: Vector,
    /// `xᵀ D_t⁻¹ x`.
    pub x_quad: f64,
}

#[derive(Clone, Debug)]
struct Pending {
    x: Vector,
    prop: Propagation,
}

#[derive(Clone, Debug)]
pub struct Laser {
    params: LaserParams,
    state: LaserState,
    pending: Option<Pending>,
}

impl Laser {
    pub fn new(params: LaserParams, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        // Re-validate in case the struct was built by hand.
        let checked = LaserParams::new(params.b, params.c)?;
        if let Some(y) = params.clip_bound {
            checked.with_clip(y)?;
        }
        let state = LaserState {
            d: SymMatrix::scaled_identity(dim, params.initial_scale()),
            e: Vector::zeros(dim),
            f: 0.0,
            t: 0,
            last_x_quad: 0.0,
        };
        Ok(Self {
            params,
            state,
            pending: None,
        })
    }

    pub fn params(&self) -> &LaserParams {
        &self.params
    }

    pub fn state(&self) -> &LaserState {
        &self.state
    }

    /// Computes `D_t`, the carried `e` and the prediction for input `x`
    /// without changing the learner.
    pub fn propagate(&self, x: &Vector) -> Result<Propagation> {
        let dim = self.state.d.dim();
        if x.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        let (mut next_d, carried_e) = match self.params.c {
            DriftPenalty::Infinite => (self.state.d.clone(), self.state.e.clone()),
            DriftPenalty::Finite(c) => {
                let mut shrink = self.state.d.scale(1.0 / c);
                shrink.add_identity(1.0);
                let chol = shrink.cholesky()?;
                let forgotten = SymMatrix::from_matrix(chol.solve(self.state.d.as_matrix()))?;
                (forgotten, chol.solve(&self.state.e))
            }
        };
        next_d.rank_one_update(x, 1.0)?;

        let chol = next_d.cholesky()?;
        let mut yhat = x.dot(&chol.solve(&carried_e));
        let x_quad = x.dot(&chol.solve(x));
        if let Some(bound) = self.params.clip_bound {
            yhat = clip(yhat, bound);
        }
        Ok(Propagation {
            yhat,
            next_d,
            carried_e,
            x_quad,
        })
    }

    /// Returns `(ŷ, D_t)` and caches the propagation for the next `update`.
    pub fn predict_with_next(&mut self, x: &Vector) -> Result<(f64, SymMatrix)> {
        let prop = self.propagate(x)?;
        let out = (prop.yhat, prop.next_d.clone());
        self.pending = Some(Pending {
            x: x.clone(),
            prop,
        });
        Ok(out)
    }

    /// `min_{u_1..u_t} Q_t = f_t − e_tᵀ D_t⁻¹ e_t`.
    pub fn qmin(&self) -> Result<f64> {
        if !self.params.track_f {
            return Err(Error::FNotTracked);
        }
        let s = &self.state;
        let chol = s.d.cholesky()?;
        Ok(s.f - s.e.dot(&chol.solve(&s.e)))
    }

    fn take_propagation(&mut self, x: &Vector) -> Result<Propagation> {
        match self.pending.take() {
            Some(p) if p.x == *x => Ok(p.prop),
            _ => self.propagate(x),
        }
    }
}

impl OnlineRegressor for Laser {
    fn dim(&self) -> usize {
        self.state.d.dim()
    }

    fn predict(&mut self, x: &Vector) -> Result<f64> {
        self.predict_with_next(x).map(|(yhat, _)| yhat)
    }

    fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        let prop = self.take_propagation(x)?;
        let s = &mut self.state;
        if self.params.track_f {
            let decay = s.e.dot(&prop.carried_e) * self.params.c.inverse();
            s.f = s.f - decay + y * y;
        }
        s.e = prop.carried_e + x * y;
        s.d = prop.next_d;
        s.t += 1;
        s.last_x_quad = prop.x_quad;
        Ok(())
    }
}

/// `sign(v)·min{|v|, bound}`.
pub fn clip(v: f64, bound: f64) -> f64 {
    v.signum() * v.abs().min(bound)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::baselines::Aar;
    use crate::linalg::{eig_extremes, spd_solve};
    use crate::oracle::{brute_min_q, lemma7_cap};
    use proptest::prelude::*;

    fn stream(max_t: usize, max_d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (1..=max_t, 1..=max_d).prop_flat_map(|(t, d)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), t),
                prop::collection::vec(-3.0..3.0f64, t),
            )
        })
    }

    fn penalties() -> impl Strategy<Value = (f64, f64)> {
        (0.1..10.0f64, 0.1..10.0f64)
            .prop_filter("distinct", |(p, q)| (p - q).abs() > 1e-3)
            .prop_map(|(p, q)| (p.min(q), p.max(q)))
    }

    fn vecs(raw: &[Vec<f64>]) -> Vec<Vector> {
        raw.iter().map(|x| Vector::from_vec(x.clone())).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn qmin_matches_brute_force((raw, ys) in stream(20, 5), (b, c) in penalties()) {
            let xs = vecs(&raw);
            let params = LaserParams::new(b, DriftPenalty::Finite(c)).unwrap().with_f_tracking();
            let mut l = Laser::new(params, xs[0].len()).unwrap();
            for (x, &y) in xs.iter().zip(&ys) {
                l.step(x, y).unwrap();
            }
            let (brute, _) = brute_min_q(&xs, &ys, b, c).unwrap();
            let q = l.qmin().unwrap();
            prop_assert!((q - brute).abs() <= 1e-8 * (1.0 + brute.abs()), "{q} vs {brute}");
        }

        #[test]
        fn forward_prediction_uses_zero_label((raw, ys) in stream(10, 4), (b, c) in penalties()) {
            let xs = vecs(&raw);
            let params = LaserParams::new(b, DriftPenalty::Finite(c)).unwrap();
            let mut l = Laser::new(params, xs[0].len()).unwrap();
            for (x, &y) in xs.iter().zip(&ys) {
                let yhat = l.predict(x).unwrap();
                let mut fictional = l.clone();
                fictional.update(x, 0.0).unwrap();
                let s = fictional.state();
                let want = x.dot(&spd_solve(&s.d, &s.e).unwrap());
                prop_assert!((yhat - want).abs() <= 1e-12 * (1.0 + want.abs()));
                l.update(x, y).unwrap();
            }
        }

        #[test]
        fn first_matrix_is_ridge(x in prop::collection::vec(-3.0..3.0f64, 1..6), (b, c) in penalties()) {
            let x = Vector::from_vec(x);
            let mut l = Laser::new(LaserParams::new(b, DriftPenalty::Finite(c)).unwrap(), x.len()).unwrap();
            l.update(&x, 1.0).unwrap();
            let mut want = SymMatrix::scaled_identity(x.len(), b);
            want.rank_one_update(&x, 1.0).unwrap();
            let diff = l.state().d.as_matrix() - want.as_matrix();
            prop_assert!(diff.amax() <= 1e-12 * (1.0 + want.as_matrix().amax()));
        }

        #[test]
        fn eigenvalues_capped((raw, ys) in stream(40, 5), (b, c) in penalties()) {
            let xs = vecs(&raw);
            let mut l = Laser::new(LaserParams::new(b, DriftPenalty::Finite(c)).unwrap(), xs[0].len()).unwrap();
            let mut xsq: f64 = 0.0;
            for (x, &y) in xs.iter().zip(&ys) {
                l.step(x, y).unwrap();
                xsq = xsq.max(x.norm_squared());
                let (_, hi) = eig_extremes(&l.state().d).unwrap();
                prop_assert!(hi <= lemma7_cap(b, c, xsq) + 1e-9);
            }
        }

        #[test]
        fn huge_penalty_is_aar((raw, ys) in stream(20, 4), b in 0.1..10.0f64) {
            let xs = vecs(&raw);
            let d = xs[0].len();
            let mut l = Laser::new(LaserParams::new(b, DriftPenalty::Finite(1e12)).unwrap(), d).unwrap();
            let mut inf = Laser::new(LaserParams::new(b, DriftPenalty::Infinite).unwrap(), d).unwrap();
            let mut a = Aar::new(b, d).unwrap();
            for (x, &y) in xs.iter().zip(&ys) {
                let pa = a.step(x, y).unwrap();
                prop_assert!((l.step(x, y).unwrap() - pa).abs() <= 1e-6);
                prop_assert!((inf.step(x, y).unwrap() - pa).abs() <= 1e-9 * (1.0 + pa.abs()));
            }
        }

        #[test]
        fn per_step_regret((raw, ys) in stream(20, 5), (b, c) in penalties()) {
            let xs = vecs(&raw);
            let params = LaserParams::new(b, DriftPenalty::Finite(c)).unwrap().with_f_tracking();
            let mut l = Laser::new(params, xs[0].len()).unwrap();
            let mut prev = 0.0;
            for (x, &y) in xs.iter().zip(&ys) {
                let yhat = l.step(x, y).unwrap();
                let q = l.qmin().unwrap();
                let left = (y - yhat).powi(2) + prev - q;
                prop_assert!(left <= y * y * l.state().last_x_quad + 1e-9);
                prev = q;
            }
        }

        #[test]
        fn matrix_stays_positive_definite((raw, ys) in stream(60, 5), (b, c) in penalties()) {
            let xs = vecs(&raw);
            let mut l = Laser::new(LaserParams::new(b, DriftPenalty::Finite(c)).unwrap(), xs[0].len()).unwrap();
            for (x, &y) in xs.iter().zip(&ys) {
                l.step(x, y).unwrap();
                let (lo, _) = eig_extremes(&l.state().d).unwrap();
                prop_assert!(lo > 0.0);
            }
        }
    }
}
