//! H∞ regression filter for drifting comparators.
//!
//! ```text
//! P_0 = b⁻¹I,  w_0 = 0
//! ŷ_t = x_tᵀ w_{t-1}
//! P̃_t = (P_{t-1}⁻¹ + (a−1) x_t x_tᵀ)⁻¹
//! w_t = w_{t-1} + a P̃_t x_t (y_t − ŷ_t)
//! P_t = P̃_t + c⁻¹I
//! ```

use crate::error::{Error, Result};
use crate::learner::OnlineRegressor;
use crate::linalg::{SymMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HInfParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HInfParams {
    /// Requires `a > 1`, `b > 0`, `c > 0`.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParams(format!("a must exceed 1, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!("c must be positive, got {c}")));
        }
        Ok(Self { a, b, c })
    }
}

#[derive(Clone, Debug)]
pub struct HInf {
    params: HInfParams,
    w: Vector,
    p: SymMatrix,
    t: usize,
}

impl HInf {
    pub fn new(params: HInfParams, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        let params = HInfParams::new(params.a, params.b, params.c)?;
        Ok(Self {
            params,
            w: Vector::zeros(dim),
            p: SymMatrix::scaled_identity(dim, 1.0 / params.b),
            t: 0,
        })
    }

    pub fn params(&self) -> &HInfParams {
        &self.params
    }

    pub fn weights(&self) -> &Vector {
        &self.w
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.p
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.w.len() {
            return Err(Error::DimMismatch {
                expected: self.w.len(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl OnlineRegressor for HInf {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict(&mut self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(x.dot(&self.w))
    }

    fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.check_dim(x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        let residual = y - x.dot(&self.w);
        let mut info = self.p.spd_inverse()?;
        info.rank_one_update(x, self.params.a - 1.0)?;
        let p_tilde = info.spd_inverse()?;
        let gain = p_tilde.mul_vec(x)?;
        self.w += gain * (self.params.a * residual);
        self.p = p_tilde;
        self.p.add_identity(1.0 / self.params.c);
        self.t += 1;
        Ok(())
    }
}

/// Filtering error `Σ_t (x_tᵀw_t − x_tᵀu_t)²` of post-update weights `ws`
/// against a comparator sequence `us`.
pub fn hinf_filter_loss(ws: &[Vector], xs: &[Vector], us: &[Vector]) -> Result<f64> {
    for len in [ws.len(), us.len()] {
        if len != xs.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: len,
            });
        }
    }
    let mut total = 0.0;
    for ((w, x), u) in ws.iter().zip(xs).zip(us) {
        let r = x.dot(w) - x.dot(u);
        total += r * r;
    }
    Ok(total)
}
