//! Reference learners: Vovk's AAR, normalized LMS and covariance-reset RLS.

use crate::error::{Error, Result};
use crate::learner::OnlineRegressor;
use crate::linalg::{spd_solve, SymMatrix, Vector};

fn check_dim(expected: usize, x: &Vector) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

/// Aggregating algorithm for regression (forward ridge).
///
/// `ŷ_t = x_tᵀ (A + x_tx_tᵀ)⁻¹ r`, with `A = bI + Σ x xᵀ` and `r = Σ y x`
/// over past rounds.
#[derive(Clone, Debug)]
pub struct Aar {
    a: SymMatrix,
    r: Vector,
}

impl Aar {
    pub fn new(b: f64, dim: usize) -> Result<Self> {
        let b = positive("b", b)?;
        Ok(Self {
            a: SymMatrix::scaled_identity(dim, b),
            r: Vector::zeros(dim),
        })
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.a
    }

    pub fn moment(&self) -> &Vector {
        &self.r
    }
}

impl OnlineRegressor for Aar {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn predict(&mut self, x: &Vector) -> Result<f64> {
        check_dim(self.r.len(), x)?;
        let mut m = self.a.clone();
        m.rank_one_update(x, 1.0)?;
        Ok(x.dot(&spd_solve(&m, &self.r)?))
    }

    fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        check_dim(self.r.len(), x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        self.a.rank_one_update(x, 1.0)?;
        self.r += x * y;
        Ok(())
    }
}

pub const NLMS_DEFAULT_EPS: f64 = 1e-6;

/// Normalized least mean squares.
#[derive(Clone, Debug)]
pub struct Nlms {
    eta: f64,
    eps: f64,
    w: Vector,
}

impl Nlms {
    pub fn new(eta: f64, eps: f64, dim: usize) -> Result<Self> {
        let eta = positive("eta", eta)?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "eps must be non-negative, got {eps}"
            )));
        }
        Ok(Self {
            eta,
            eps,
            w: Vector::zeros(dim),
        })
    }

    pub fn weights(&self) -> &Vector {
        &self.w
    }
}

impl OnlineRegressor for Nlms {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict(&mut self, x: &Vector) -> Result<f64> {
        check_dim(self.w.len(), x)?;
        Ok(x.dot(&self.w))
    }

    fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        check_dim(self.w.len(), x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        let denom = self.eps + x.norm_squared();
        if denom > 0.0 {
            let err = y - x.dot(&self.w);
            self.w += x * (self.eta * err / denom);
        }
        Ok(())
    }
}

/// Recursive least squares whose covariance is reset every `period` rounds.
#[derive(Clone, Debug)]
pub struct CrRls {
    b_reset: f64,
    period: Option<usize>,
    w: Vector,
    p: SymMatrix,
    t: usize,
}

impl CrRls {
    /// `period = None` never resets.
    pub fn new(b_reset: f64, period: Option<usize>, dim: usize) -> Result<Self> {
        let b_reset = positive("b", b_reset)?;
        if period == Some(0) {
            return Err(Error::InvalidParams("reset period must be positive".into()));
        }
        Ok(Self {
            b_reset,
            period,
            w: Vector::zeros(dim),
            p: SymMatrix::scaled_identity(dim, 1.0 / b_reset),
            t: 0,
        })
    }

    pub fn weights(&self) -> &Vector {
        &self.w
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.p
    }
}

impl OnlineRegressor for CrRls {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict(&mut self, x: &Vector) -> Result<f64> {
        check_dim(self.w.len(), x)?;
        Ok(x.dot(&self.w))
    }

    fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        check_dim(self.w.len(), x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        let err = y - x.dot(&self.w);
        let px = self.p.mul_vec(x)?;
        let denom = 1.0 + x.dot(&px);
        self.p.rank_one_update(&px, -1.0 / denom)?;
        let gain = self.p.mul_vec(x)?;
        self.w += gain * err;
        self.t += 1;
        if let Some(n) = self.period {
            if self.t.is_multiple_of(n) {
                self.p = SymMatrix::scaled_identity(self.w.len(), 1.0 / self.b_reset);
            }
        }
        Ok(())
    }
}
