use crate::error::Result;
use crate::linalg::Vector;

/// An online regressor driven by the predict-then-reveal protocol.
///
/// `predict` must be called before the label of the same round is passed to
/// `update`. Calling `update` without a prior `predict` is allowed; learners
/// recompute whatever the prediction would have cached.
pub trait OnlineRegressor {
    fn dim(&self) -> usize;

    fn predict(&mut self, x: &Vector) -> Result<f64>;

    fn update(&mut self, x: &Vector, y: f64) -> Result<()>;

    /// One full round: predict, then learn from the revealed label.
    fn step(&mut self, x: &Vector, y: f64) -> Result<f64> {
        let yhat = self.predict(x)?;
        self.update(x, y)?;
        Ok(yhat)
    }
}
