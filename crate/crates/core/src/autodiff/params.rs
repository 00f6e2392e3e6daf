use crate::error::{Error, Result};

/// Flat parameter vector `θ = (s, W)` with `β = exp(s)` and `W` stored
/// row-major as `d × m` (row `k` holds coordinate `k` of every direction).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn len_for(d: usize, m: usize) -> usize {
        1 + d * m
    }

    pub fn flatten(log_beta: f64, w: &[f64]) -> Self {
        let mut v = Vec::with_capacity(1 + w.len());
        v.push(log_beta);
        v.extend_from_slice(w);
        ParameterVector(v)
    }

    /// Splits back into `(s, W)`, checking the length against `d` and `m`.
    pub fn unflatten(&self, d: usize, m: usize) -> Result<(f64, Vec<f64>)> {
        if self.0.len() != Self::len_for(d, m) {
            return Err(Error::Domain(format!(
                "parameter vector has length {}, expected {}",
                self.0.len(),
                Self::len_for(d, m)
            )));
        }
        Ok((self.0[0], self.0[1..].to_vec()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
