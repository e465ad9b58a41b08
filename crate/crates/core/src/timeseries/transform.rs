use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map of `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64], name: &str) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::ConstantColumn(name.to_string()));
        }
        Ok(MinMax { min, max })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }

    pub fn apply_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn invert_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert(v)).collect()
    }
}

/// One lag-`lag` differencing step and the leading values it consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differencing {
    pub lag: usize,
    pub head: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformMeta {
    pub scaler: MinMax,
    /// Applied in order; inverted in reverse.
    pub steps: Vec<Differencing>,
}

impl TransformMeta {
    /// Number of leading values lost to differencing.
    pub fn consumed(&self) -> usize {
        self.steps.iter().map(|s| s.lag).sum()
    }
}

pub fn difference(y: &[f64], lag: usize) -> Vec<f64> {
    if y.len() <= lag {
        return Vec::new();
    }
    (lag..y.len()).map(|t| y[t] - y[t - lag]).collect()
}

/// MinMax-scales `y`, then applies `sd` seasonal (lag `s`) and `d` regular
/// differences.
pub fn transform(y: &[f64], d: usize, sd: usize, s: usize) -> Result<(Vec<f64>, TransformMeta)> {
    let scaler = MinMax::fit(y, "target")?;
    let lags = std::iter::repeat_n(s, sd).chain(std::iter::repeat_n(1, d));
    let mut z = scaler.apply_all(y);
    let mut steps = Vec::new();
    for lag in lags {
        if z.len() <= lag {
            return Err(Error::SeriesTooShort {
                needed: y.len() + lag + 1 - z.len(),
                got: y.len(),
            });
        }
        steps.push(Differencing {
            lag,
            head: z[..lag].to_vec(),
        });
        z = difference(&z, lag);
    }
    Ok((z, TransformMeta { scaler, steps }))
}

/// Undoes [`transform`]. `z` may extend past the transformed training
/// series (e.g. with forecasts); the result then extends the original.
pub fn inverse_transform(z: &[f64], meta: &TransformMeta) -> Vec<f64> {
    let mut x = z.to_vec();
    for step in meta.steps.iter().rev() {
        let mut out = step.head.clone();
        out.reserve(x.len());
        for (i, v) in x.iter().enumerate() {
            let prev = out[i];
            out.push(v + prev);
        }
        x = out;
    }
    meta.scaler.invert_all(&x)
}
