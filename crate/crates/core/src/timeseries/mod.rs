//! Series preprocessing and lagged design matrices for SARIMAX-style models.

mod stats;
mod transform;

pub use stats::{acf_pacf, suggest_orders, SIGNIFICANCE_Z};
pub use transform::{
    difference, inverse_transform, transform, Differencing, MinMax, TransformMeta,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::runtime::PartyId;

/// An exogenous regressor: column `column` held by `party`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExoBinding {
    pub party: PartyId,
    pub column: String,
}

/// Orders of a seasonal ARIMA polynomial plus its exogenous regressors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub s: usize,
    #[serde(default)]
    pub exo: Vec<ExoBinding>,
}

impl PolynomialSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        PolynomialSpec {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            s: 0,
            exo: Vec::new(),
        }
    }

    pub fn seasonal(mut self, sp: usize, sd: usize, sq: usize, s: usize) -> Self {
        self.sp = sp;
        self.sd = sd;
        self.sq = sq;
        self.s = s;
        self
    }

    pub fn with_exo(mut self, exo: Vec<ExoBinding>) -> Self {
        self.exo = exo;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if (self.sp > 0 || self.sd > 0 || self.sq > 0) && self.s < 2 {
            return Err(Error::config(
                "seasonal period must be at least 2 when seasonal orders are set",
            ));
        }
        Ok(())
    }

    pub fn coefficient_count(&self) -> usize {
        self.p + self.q + self.sp + self.sq + self.exo.len()
    }

    pub fn has_ma(&self) -> bool {
        self.q + self.sq > 0
    }

    pub fn maxlag(&self) -> usize {
        self.p
            .max(self.q)
            .max(self.s * self.sp)
            .max(self.s * self.sq)
    }

    /// Values consumed at the front of the series by differencing.
    pub fn differencing_lag(&self) -> usize {
        self.d + self.s * self.sd
    }

    /// Same orders with moving-average terms removed.
    pub fn without_ma(&self) -> Self {
        PolynomialSpec {
            q: 0,
            sq: 0,
            ..self.clone()
        }
    }

    pub fn roles(&self) -> Vec<ColumnRole> {
        let mut roles = Vec::with_capacity(self.coefficient_count());
        roles.extend((1..=self.p).map(ColumnRole::Ar));
        roles.extend((1..=self.sp).map(ColumnRole::SeasonalAr));
        roles.extend((1..=self.q).map(ColumnRole::Ma));
        roles.extend((1..=self.sq).map(ColumnRole::SeasonalMa));
        roles.extend(self.exo.iter().enumerate().map(|(j, b)| ColumnRole::Exo {
            index: j,
            party: b.party,
        }));
        roles
    }
}

/// What a design-matrix column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "lag", rename_all = "snake_case")]
pub enum ColumnRole {
    Ar(usize),
    SeasonalAr(usize),
    Ma(usize),
    SeasonalMa(usize),
    Exo { index: usize, party: PartyId },
}

impl ColumnRole {
    /// Lag into the target series for AR-type columns.
    pub fn target_lag(&self, s: usize) -> Option<usize> {
        match *self {
            ColumnRole::Ar(i) => Some(i),
            ColumnRole::SeasonalAr(i) => Some(i * s),
            _ => None,
        }
    }

    /// Lag into the residual series for MA-type columns.
    pub fn residual_lag(&self, s: usize) -> Option<usize> {
        match *self {
            ColumnRole::Ma(i) => Some(i),
            ColumnRole::SeasonalMa(i) => Some(i * s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub phi_x: Matrix,
    pub phi_y: Vec<f64>,
    pub roles: Vec<ColumnRole>,
    pub maxlag: usize,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.phi_y.len()
    }

    pub fn target(&self) -> Matrix {
        Matrix::column(&self.phi_y)
    }
}

/// Builds the lagged regression for `y` (already transformed). Row `r` is
/// time `t = maxlag + r`; exogenous columns are taken at `t`, MA columns
/// from `residuals[t - lag]` (zeros when no residuals are given).
pub fn build_design(
    y: &[f64],
    exo: &[Vec<f64>],
    spec: &PolynomialSpec,
    residuals: Option<&[f64]>,
) -> Result<DesignMatrix> {
    spec.validate()?;
    let n = y.len();
    let maxlag = spec.maxlag();
    if n <= maxlag {
        return Err(Error::InsufficientHistory { len: n, maxlag });
    }
    if exo.len() != spec.exo.len() {
        return Err(Error::config(format!(
            "polynomial binds {} exogenous columns but {} were supplied",
            spec.exo.len(),
            exo.len()
        )));
    }
    if let Some(bad) = exo.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            op: "build_design exogenous",
            lhs: (n, 1),
            rhs: (bad.len(), 1),
        });
    }
    if let Some(r) = residuals {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                op: "build_design residuals",
                lhs: (n, 1),
                rhs: (r.len(), 1),
            });
        }
    }
    let roles = spec.roles();
    let rows = n - maxlag;
    let phi_x = Matrix::from_fn(rows, roles.len(), |r, c| {
        let t = maxlag + r;
        match roles[c] {
            ColumnRole::Exo { index, .. } => exo[index][t],
            role => {
                if let Some(l) = role.target_lag(spec.s) {
                    y[t - l]
                } else {
                    let l = role.residual_lag(spec.s).expect("MA role");
                    residuals.map_or(0.0, |e| e[t - l])
                }
            }
        }
    });
    Ok(DesignMatrix {
        phi_x,
        phi_y: y[maxlag..].to_vec(),
        roles,
        maxlag,
    })
}

/// Feature row for time `t` given the full history (`y[..t]` known).
pub fn design_row(
    y: &[f64],
    exo_at_t: &[f64],
    residuals: &[f64],
    spec: &PolynomialSpec,
    t: usize,
) -> Vec<f64> {
    spec.roles()
        .iter()
        .map(|role| match *role {
            ColumnRole::Exo { index, .. } => exo_at_t[index],
            role => {
                if let Some(l) = role.target_lag(spec.s) {
                    y[t - l]
                } else {
                    let l = role.residual_lag(spec.s).expect("MA role");
                    residuals.get(t - l).copied().unwrap_or(0.0)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exo2() -> Vec<ExoBinding> {
        vec![
            ExoBinding {
                party: PartyId(2),
                column: "x1".into(),
            },
            ExoBinding {
                party: PartyId(3),
                column: "x2".into(),
            },
        ]
    }

    #[test]
    fn row_structure_with_exogenous() {
        let spec = PolynomialSpec::new(2, 0, 1).with_exo(exo2());
        let y: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let x1: Vec<f64> = (1..=6).map(|v| 10.0 * v as f64).collect();
        let x2: Vec<f64> = (1..=6).map(|v| 100.0 * v as f64).collect();
        let e: Vec<f64> = (1..=6).map(|v| -(v as f64)).collect();
        let d = build_design(&y, &[x1, x2], &spec, Some(&e)).unwrap();
        assert_eq!(d.maxlag, 2);
        assert_eq!(d.rows(), 4);
        // first row is t=3 in 1-based time
        assert_eq!(d.phi_x.row(0), &[2.0, 1.0, -2.0, 30.0, 300.0]);
        assert_eq!(d.phi_y[0], 3.0);
    }

    #[test]
    fn no_ma_columns_when_q_is_zero() {
        let spec = PolynomialSpec::new(3, 0, 0);
        let y: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let d = build_design(&y, &[], &spec, None).unwrap();
        assert_eq!(d.phi_x.cols(), 3);
        assert!(d.roles.iter().all(|r| matches!(r, ColumnRole::Ar(_))));
    }

    #[test]
    fn ma_columns_zero_without_residuals() {
        let spec = PolynomialSpec::new(1, 0, 1);
        let y: Vec<f64> = (0..8).map(|v| (v as f64).sin()).collect();
        let d = build_design(&y, &[], &spec, None).unwrap();
        assert!(d.phi_x.col(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn insufficient_history() {
        let spec = PolynomialSpec::new(2, 0, 0).seasonal(1, 0, 0, 12);
        let y = vec![0.0; 12];
        assert!(matches!(
            build_design(&y, &[], &spec, None),
            Err(Error::InsufficientHistory {
                len: 12,
                maxlag: 12
            })
        ));
    }

    #[test]
    fn seasonal_lags_and_shape() {
        for (p, q, sp, sq, s) in [
            (1, 0, 1, 0, 4),
            (0, 2, 0, 1, 3),
            (2, 1, 2, 1, 5),
            (0, 0, 0, 0, 0),
        ] {
            let spec = PolynomialSpec::new(p, 0, q).seasonal(sp, 0, sq, s);
            let y: Vec<f64> = (0..40).map(|v| v as f64 * 0.5).collect();
            let d = build_design(&y, &[], &spec, Some(&y)).unwrap();
            assert_eq!(d.rows(), 40 - spec.maxlag());
            assert_eq!(d.phi_x.cols(), spec.coefficient_count());
            for (c, role) in d.roles.iter().enumerate() {
                let lag = role.target_lag(s).or(role.residual_lag(s)).unwrap();
                for r in 0..d.rows() {
                    assert_eq!(d.phi_x[(r, c)], y[d.maxlag + r - lag]);
                }
            }
        }
    }

    #[test]
    fn ar1_column_is_shifted_target() {
        let spec = PolynomialSpec::new(1, 0, 0);
        let y: Vec<f64> = (0..20).map(|v| ((v * 7) % 5) as f64).collect();
        let d = build_design(&y, &[], &spec, None).unwrap();
        for r in 1..d.rows() {
            assert_eq!(d.phi_x[(r, 0)], d.phi_y[r - 1]);
        }
    }

    #[test]
    fn seasonal_without_period_is_rejected() {
        let spec = PolynomialSpec::new(1, 0, 0).seasonal(1, 0, 0, 0);
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn design_row_matches_built_design() {
        let spec = PolynomialSpec::new(2, 0, 1).seasonal(1, 0, 1, 4);
        let y: Vec<f64> = (0..30).map(|v| (v as f64 * 0.3).cos()).collect();
        let e: Vec<f64> = (0..30).map(|v| (v as f64 * 0.7).sin()).collect();
        let d = build_design(&y, &[], &spec, Some(&e)).unwrap();
        for r in 0..d.rows() {
            assert_eq!(design_row(&y, &[], &e, &spec, d.maxlag + r), d.phi_x.row(r));
        }
    }
}
