use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};

/// A speed `n -> g_n` increasing to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedFunction {
    /// `g_n = n`
    Linear,
    /// `g_n = m log n`
    PowerLog { m: f64 },
    /// `g_n = n^p`
    Power { p: f64 },
    /// `g_n = values[n - 1]`
    Table { values: Vec<f64> },
}

impl SpeedFunction {
    pub fn power_log(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("speed.m", format!("must be positive, got {m}")));
        }
        Ok(Self::PowerLog { m })
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(invalid("speed.p", format!("must be positive, got {p}")));
        }
        Ok(Self::Power { p })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        let s = Self::Table { values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear => Ok(()),
            Self::PowerLog { m } => Self::power_log(*m).map(|_| ()),
            Self::Power { p } => Self::power(*p).map(|_| ()),
            Self::Table { values } => {
                if values.is_empty() {
                    return Err(invalid("speed.values", "table is empty"));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(invalid(
                        "speed.values",
                        format!("entries must be positive, got {v}"),
                    ));
                }
                if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
                    return Err(invalid(
                        "speed.values",
                        format!("table decreases between n = {} and n = {}", i + 1, i + 2),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(LdpError::InvalidSpeed {
                n,
                reason: "sequences are indexed from 1".into(),
            });
        }
        let g = match self {
            Self::Linear => n as f64,
            Self::PowerLog { m } => m * (n as f64).ln(),
            Self::Power { p } => (n as f64).powf(*p),
            Self::Table { values } => {
                *values
                    .get(n as usize - 1)
                    .ok_or_else(|| LdpError::InvalidSpeed {
                        n,
                        reason: format!("table only covers n <= {}", values.len()),
                    })?
            }
        };
        if !(g > 0.0 && g.is_finite()) {
            return Err(LdpError::InvalidSpeed {
                n,
                reason: format!("g_n = {g} is not positive"),
            });
        }
        Ok(g)
    }

    /// Evaluates on an increasing index list, checking positivity and monotonicity.
    pub fn eval_many(&self, ns: &[u64]) -> Result<Vec<f64>> {
        let gs = ns
            .iter()
            .map(|&n| self.eval(n))
            .collect::<Result<Vec<_>>>()?;
        for (w, nw) in gs.windows(2).zip(ns.windows(2)) {
            if w[1] < w[0] {
                return Err(LdpError::InvalidSpeed {
                    n: nw[1],
                    reason: "speed decreases on the queried range".into(),
                });
            }
        }
        Ok(gs)
    }
}
