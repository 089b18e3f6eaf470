//! Convex, symmetric, well-balanced compact sets, their gauges, and the
//! regions (half-spaces, complements) over which rates are minimized.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};

/// Sparse linear functional `x -> sum_i c_i x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm(pub Vec<(usize, f64)>);

impl LinearForm {
    pub fn coordinate(i: usize, coeff: f64) -> Self {
        Self(vec![(i, coeff)])
    }

    pub fn dense(coeffs: &[f64]) -> Self {
        Self(
            coeffs
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        )
    }

    pub fn apply(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(i, c)| c * x[i]).sum()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&(i, c)| (i, -c)).collect())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.iter().map(|(i, _)| *i).max()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for &(i, c) in &self.0 {
            v[i] += c;
        }
        v
    }
}

/// `{x : <form, x> >= level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub form: LinearForm,
    pub level: f64,
}

impl HalfSpace {
    pub fn new(form: LinearForm, level: f64) -> Self {
        Self { form, level }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.form.apply(x) >= self.level
    }

    /// The same set written as `<form', x> <= bound'`.
    pub fn as_constraint(&self) -> Constraint {
        Constraint {
            form: self.form.negated(),
            bound: -self.level,
        }
    }
}

/// `{x : <form, x> <= bound}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub form: LinearForm,
    pub bound: f64,
}

impl Constraint {
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.form.apply(x) - self.bound
    }

    /// The open complement `{<form, x> > bound}` as a closed half-space.
    pub fn outside(&self) -> HalfSpace {
        HalfSpace::new(self.form.clone(), self.bound)
    }
}

/// Symmetric convex compact sets on a finite coordinate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompactSetSpec {
    /// `|x_k| <= b_k`
    Box { bounds: Vec<f64> },
    /// `max_k |x_k| <= r`
    SupBall { radius: f64 },
    /// Paths with `|x(t_0)| <= c` and `|x(t) - x(s)| <= L |t - s|^gamma` on the grid.
    ModulusSet {
        hoelder: f64,
        exponent: f64,
        anchor: f64,
        times: Vec<f64>,
    },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl CompactSetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Box { bounds } => {
                if bounds.is_empty() {
                    return Err(invalid("set.bounds", "box needs at least one bound"));
                }
                bounds.iter().try_for_each(|b| positive("set.bounds", *b))
            }
            Self::SupBall { radius } => positive("set.radius", *radius),
            Self::ModulusSet {
                hoelder,
                exponent,
                anchor,
                times,
            } => {
                positive("set.hoelder", *hoelder)?;
                positive("set.anchor", *anchor)?;
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(invalid(
                        "set.exponent",
                        format!("must lie in (0, 1], got {exponent}"),
                    ));
                }
                if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(
                        "set.times",
                        "must be non-empty and strictly increasing",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Dimension the set is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::Box { bounds } => Some(bounds.len()),
            Self::SupBall { .. } => None,
            Self::ModulusSet { times, .. } => Some(times.len()),
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        match self.fixed_dim() {
            Some(expected) if expected != got => Err(LdpError::DimensionMismatch { expected, got }),
            _ => Ok(()),
        }
    }

    /// Gauge `q_K(x) = inf{t > 0 : x in tK}`.
    pub fn minkowski(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(match self {
            Self::Box { bounds } => x
                .iter()
                .zip(bounds)
                .map(|(v, b)| v.abs() / b)
                .fold(0.0, f64::max),
            Self::SupBall { radius } => x.iter().fold(0.0f64, |m, v| m.max(v.abs())) / radius,
            Self::ModulusSet {
                hoelder,
                exponent,
                anchor,
                times,
            } => {
                let mut q = x[0].abs() / anchor;
                for j in 1..x.len() {
                    for i in 0..j {
                        let scale = hoelder * (times[j] - times[i]).powf(*exponent);
                        q = q.max((x[j] - x[i]).abs() / scale);
                    }
                }
                q
            }
        })
    }

    /// Direct membership test for `x in tK`, checked constraint by constraint.
    pub fn contains_scaled(&self, x: &[f64], t: f64) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self
            .constraints(x.len())
            .iter()
            .all(|c| c.form.apply(x) <= t * c.bound))
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.contains_scaled(x, 1.0)
    }

    /// The set `tK`.
    pub fn scaled(&self, t: f64) -> Self {
        match self {
            Self::Box { bounds } => Self::Box {
                bounds: bounds.iter().map(|b| b * t).collect(),
            },
            Self::SupBall { radius } => Self::SupBall { radius: radius * t },
            Self::ModulusSet {
                hoelder,
                exponent,
                anchor,
                times,
            } => Self::ModulusSet {
                hoelder: hoelder * t,
                exponent: *exponent,
                anchor: anchor * t,
                times: times.clone(),
            },
        }
    }

    /// Linear inequalities describing the set in dimension `dim`, in a fixed
    /// order (coordinate-major, `+` before `-`).
    pub fn constraints(&self, dim: usize) -> Vec<Constraint> {
        let pair = |form: LinearForm, bound: f64| {
            [
                Constraint {
                    form: form.clone(),
                    bound,
                },
                Constraint {
                    form: form.negated(),
                    bound,
                },
            ]
        };
        match self {
            Self::Box { bounds } => bounds
                .iter()
                .enumerate()
                .flat_map(|(k, b)| pair(LinearForm::coordinate(k, 1.0), *b))
                .collect(),
            Self::SupBall { radius } => (0..dim)
                .flat_map(|k| pair(LinearForm::coordinate(k, 1.0), *radius))
                .collect(),
            Self::ModulusSet {
                hoelder,
                exponent,
                anchor,
                times,
            } => {
                let mut out: Vec<Constraint> = pair(LinearForm::coordinate(0, 1.0), *anchor).into();
                for j in 1..times.len() {
                    for i in 0..j {
                        let bound = hoelder * (times[j] - times[i]).powf(*exponent);
                        out.extend(pair(LinearForm(vec![(j, 1.0), (i, -1.0)]), bound));
                    }
                }
                out
            }
        }
    }

    /// Closed half-spaces whose union is the closure of the complement.
    pub fn facets(&self, dim: usize) -> Vec<HalfSpace> {
        self.constraints(dim)
            .iter()
            .map(Constraint::outside)
            .collect()
    }
}

/// A target region for rate minimization and event probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Inside(CompactSetSpec),
    HalfSpace(HalfSpace),
    /// The complement of a compact set (strict exceedance of one constraint).
    Outside(CompactSetSpec),
    /// A finite union of half-spaces.
    AnyOf(Vec<HalfSpace>),
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Inside(k) => k.contains(x).unwrap_or(false),
            Region::HalfSpace(h) => h.contains(x),
            Region::Outside(k) => !k.contains(x).unwrap_or(true),
            Region::AnyOf(hs) => hs.iter().any(|h| h.contains(x)),
        }
    }
}

/// Continuous seminorms on the coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seminorm {
    SupNorm,
    MinkowskiOf { set: CompactSetSpec },
    WeightedSup { weights: Vec<f64> },
}

impl Seminorm {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Seminorm::SupNorm => Ok(x.iter().fold(0.0, |m, v| m.max(v.abs()))),
            Seminorm::MinkowskiOf { set } => set.minkowski(x),
            Seminorm::WeightedSup { weights } => {
                if weights.len() != x.len() {
                    return Err(LdpError::DimensionMismatch {
                        expected: weights.len(),
                        got: x.len(),
                    });
                }
                Ok(x.iter()
                    .zip(weights)
                    .fold(0.0, |m, (v, w)| m.max(w * v.abs())))
            }
        }
    }
}
