//! Payoff descriptors for the objective terms and quote constraint vectors.
//!
//! Every payoff is a function of the window `(y_k, y_{k-1}, ..., y_{k-d})`,
//! passed as a slice with the current value first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Quote;
use crate::mesh::{GridShape, Mesh};

/// Bound on `(x ∧ y) log(x/y)^2 / (x + y)` over the positive quadrant.
pub const GAMMA_LEG_SLOPE: f64 = 4.0 * 0.135_335_283_236_612_7; // 4 e^-2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffKind {
    Zero,
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    /// `(y_k - y_{k-1})^+`.
    ForwardStartCall,
    /// `-scale * log(y_k / reference)`.
    NegLogContract {
        scale: f64,
        reference: f64,
    },
    /// `(y_k ∧ y_{k-1}) * log(y_k / y_{k-1})^2`.
    GammaLeg,
    /// `log(y_k / y_{k-1})^2`.
    VarianceLeg,
    Affine {
        intercept: f64,
        slopes: Vec<f64>,
    },
    /// Values on the full tensor grid of the mesh with hash `mesh_hash`.
    Table {
        mesh_hash: String,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffDescriptor {
    #[serde(flatten)]
    pub kind: PayoffKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sign_flip: bool,
}

impl From<PayoffKind> for PayoffDescriptor {
    fn from(kind: PayoffKind) -> Self {
        Self {
            kind,
            sign_flip: false,
        }
    }
}

/// `intercept + slopes · y`, an affine majorant of a payoff on a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineWitness {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl AffineWitness {
    fn constant(c: f64, dims: usize) -> Self {
        Self {
            intercept: c,
            slopes: vec![0.0; dims],
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(y).map(|(s, v)| s * v).sum::<f64>()
    }
}

impl PayoffDescriptor {
    pub fn new(kind: PayoffKind) -> Self {
        kind.into()
    }

    pub fn negated(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            sign_flip: !self.sign_flip,
        }
    }

    fn sign(&self) -> f64 {
        if self.sign_flip {
            -1.0
        } else {
            1.0
        }
    }

    /// Number of window coordinates the payoff reads, beyond which it is
    /// constant. Tabulated payoffs report `None`.
    pub fn min_window(&self) -> Option<usize> {
        match &self.kind {
            PayoffKind::Zero => Some(0),
            PayoffKind::Call { .. } | PayoffKind::Put { .. } | PayoffKind::NegLogContract { .. } => {
                Some(1)
            }
            PayoffKind::ForwardStartCall | PayoffKind::GammaLeg | PayoffKind::VarianceLeg => {
                Some(2)
            }
            PayoffKind::Affine { slopes, .. } => Some(slopes.len()),
            PayoffKind::Table { .. } => None,
        }
    }

    /// Evaluates the payoff at an arbitrary window. Tabulated payoffs need
    /// [`PayoffDescriptor::eval_on_grid`].
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let raw = match &self.kind {
            PayoffKind::Zero => 0.0,
            PayoffKind::Call { strike } => (y[0] - strike).max(0.0),
            PayoffKind::Put { strike } => (strike - y[0]).max(0.0),
            PayoffKind::ForwardStartCall => (y[0] - y[1]).max(0.0),
            PayoffKind::NegLogContract { scale, reference } => {
                if y[0] <= 0.0 || *reference <= 0.0 {
                    return Err(Error::DomainError(format!("log of non-positive value {}", y[0])));
                }
                -scale * (y[0] / reference).ln()
            }
            PayoffKind::GammaLeg => {
                let l = log_ratio(y[0], y[1])?;
                y[0].min(y[1]) * l * l
            }
            PayoffKind::VarianceLeg => {
                let l = log_ratio(y[0], y[1])?;
                l * l
            }
            PayoffKind::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(y).map(|(s, v)| s * v).sum::<f64>()
            }
            PayoffKind::Table { .. } => {
                return Err(Error::DomainError(
                    "tabulated payoff can only be evaluated on its mesh".into(),
                ))
            }
        };
        Ok(self.sign() * raw)
    }

    fn check_table(&self, mesh: &Mesh, cells: usize) -> Result<&[f64]> {
        let PayoffKind::Table { mesh_hash, values } = &self.kind else {
            unreachable!("check_table on a closed-form payoff");
        };
        let found = mesh.content_hash();
        if *mesh_hash != found {
            return Err(Error::TableMeshMismatch {
                expected: mesh_hash.clone(),
                found,
            });
        }
        if values.len() != cells {
            return Err(Error::TableMeshMismatch {
                expected: format!("{cells} values"),
                found: format!("{} values", values.len()),
            });
        }
        Ok(values)
    }

    /// Evaluates at the grid cell with multi-index `index` of `mesh`.
    pub fn eval_on_grid(&self, mesh: &Mesh, index: &[usize]) -> Result<f64> {
        if let PayoffKind::Table { .. } = self.kind {
            let shape = GridShape {
                m: mesh.len(),
                dims: index.len(),
            };
            let values = self.check_table(mesh, shape.cells())?;
            return Ok(self.sign() * values[shape.flatten(index)]);
        }
        let mut buf = [0.0; 8];
        let y: Vec<f64>;
        let window: &[f64] = if index.len() <= buf.len() {
            for (b, &i) in buf.iter_mut().zip(index) {
                *b = mesh.points()[i];
            }
            &buf[..index.len()]
        } else {
            y = index.iter().map(|&i| mesh.points()[i]).collect();
            &y
        };
        self.eval(window)
    }

    /// Samples the payoff on every cell of the `m^(d+1)` grid, first
    /// coordinate fastest.
    pub fn sample_grid(&self, mesh: &Mesh, memory: usize) -> Result<Vec<f64>> {
        let shape = GridShape::new(mesh.len(), memory);
        if let PayoffKind::Table { .. } = self.kind {
            let sign = self.sign();
            let values = self.check_table(mesh, shape.cells())?;
            return Ok(values.iter().map(|v| sign * v).collect());
        }
        let mut idx = vec![0; shape.dims];
        (0..shape.cells())
            .map(|flat| {
                shape.unflatten(flat, &mut idx);
                self.eval_on_grid(mesh, &idx)
            })
            .collect()
    }

    /// Affine majorant on the domain `[lo, hi]` (either end may be infinite),
    /// when the payoff kind guarantees one.
    pub fn affine_witness(&self, lo: f64, hi: f64, dims: usize) -> Option<AffineWitness> {
        let flip = self.sign_flip;
        let mut slopes = vec![0.0; dims];
        match &self.kind {
            PayoffKind::Zero => Some(AffineWitness::constant(0.0, dims)),
            PayoffKind::Call { strike } => {
                if flip {
                    return Some(AffineWitness::constant(0.0, dims));
                }
                if !lo.is_finite() {
                    return None;
                }
                slopes[0] = 1.0;
                Some(AffineWitness {
                    intercept: -lo.min(*strike),
                    slopes,
                })
            }
            PayoffKind::Put { strike } => {
                if flip {
                    return Some(AffineWitness::constant(0.0, dims));
                }
                if !hi.is_finite() {
                    return None;
                }
                slopes[0] = -1.0;
                Some(AffineWitness {
                    intercept: hi.max(*strike),
                    slopes,
                })
            }
            PayoffKind::ForwardStartCall => {
                if flip {
                    return Some(AffineWitness::constant(0.0, dims));
                }
                if !lo.is_finite() || dims < 2 {
                    return None;
                }
                slopes[0] = 1.0;
                Some(AffineWitness {
                    intercept: -lo,
                    slopes,
                })
            }
            PayoffKind::NegLogContract { scale, reference } => {
                let c = if flip { -scale } else { *scale };
                if c >= 0.0 {
                    // decreasing convex: its value at the left end bounds it
                    (lo > 0.0).then(|| AffineWitness::constant(-c * (lo / reference).ln(), dims))
                } else {
                    // concave: tangent at the reference level
                    let a = -c;
                    slopes[0] = a / reference;
                    Some(AffineWitness {
                        intercept: -a,
                        slopes,
                    })
                }
            }
            PayoffKind::GammaLeg => {
                if flip {
                    return Some(AffineWitness::constant(0.0, dims));
                }
                if lo < 0.0 || dims < 2 {
                    return None;
                }
                slopes[0] = GAMMA_LEG_SLOPE;
                slopes[1] = GAMMA_LEG_SLOPE;
                Some(AffineWitness {
                    intercept: 0.0,
                    slopes,
                })
            }
            PayoffKind::VarianceLeg => {
                if flip {
                    Some(AffineWitness::constant(0.0, dims))
                } else {
                    variance_leg_bound(self, lo, hi, dims)
                }
            }
            PayoffKind::Affine { intercept, slopes: s } => {
                let sign = self.sign();
                for (o, v) in slopes.iter_mut().zip(s) {
                    *o = sign * v;
                }
                Some(AffineWitness {
                    intercept: sign * intercept,
                    slopes,
                })
            }
            PayoffKind::Table { .. } => None,
        }
    }
}

/// The squared log ratio peaks at the corners of `[lo, hi]^2`.
fn variance_leg_bound(desc: &PayoffDescriptor, lo: f64, hi: f64, dims: usize) -> Option<AffineWitness> {
    if !(lo > 0.0 && hi.is_finite()) {
        return None;
    }
    let corner = [hi, lo];
    let other = [lo, hi];
    let v = desc.eval(&corner).ok()?.max(desc.eval(&other).ok()?);
    Some(AffineWitness::constant(v, dims))
}

fn log_ratio(a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::DomainError(format!("log ratio of non-positive values {a}, {b}")));
    }
    Ok((a / b).ln())
}

/// Quotes expiring at one monitoring time; they generate `2 × quotes`
/// constraint components.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBlock {
    pub quotes: Vec<Quote>,
}

impl ConstraintBlock {
    pub fn dimension(&self) -> usize {
        2 * self.quotes.len()
    }

    /// Writes `((y_k - K)^+ - bid, ask - (y_k - K)^+)` for each quote.
    pub fn fill(&self, y_k: f64, out: &mut [f64]) {
        for (q, pair) in self.quotes.iter().zip(out.chunks_exact_mut(2)) {
            let intrinsic = (y_k - q.strike).max(0.0);
            pair[0] = intrinsic - q.bid;
            pair[1] = q.ask - intrinsic;
        }
    }

    pub fn constraint_vector(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        self.fill(y[0], &mut out);
        out
    }
}
