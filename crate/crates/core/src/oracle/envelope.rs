//! Grid concave envelopes and the backward envelope recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{interpolation_weights, GridShape, Mesh};
use crate::par::Execution;
use crate::problem::InitialHistory;

/// Indices of the vertices of the upper hull of `(x_i, v_i)`, left to right.
/// `x` must be strictly increasing. Collinear middle points are dropped.
pub fn upper_hull(x: &[f64], v: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b lies on or below the chord from a to i
            if (v[b] - v[a]) * (x[i] - x[a]) <= (v[i] - v[a]) * (x[b] - x[a]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Fills `out` with the envelope given by `hull` (see [`upper_hull`]).
pub fn fill_from_hull(x: &[f64], v: &[f64], hull: &[usize], out: &mut [f64]) {
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        out[a] = v[a];
        let slope = (v[b] - v[a]) / (x[b] - x[a]);
        for i in a + 1..b {
            out[i] = v[a] + slope * (x[i] - x[a]);
        }
    }
    let last = *hull.last().unwrap();
    out[last] = v[last];
}

/// Smallest concave majorant of `values` on the nodes `grid`.
pub fn concave_envelope_on_grid(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::MismatchedLengths(format!(
            "{} values on {} grid points",
            values.len(),
            grid.len()
        )));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::DegenerateRange("grid must be strictly increasing".into()));
    }
    let hull = upper_hull(grid, values);
    let mut out = vec![0.0; values.len()];
    fill_from_hull(grid, values, &hull, &mut out);
    Ok(out)
}

/// Values on the `m^(d+1)` tensor grid of a mesh, first coordinate fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub mesh_hash: String,
    pub m: usize,
    pub dims: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: &Mesh, memory: usize, values: Vec<f64>) -> Result<Self> {
        let shape = GridShape::new(mesh.len(), memory);
        if values.len() != shape.cells() {
            return Err(Error::MismatchedLengths(format!(
                "{} values for {} grid cells",
                values.len(),
                shape.cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("grid function has non-finite values".into()));
        }
        Ok(Self {
            mesh_hash: mesh.content_hash(),
            m: mesh.len(),
            dims: memory + 1,
            values,
        })
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            m: self.m,
            dims: self.dims,
        }
    }

    /// Interpolated value at an arbitrary point of the mesh hull.
    pub fn interpolate(&self, mesh: &Mesh, point: &[f64]) -> Result<f64> {
        if mesh.content_hash() != self.mesh_hash {
            return Err(Error::MeshMismatch);
        }
        let w = interpolation_weights(mesh, point)?;
        Ok(w.entries.iter().map(|e| e.weight * self.values[e.flat]).sum())
    }
}

/// Envelope along the first coordinate of every slab of `values`.
pub fn slab_envelopes(mesh: &Mesh, values: &[f64], exec: Execution) -> Vec<f64> {
    let m = mesh.len();
    let x = mesh.points();
    let mut out = vec![0.0; values.len()];
    exec.for_each_chunk_mut(&mut out, m, |s, slab| {
        let v = &values[s * m..(s + 1) * m];
        let hull = upper_hull(x, v);
        fill_from_hull(x, v, &hull, slab);
    });
    out
}

/// Backward recursion `φ*_n = env(h_n)`, `φ*_k = env(h_k + φ*_{k+1} ∘ shift)`.
/// Returns the interpolated value of `φ*_1` at the initial point and all
/// envelopes, ordered `k = 1..n`.
pub fn iterated_envelope_value(
    h: &[GridFunction],
    mesh: &Mesh,
    history: &InitialHistory,
    exec: Execution,
) -> Result<(f64, Vec<GridFunction>)> {
    let Some(first) = h.first() else {
        return Err(Error::EmptyTimes("no grid functions".into()));
    };
    let hash = mesh.content_hash();
    if h.iter().any(|g| g.mesh_hash != hash || g.dims != first.dims || g.m != mesh.len()) {
        return Err(Error::MeshMismatch);
    }
    let shape = first.shape();
    let memory = shape.dims - 1;
    let mut envelopes: Vec<GridFunction> = Vec::with_capacity(h.len());
    let mut next: Option<Vec<f64>> = None;
    for g in h.iter().rev() {
        let total: Vec<f64> = match &next {
            None => g.values.clone(),
            Some(phi) => g
                .values
                .iter()
                .enumerate()
                .map(|(flat, v)| v + phi[shape.shift(flat)])
                .collect(),
        };
        let env = slab_envelopes(mesh, &total, exec);
        envelopes.push(GridFunction {
            mesh_hash: hash.clone(),
            m: shape.m,
            dims: shape.dims,
            values: env.clone(),
        });
        next = Some(env);
    }
    envelopes.reverse();
    let value = envelopes[0].interpolate(mesh, &history.start_point(memory))?;
    Ok((value, envelopes))
}
