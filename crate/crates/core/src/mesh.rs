//! State meshes, multi-index bookkeeping and interpolation.
//!
//! A mesh is a strictly increasing list of nodes `y_0 < ... < y_{m-1}`. Grid
//! functions of `d + 1` arguments live on the tensor grid of `m^(d+1)` cells,
//! flattened with the first coordinate varying fastest:
//! `flat = i_0 + m * i_1 + ... + m^d * i_d`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Strictly increasing mesh nodes, at least three of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mesh {
    points: Vec<f64>,
}

impl Mesh {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateRange(format!(
                "mesh needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegenerateRange("mesh contains a non-finite point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateRange(format!(
                "mesh not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    /// Short content hash used to pin tabulated payoffs to a mesh.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.points {
            hasher.update(p.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Index of the node equal to `x`, if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&x).expect("finite mesh"))
            .ok()
    }

    /// Barycentric bracket of `x`: either a single node hit or a pair
    /// `(i, w)` meaning weight `w` on node `i` and `1 - w` on node `i + 1`.
    pub fn bracket(&self, x: f64) -> Result<Bracket> {
        if !(x >= self.lo() && x <= self.hi()) {
            return Err(Error::PointOutsideHull {
                value: x,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&x).expect("finite mesh"))
        {
            Ok(i) => Ok(Bracket::Node(i)),
            Err(j) => {
                let (a, b) = (self.points[j - 1], self.points[j]);
                Ok(Bracket::Between(j - 1, (b - x) / (b - a)))
            }
        }
    }

    /// Same nodes as a different mesh, up to exact equality.
    pub fn same_as(&self, other: &Mesh) -> bool {
        self.points == other.points
    }
}

impl TryFrom<Vec<f64>> for Mesh {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Mesh::new(points)
    }
}

impl From<Mesh> for Vec<f64> {
    fn from(mesh: Mesh) -> Self {
        mesh.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    Node(usize),
    Between(usize, f64),
}

/// Shape of the `m^(d+1)` tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub m: usize,
    pub dims: usize,
}

impl GridShape {
    pub fn new(m: usize, memory: usize) -> Self {
        Self { m, dims: memory + 1 }
    }

    /// Number of cells, `None` on overflow.
    pub fn checked_cells(&self) -> Option<usize> {
        let mut c: usize = 1;
        for _ in 0..self.dims {
            c = c.checked_mul(self.m)?;
        }
        Some(c)
    }

    pub fn cells(&self) -> usize {
        self.checked_cells().expect("grid size overflow")
    }

    /// Cells in one slab of fixed first coordinate, `m^d`.
    pub fn slab_count(&self) -> usize {
        self.cells() / self.m
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims);
        index.iter().rev().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().take(self.dims) {
            *slot = flat % self.m;
            flat /= self.m;
        }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut v = vec![0; self.dims];
        self.unflatten(flat, &mut v);
        v
    }

    /// Maps `(i_0, i_1, ..., i_d)` to `(i_0, i_0, i_1, ..., i_{d-1})`.
    pub fn shift(&self, flat: usize) -> usize {
        let i0 = flat % self.m;
        let tail = self.slab_count();
        i0 + self.m * (flat % tail)
    }
}

/// Sparse multilinear interpolation weights over the tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationWeights {
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub index: Vec<usize>,
    pub flat: usize,
    pub weight: f64,
}

impl InterpolationWeights {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Reconstructs the interpolated point from node coordinates.
    pub fn reconstruct(&self, mesh: &Mesh) -> Vec<f64> {
        let dims = self.entries.first().map_or(0, |e| e.index.len());
        let mut out = vec![0.0; dims];
        for e in &self.entries {
            for (o, &i) in out.iter_mut().zip(&e.index) {
                *o += e.weight * mesh.points()[i];
            }
        }
        out
    }
}

/// Tensor-product linear interpolation weights for `point` on `mesh`.
pub fn interpolation_weights(mesh: &Mesh, point: &[f64]) -> Result<InterpolationWeights> {
    let shape = GridShape {
        m: mesh.len(),
        dims: point.len(),
    };
    let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(point.len());
    for &x in point {
        axes.push(match mesh.bracket(x)? {
            Bracket::Node(i) => vec![(i, 1.0)],
            Bracket::Between(i, w) => vec![(i, w), (i + 1, 1.0 - w)],
        });
    }
    let mut entries = vec![WeightEntry {
        index: Vec::with_capacity(point.len()),
        flat: 0,
        weight: 1.0,
    }];
    for axis in &axes {
        let mut next = Vec::with_capacity(entries.len() * axis.len());
        for e in &entries {
            for &(i, w) in axis {
                let mut index = e.index.clone();
                index.push(i);
                next.push(WeightEntry {
                    index,
                    flat: 0,
                    weight: e.weight * w,
                });
            }
        }
        entries = next;
    }
    for e in &mut entries {
        e.flat = shape.flatten(&e.index);
    }
    Ok(InterpolationWeights { entries })
}

/// Coefficients `(c_plus, c_mid, c_minus)` of the discrete concavity row at
/// the interior node `i0` (zero-based, `1 <= i0 <= m - 2`), applied to the
/// values at `i0 + 1`, `i0` and `i0 - 1`.
pub fn second_diff_row(mesh: &Mesh, i0: usize) -> Result<(f64, f64, f64)> {
    let m = mesh.len();
    if i0 == 0 || i0 + 1 >= m {
        return Err(Error::BoundaryIndex { index: i0, m });
    }
    let y = mesh.points();
    let (lo, mid, hi) = (y[i0 - 1], y[i0], y[i0 + 1]);
    Ok((lo - mid, hi - lo, mid - hi))
}

/// Parameters of the coarse-wing, dense-centre mesh family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradedMeshParams {
    pub center: f64,
    pub dense_lo: f64,
    pub dense_hi: f64,
    pub dense_step: f64,
    pub coarse_step: f64,
    pub tail_lo: f64,
    pub cap: f64,
}

impl GradedMeshParams {
    /// Divides both step sizes by `scale`; `scale < 1` coarsens the mesh.
    pub fn scaled(mut self, scale: f64) -> Self {
        self.dense_step /= scale;
        self.coarse_step /= scale;
        self
    }

    pub fn build(&self) -> Result<Mesh> {
        build_graded_mesh(
            self.center,
            self.dense_lo,
            self.dense_hi,
            self.dense_step,
            self.coarse_step,
            self.tail_lo,
            self.cap,
        )
    }
}

/// Coarse lower wing anchored at `dense_lo` down to `tail_lo`, a dense block
/// on `[dense_lo, dense_hi]`, a coarse upper wing up to `2 * center`, and a
/// far cap node.
pub fn build_graded_mesh(
    center: f64,
    dense_lo: f64,
    dense_hi: f64,
    dense_step: f64,
    coarse_step: f64,
    tail_lo: f64,
    cap: f64,
) -> Result<Mesh> {
    let all = [center, dense_lo, dense_hi, dense_step, coarse_step, tail_lo, cap];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateRange("non-finite mesh parameter".into()));
    }
    if dense_step <= 0.0 || coarse_step <= 0.0 {
        return Err(Error::DegenerateRange("steps must be positive".into()));
    }
    if !(tail_lo <= dense_lo && dense_lo <= dense_hi && dense_hi <= cap) {
        return Err(Error::DegenerateRange(format!(
            "need tail_lo <= dense_lo <= dense_hi <= cap, got {tail_lo}, {dense_lo}, {dense_hi}, {cap}"
        )));
    }
    let snap = 1e-9 * (cap.abs().max(1.0));
    let mut pts = vec![tail_lo];
    let mut j = 1.0;
    loop {
        let p = dense_lo - j * coarse_step;
        if p <= tail_lo + snap {
            break;
        }
        pts.push(p);
        j += 1.0;
    }
    let mut j = 0.0;
    loop {
        let p = dense_lo + j * dense_step;
        if p >= dense_hi - snap {
            break;
        }
        pts.push(p);
        j += 1.0;
    }
    pts.push(dense_hi);
    let upper_end = (2.0 * center).min(cap);
    let mut j = 1.0;
    loop {
        let p = dense_hi + j * coarse_step;
        if p > upper_end + snap {
            break;
        }
        pts.push(p);
        j += 1.0;
    }
    pts.push(cap);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateRange(format!(
            "mesh has only {} distinct points",
            pts.len()
        )));
    }
    Mesh::new(pts)
}
