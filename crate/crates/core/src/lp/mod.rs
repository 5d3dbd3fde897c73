//! Sparse LP assembly for the grid super-replication problem.
//!
//! Variables are laid out as `[λ (p entries) | φ^1 .. φ^n | h^1 .. h^n]`, each
//! φ/h block holding `m^(d+1)` cells flattened with the first coordinate
//! fastest. Rows come in four families, emitted in this order: h
//! definitions, terminal rows, recursion rows and concavity rows.

pub mod mps;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{interpolation_weights, second_diff_row, GridShape, Mesh};
use crate::par::Execution;
use crate::problem::ValidatedSpec;

/// Default cap on `m^(d+1)`.
pub const DEFAULT_CELL_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `a·x >= rhs`
    Ge,
    /// `a·x = rhs`
    Eq,
    /// `a·x <= rhs`; only produced by external files.
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: u32,
    pub col: u32,
    pub coeff: f64,
}

/// Semantic tag of an LP row. `idx` is the flat grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowTag {
    HDef { k: usize, idx: usize },
    Terminal { idx: usize },
    Recursion { k: usize, idx: usize },
    Concavity { k: usize, idx: usize },
    /// Rows of LPs not produced by [`build_dual_lp`].
    Other(usize),
}

/// What an LP column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarTag {
    /// Component `j` of λ_k.
    Lambda { k: usize, j: usize },
    Phi { k: usize, idx: usize },
    H { k: usize, idx: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDirectory {
    /// `lambda_offsets[k - 1] .. lambda_offsets[k]` holds λ_k.
    pub lambda_offsets: Vec<usize>,
    pub horizon: usize,
    pub shape: GridShape,
}

impl VariableDirectory {
    pub fn new(p_per_step: &[usize], shape: GridShape) -> Self {
        let mut lambda_offsets = Vec::with_capacity(p_per_step.len() + 1);
        let mut acc = 0;
        lambda_offsets.push(0);
        for &p in p_per_step {
            acc += p;
            lambda_offsets.push(acc);
        }
        Self {
            lambda_offsets,
            horizon: p_per_step.len(),
            shape,
        }
    }

    pub fn num_lambda(&self) -> usize {
        *self.lambda_offsets.last().unwrap()
    }

    pub fn cells(&self) -> usize {
        self.shape.cells()
    }

    pub fn num_vars(&self) -> usize {
        self.num_lambda() + 2 * self.horizon * self.cells()
    }

    pub fn lambda_range(&self, k: usize) -> std::ops::Range<usize> {
        self.lambda_offsets[k - 1]..self.lambda_offsets[k]
    }

    pub fn phi_offset(&self, k: usize) -> usize {
        self.num_lambda() + (k - 1) * self.cells()
    }

    pub fn h_offset(&self, k: usize) -> usize {
        self.num_lambda() + (self.horizon + k - 1) * self.cells()
    }

    pub fn phi(&self, k: usize, idx: usize) -> usize {
        self.phi_offset(k) + idx
    }

    pub fn h(&self, k: usize, idx: usize) -> usize {
        self.h_offset(k) + idx
    }

    pub fn classify(&self, col: usize) -> Option<VarTag> {
        let p = self.num_lambda();
        if col < p {
            let k = self.lambda_offsets.partition_point(|&o| o <= col);
            return Some(VarTag::Lambda {
                k,
                j: col - self.lambda_offsets[k - 1],
            });
        }
        let rest = col - p;
        let cells = self.cells();
        let block = rest / cells;
        let idx = rest % cells;
        if block < self.horizon {
            Some(VarTag::Phi { k: block + 1, idx })
        } else if block < 2 * self.horizon {
            Some(VarTag::H {
                k: block - self.horizon + 1,
                idx,
            })
        } else {
            None
        }
    }
}

/// Row offsets of the four families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLayout {
    pub horizon: usize,
    pub cells: usize,
    /// Concavity rows per time step, `(m - 2) m^d`.
    pub concavity_per_step: usize,
}

impl RowLayout {
    fn new(shape: &GridShape, horizon: usize) -> Self {
        Self {
            horizon,
            cells: shape.cells(),
            concavity_per_step: (shape.m - 2) * shape.slab_count(),
        }
    }

    pub fn hdef(&self, k: usize, idx: usize) -> usize {
        (k - 1) * self.cells + idx
    }

    pub fn terminal(&self, idx: usize) -> usize {
        self.horizon * self.cells + idx
    }

    pub fn recursion(&self, k: usize, idx: usize) -> usize {
        (self.horizon + 1) * self.cells + (k - 1) * self.cells + idx
    }

    /// Row of the concavity constraint centred at interior `i0` of slab `slab`.
    pub fn concavity(&self, k: usize, slab: usize, i0: usize, m: usize) -> usize {
        2 * self.horizon * self.cells + (k - 1) * self.concavity_per_step + slab * (m - 2) + i0 - 1
    }

    pub fn num_rows(&self) -> usize {
        2 * self.horizon * self.cells + self.horizon * self.concavity_per_step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLP {
    /// Minimised.
    pub objective: Vec<f64>,
    pub triplets: Vec<Triplet>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub row_tags: Vec<RowTag>,
    pub directory: Option<VariableDirectory>,
    pub layout: Option<RowLayout>,
    /// Hash of the mesh the LP was built on.
    pub mesh_hash: Option<String>,
}

impl SparseLP {
    /// An LP without grid semantics, e.g. for tests or external files.
    pub fn generic(
        objective: Vec<f64>,
        triplets: Vec<Triplet>,
        senses: Vec<Sense>,
        rhs: Vec<f64>,
        var_lower: Vec<f64>,
        var_upper: Vec<f64>,
    ) -> Result<Self> {
        let row_tags = (0..senses.len()).map(RowTag::Other).collect();
        let lp = Self {
            objective,
            triplets,
            senses,
            rhs,
            var_lower,
            var_upper,
            row_tags,
            directory: None,
            layout: None,
            mesh_hash: None,
        };
        lp.check()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    /// Structural checks: lengths agree, indices in range, numbers finite.
    pub fn check(&self) -> Result<()> {
        let (nv, nr) = (self.num_vars(), self.num_rows());
        if self.rhs.len() != nr || self.row_tags.len() != nr {
            return Err(Error::WellFormedness("row arrays disagree in length".into()));
        }
        if self.var_lower.len() != nv || self.var_upper.len() != nv {
            return Err(Error::WellFormedness("bound arrays disagree in length".into()));
        }
        if let Some(t) = self
            .triplets
            .iter()
            .find(|t| t.row as usize >= nr || t.col as usize >= nv || !t.coeff.is_finite())
        {
            return Err(Error::WellFormedness(format!(
                "triplet ({}, {}, {}) out of range or not finite",
                t.row, t.col, t.coeff
            )));
        }
        if self.rhs.iter().chain(&self.objective).any(|v| !v.is_finite()) {
            return Err(Error::WellFormedness("non-finite rhs or cost".into()));
        }
        if self
            .var_lower
            .iter()
            .zip(&self.var_upper)
            .any(|(l, u)| l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY)
        {
            return Err(Error::WellFormedness("inconsistent variable bounds".into()));
        }
        Ok(())
    }

    /// `A x`, computed from the triplets.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for t in &self.triplets {
            out[t.row as usize] += t.coeff * x[t.col as usize];
        }
        out
    }

    /// `Aᵀ y`.
    pub fn transpose_times(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for t in &self.triplets {
            out[t.col as usize] += t.coeff * y[t.row as usize];
        }
        out
    }

    /// Writes the constraint matrix as `row,col,coeff` CSV.
    pub fn write_triplets_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "row,col,coeff")?;
        for t in &self.triplets {
            writeln!(w, "{},{},{}", t.row, t.col, t.coeff)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Triplets sorted by `(row, col)`, for comparisons.
    pub fn sorted_triplets(&self) -> Vec<Triplet> {
        let mut t = self.triplets.clone();
        t.sort_by_key(|e| (e.row, e.col));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub cell_cap: usize,
    pub execution: Execution,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            cell_cap: DEFAULT_CELL_CAP,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpDimensions {
    pub num_vars: usize,
    pub num_rows: usize,
    pub nnz: usize,
}

fn checked_shape(spec: &ValidatedSpec, mesh: &Mesh, cap: usize) -> Result<GridShape> {
    let shape = GridShape::new(mesh.len(), spec.memory());
    match shape.checked_cells() {
        Some(c) if c <= cap => Ok(shape),
        Some(c) => Err(Error::OverflowGuard { cells: c, cap }),
        None => Err(Error::OverflowGuard {
            cells: usize::MAX,
            cap,
        }),
    }
}

/// Interpolation weights of the initial point on the grid, as flat indices.
pub fn initial_weights(spec: &ValidatedSpec, mesh: &Mesh) -> Result<Vec<(usize, f64)>> {
    let d = spec.memory();
    let point = spec.history().start_point(d);
    let w = interpolation_weights(mesh, &point).map_err(|e| match e {
        Error::PointOutsideHull { value, lo, hi } => Error::HistoryOutsideHull { value, lo, hi },
        other => other,
    })?;
    Ok(w.entries.iter().map(|e| (e.flat, e.weight)).collect())
}

/// Constraint values `g_k(y_i)` for every node, `m × p_k` row-major.
fn constraint_table(spec: &ValidatedSpec, mesh: &Mesh, k: usize) -> Vec<f64> {
    let block = spec.constraints(k);
    let pk = block.dimension();
    let mut out = vec![0.0; mesh.len() * pk];
    if pk > 0 {
        for (i, y) in mesh.points().iter().enumerate() {
            block.fill(*y, &mut out[i * pk..(i + 1) * pk]);
        }
    }
    out
}

/// Exact LP size without materialising the triplets.
pub fn lp_dimensions(spec: &ValidatedSpec, mesh: &Mesh, opts: &BuildOptions) -> Result<LpDimensions> {
    let shape = checked_shape(spec, mesh, opts.cell_cap)?;
    initial_weights(spec, mesh)?;
    let n = spec.horizon();
    let m = shape.m;
    let slabs = shape.slab_count();
    let layout = RowLayout::new(&shape, n);
    let p = spec.constraint_dimension();
    let cells = shape.cells();
    let mut nnz = 0;
    for k in 1..=n {
        let g = constraint_table(spec, mesh, k);
        let g_nnz = g.iter().filter(|v| **v != 0.0).count();
        nnz += cells + g_nnz * slabs;
    }
    nnz += 2 * cells + 3 * (n - 1) * cells + 3 * n * (m - 2) * slabs;
    Ok(LpDimensions {
        num_vars: p + 2 * n * cells,
        num_rows: layout.num_rows(),
        nnz,
    })
}

/// Builds the super-replication LP for `spec` on `mesh`.
pub fn build_dual_lp(spec: &ValidatedSpec, mesh: &Mesh, opts: &BuildOptions) -> Result<SparseLP> {
    let shape = checked_shape(spec, mesh, opts.cell_cap)?;
    let gamma = initial_weights(spec, mesh)?;
    let n = spec.horizon();
    let m = shape.m;
    let cells = shape.cells();
    let slabs = shape.slab_count();
    let p_per: Vec<usize> = (1..=n).map(|k| spec.constraints(k).dimension()).collect();
    let dir = VariableDirectory::new(&p_per, shape);
    let layout = RowLayout::new(&shape, n);
    let num_rows = layout.num_rows();
    if dir.num_vars() > u32::MAX as usize || num_rows > u32::MAX as usize {
        return Err(Error::OverflowGuard {
            cells,
            cap: opts.cell_cap,
        });
    }

    let mut objective = vec![0.0; dir.num_vars()];
    for &(flat, w) in &gamma {
        objective[dir.phi(1, flat)] += w;
    }

    let coeffs: Vec<(f64, f64, f64)> = (1..m - 1)
        .map(|i0| second_diff_row(mesh, i0))
        .collect::<Result<_>>()?;

    // One chunk per time step and family, assembled in row order.
    let exec = opts.execution;
    let hdef: Vec<Result<(Vec<Triplet>, Vec<f64>)>> = exec.map_range(n, |k0| {
        let k = k0 + 1;
        let f = spec.objective(k).sample_grid(mesh, spec.memory())?;
        let g = constraint_table(spec, mesh, k);
        let pk = p_per[k0];
        let lam = dir.lambda_range(k).start;
        let mut t = Vec::with_capacity(cells * (1 + pk));
        for idx in 0..cells {
            let row = layout.hdef(k, idx) as u32;
            t.push(Triplet {
                row,
                col: dir.h(k, idx) as u32,
                coeff: 1.0,
            });
            let i0 = idx % m;
            for (j, &gv) in g[i0 * pk..(i0 + 1) * pk].iter().enumerate() {
                if gv != 0.0 {
                    t.push(Triplet {
                        row,
                        col: (lam + j) as u32,
                        coeff: -gv,
                    });
                }
            }
        }
        Ok((t, f))
    });
    let chains: Vec<Vec<Triplet>> = exec.map_range(n, |k0| {
        let k = k0 + 1;
        let mut t = Vec::with_capacity(3 * cells);
        for idx in 0..cells {
            let (row, tail) = if k == n {
                (layout.terminal(idx), None)
            } else {
                (layout.recursion(k, idx), Some(dir.phi(k + 1, shape.shift(idx))))
            };
            let row = row as u32;
            t.push(Triplet {
                row,
                col: dir.phi(k, idx) as u32,
                coeff: 1.0,
            });
            t.push(Triplet {
                row,
                col: dir.h(k, idx) as u32,
                coeff: -1.0,
            });
            if let Some(c) = tail {
                t.push(Triplet {
                    row,
                    col: c as u32,
                    coeff: -1.0,
                });
            }
        }
        t
    });
    let concave: Vec<Vec<Triplet>> = exec.map_range(n, |k0| {
        let k = k0 + 1;
        let mut t = Vec::with_capacity(3 * layout.concavity_per_step);
        for slab in 0..slabs {
            for i0 in 1..m - 1 {
                let row = layout.concavity(k, slab, i0, m) as u32;
                let (c_plus, c_mid, c_minus) = coeffs[i0 - 1];
                let base = dir.phi(k, slab * m + i0);
                for (col, coeff) in [(base + 1, c_plus), (base, c_mid), (base - 1, c_minus)] {
                    t.push(Triplet {
                        row,
                        col: col as u32,
                        coeff,
                    });
                }
            }
        }
        t
    });

    let mut rhs = vec![0.0; num_rows];
    let mut senses = vec![Sense::Ge; num_rows];
    let mut row_tags = Vec::with_capacity(num_rows);
    let mut triplets = Vec::new();
    for (k0, chunk) in hdef.into_iter().enumerate() {
        let (t, f) = chunk?;
        let base = layout.hdef(k0 + 1, 0);
        rhs[base..base + cells].copy_from_slice(&f);
        senses[base..base + cells].fill(Sense::Eq);
        triplets.extend(t);
        row_tags.extend((0..cells).map(|idx| RowTag::HDef { k: k0 + 1, idx }));
    }
    // Terminal rows come before the recursion rows in row order.
    let mut chains = chains;
    let terminal = chains.pop().unwrap();
    triplets.extend(terminal);
    row_tags.extend((0..cells).map(|idx| RowTag::Terminal { idx }));
    for (k0, t) in chains.into_iter().enumerate() {
        triplets.extend(t);
        row_tags.extend((0..cells).map(|idx| RowTag::Recursion { k: k0 + 1, idx }));
    }
    for (k0, t) in concave.into_iter().enumerate() {
        triplets.extend(t);
        for slab in 0..slabs {
            row_tags.extend((1..m - 1).map(|i0| RowTag::Concavity {
                k: k0 + 1,
                idx: slab * m + i0,
            }));
        }
    }

    let p = dir.num_lambda();
    let mut var_lower = vec![f64::NEG_INFINITY; dir.num_vars()];
    var_lower[..p].fill(0.0);
    let lp = SparseLP {
        objective,
        triplets,
        senses,
        rhs,
        var_lower,
        var_upper: vec![f64::INFINITY; dir.num_vars()],
        row_tags,
        directory: Some(dir),
        layout: Some(layout),
        mesh_hash: Some(mesh.content_hash()),
    };
    debug_assert!(lp.check().is_ok());
    Ok(lp)
}

/// A feasible point of the LP built from the affine majorants found during
/// validation: λ = 0, h = f and φ^k equal to the sum of the witnesses of
/// steps `k..n`, each evaluated with its window collapsed onto the current
/// coordinate. Returns `None` when some payoff has no witness.
pub fn witness_point(spec: &ValidatedSpec, mesh: &Mesh) -> Result<Option<Vec<f64>>> {
    if spec.witnesses.iter().any(Option::is_none) {
        return Ok(None);
    }
    let n = spec.horizon();
    let shape = GridShape::new(mesh.len(), spec.memory());
    let p: Vec<usize> = (1..=n).map(|k| spec.constraints(k).dimension()).collect();
    let dir = VariableDirectory::new(&p, shape);
    let mut x = vec![0.0; dir.num_vars()];
    let mut idx = vec![0; shape.dims];
    let mut y = vec![0.0; shape.dims];
    for k in 1..=n {
        let f = spec.objective(k).sample_grid(mesh, spec.memory())?;
        let h0 = dir.h_offset(k);
        x[h0..h0 + shape.cells()].copy_from_slice(&f);
    }
    for flat in 0..shape.cells() {
        shape.unflatten(flat, &mut idx);
        for (v, &i) in y.iter_mut().zip(&idx) {
            *v = mesh.points()[i];
        }
        // Witness of step j evaluated on the window that step j will see if
        // the price stays at y_0 from step k on.
        for k in 1..=n {
            let mut total = 0.0;
            for j in k..=n {
                let w = spec.witnesses[j - 1].as_ref().unwrap();
                let lag = j - k;
                let window: Vec<f64> = (0..shape.dims)
                    .map(|c| if c <= lag { y[0] } else { y[c - lag] })
                    .collect();
                total += w.value(&window);
            }
            x[dir.phi(k, flat)] = total;
        }
    }
    Ok(Some(x))
}
