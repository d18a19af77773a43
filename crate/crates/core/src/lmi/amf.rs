use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, max_eig_sym, symmetrize};

/// Shape of one named internal variable inside the vectorized `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum InternalKind {
    Scalar,
    /// Symmetric matrix of the given order, vectorized over its upper
    /// triangle row by row. Off-diagonal slots carry plain duplication: the
    /// coefficient of slot `(i, j)` is `E_ij + E_ji`, no √2 scaling.
    Symmetric(usize),
    /// Unstructured matrix, vectorized row-major.
    General { rows: usize, cols: usize },
}

impl InternalKind {
    pub fn slots(&self) -> usize {
        match *self {
            InternalKind::Scalar => 1,
            InternalKind::Symmetric(k) => k * (k + 1) / 2,
            InternalKind::General { rows, cols } => rows * cols,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            InternalKind::Scalar => (1, 1),
            InternalKind::Symmetric(k) => (k, k),
            InternalKind::General { rows, cols } => (rows, cols),
        }
    }

    /// Basis matrix of slot `s` (0-based within this variable).
    pub fn basis(&self, s: usize) -> DMatrix<f64> {
        let (r, c) = self.shape();
        let mut e = DMatrix::zeros(r, c);
        match *self {
            InternalKind::Scalar => e[(0, 0)] = 1.0,
            InternalKind::Symmetric(k) => {
                let (i, j) = upper_index(k, s);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
            }
            InternalKind::General { cols, .. } => e[(s / cols, s % cols)] = 1.0,
        }
        e
    }

    /// Rebuilds the matrix value from its slots.
    pub fn unpack(&self, slots: &[f64]) -> DMatrix<f64> {
        let (r, c) = self.shape();
        let mut m = DMatrix::zeros(r, c);
        for (s, &v) in slots.iter().enumerate() {
            m += self.basis(s) * v;
        }
        m
    }
}

fn upper_index(k: usize, mut s: usize) -> (usize, usize) {
    for i in 0..k {
        let row_len = k - i;
        if s < row_len {
            return (i, i + s);
        }
        s -= row_len;
    }
    panic!("slot index out of range for symmetric order {k}");
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalVariable {
    pub name: String,
    pub kind: InternalKind,
}

/// One diagonal block `F0 + Σ x_i F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmfBlock {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AmfBlock {
    pub fn new(constant: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>) -> Self {
        Self { constant, terms }
    }

    pub fn order(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (i, f) in &self.terms {
            m += f * x[*i];
        }
        m
    }
}

/// Block-diagonal symmetric affine map `x ↦ diag_b(F0_b + Σ x_i F_i_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixFunction {
    blocks: Vec<AmfBlock>,
    internal_dim: usize,
    internal_structure: Vec<InternalVariable>,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl AffineMatrixFunction {
    /// Validates shapes and indices, rejects clearly non-symmetric
    /// coefficients and symmetrizes the rest.
    pub fn new(
        internal_dim: usize,
        internal_structure: Vec<InternalVariable>,
        blocks: Vec<AmfBlock>,
    ) -> Result<Self> {
        if !internal_structure.is_empty() {
            let slots: usize = internal_structure.iter().map(|v| v.kind.slots()).sum();
            if slots != internal_dim {
                return Err(Error::structural(format!(
                    "internal structure covers {slots} slots, internal_dim is {internal_dim}"
                )));
            }
        }
        let mut clean = Vec::with_capacity(blocks.len());
        for (b, block) in blocks.into_iter().enumerate() {
            let n = block.constant.nrows();
            if n == 0 || !block.constant.is_square() {
                return Err(Error::structural(format!(
                    "block {b} constant has shape {:?}",
                    block.constant.shape()
                )));
            }
            check_symmetric(&block.constant, b, None)?;
            let mut terms = Vec::with_capacity(block.terms.len());
            for (i, f) in block.terms {
                if i >= internal_dim {
                    return Err(Error::structural(format!(
                        "block {b} references internal index {i} >= {internal_dim}"
                    )));
                }
                if f.shape() != (n, n) {
                    return Err(Error::structural(format!(
                        "block {b} coefficient {i} has shape {:?}, expected ({n}, {n})",
                        f.shape()
                    )));
                }
                check_symmetric(&f, b, Some(i))?;
                terms.push((i, symmetrize(&f)));
            }
            clean.push(AmfBlock {
                constant: symmetrize(&block.constant),
                terms,
            });
        }
        Ok(Self {
            blocks: clean,
            internal_dim,
            internal_structure,
        })
    }

    pub fn blocks(&self) -> &[AmfBlock] {
        &self.blocks
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    pub fn internal_structure(&self) -> &[InternalVariable] {
        &self.internal_structure
    }

    pub fn total_order(&self) -> usize {
        self.blocks.iter().map(AmfBlock::order).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.evaluate(x)).collect()
    }

    /// `max_b λmax(F_b(x))`, i.e. the smallest λ with `F(x) ⪯ λI`.
    pub fn max_eigenvalue(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| max_eig_sym(&b.evaluate(x)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Appends a block over the same internal variable.
    pub fn with_block(mut self, block: AmfBlock) -> Result<Self> {
        let extra = Self::new(self.internal_dim, Vec::new(), vec![block])?;
        self.blocks.extend(extra.blocks);
        Ok(self)
    }

    /// Concatenates the blocks of two functions that share one internal
    /// variable vector.
    pub fn merge(mut self, other: AffineMatrixFunction) -> Result<Self> {
        if other.internal_dim != self.internal_dim {
            return Err(Error::structural("merging functions with different internal dimensions"));
        }
        self.blocks.extend(other.blocks);
        Ok(self)
    }

    /// Splits a solution vector into named matrices following the declared
    /// internal structure.
    pub fn unpack_internal(&self, x: &[f64]) -> Result<Vec<(String, DMatrix<f64>)>> {
        if x.len() != self.internal_dim {
            return Err(Error::structural(format!(
                "internal vector has {} entries, expected {}",
                x.len(),
                self.internal_dim
            )));
        }
        let mut off = 0;
        let mut out = Vec::with_capacity(self.internal_structure.len());
        for v in &self.internal_structure {
            let n = v.kind.slots();
            out.push((v.name.clone(), v.kind.unpack(&x[off..off + n])));
            off += n;
        }
        Ok(out)
    }
}

fn check_symmetric(m: &DMatrix<f64>, block: usize, term: Option<usize>) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        let what = match term {
            Some(i) => format!("coefficient {i}"),
            None => "constant".to_string(),
        };
        return Err(Error::structural(format!(
            "block {block} {what} is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}
