//! Construction of block-diagonal affine matrix functions from matrix
//! expressions in named internal variables, e.g.
//! `[[(P·A, ⋆) + CᵀC, P·B], [⋆, -γ²I]] ≺ λI`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::amf::{AffineMatrixFunction, AmfBlock, InternalKind, InternalVariable};
use crate::error::{Error, Result};

/// Handle to an internal variable declared on an [`LmiBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Debug, Clone)]
struct Term {
    left: DMatrix<f64>,
    var: Var,
    transposed: bool,
    right: DMatrix<f64>,
}

/// Matrix expression `C + Σ L_k·V_k·R_k` (or `L_k·V_kᵀ·R_k`).
#[derive(Debug, Clone)]
pub struct Affine {
    rows: usize,
    cols: usize,
    constant: DMatrix<f64>,
    terms: Vec<Term>,
}

impl Affine {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), constant: m, terms: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn var(v: Var) -> Self {
        Self::product(&DMatrix::identity(v.rows, v.rows), v, &DMatrix::identity(v.cols, v.cols))
    }

    /// `left · V · right`.
    pub fn product(left: &DMatrix<f64>, v: Var, right: &DMatrix<f64>) -> Self {
        assert_eq!(left.ncols(), v.rows, "left factor does not match variable rows");
        assert_eq!(right.nrows(), v.cols, "right factor does not match variable cols");
        let (rows, cols) = (left.nrows(), right.ncols());
        Self {
            rows,
            cols,
            constant: DMatrix::zeros(rows, cols),
            terms: vec![Term { left: left.clone(), var: v, transposed: false, right: right.clone() }],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    left: t.right.transpose(),
                    var: t.var,
                    transposed: !t.transposed,
                    right: t.left.transpose(),
                })
                .collect(),
        }
    }

    /// The induced symmetric part `(M, ⋆) = M + Mᵀ`.
    pub fn sym(&self) -> Self {
        assert_eq!(self.rows, self.cols, "(M, *) needs a square expression");
        self.clone() + self.transpose()
    }

    pub fn left_mul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.rows);
        Self {
            rows: m.nrows(),
            cols: self.cols,
            constant: m * &self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| Term { left: m * &t.left, ..t.clone() })
                .collect(),
        }
    }

    pub fn right_mul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), self.cols);
        Self {
            rows: self.rows,
            cols: m.ncols(),
            constant: &self.constant * m,
            terms: self
                .terms
                .iter()
                .map(|t| Term { right: &t.right * m, ..t.clone() })
                .collect(),
        }
    }

    /// Coefficient of one basis direction of variable `v`.
    fn coefficient(&self, v: Var, basis: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let mut acc: Option<DMatrix<f64>> = None;
        for t in self.terms.iter().filter(|t| t.var.id == v.id) {
            let c = if t.transposed {
                &t.left * basis.transpose() * &t.right
            } else {
                &t.left * basis * &t.right
            };
            acc = Some(match acc {
                Some(a) => a + c,
                None => c,
            });
        }
        acc
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        assert_eq!(self.shape(), rhs.shape(), "adding expressions of different shapes");
        self.constant += rhs.constant;
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + (-rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self * -1.0
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(mut self, s: f64) -> Affine {
        self.constant *= s;
        for t in &mut self.terms {
            t.left *= s;
        }
        self
    }
}

/// Accumulates internal variables and diagonal blocks.
#[derive(Debug, Default)]
pub struct LmiBuilder {
    structure: Vec<InternalVariable>,
    offsets: Vec<usize>,
    vars: Vec<Var>,
    dim: usize,
    blocks: Vec<AmfBlock>,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: &str, kind: InternalKind) -> Var {
        let (rows, cols) = kind.shape();
        let v = Var { id: self.vars.len(), rows, cols };
        self.offsets.push(self.dim);
        self.dim += kind.slots();
        self.structure.push(InternalVariable { name: name.to_string(), kind });
        self.vars.push(v);
        v
    }

    pub fn scalar(&mut self, name: &str) -> Var {
        self.declare(name, InternalKind::Scalar)
    }

    pub fn symmetric(&mut self, name: &str, order: usize) -> Var {
        self.declare(name, InternalKind::Symmetric(order))
    }

    pub fn general(&mut self, name: &str, rows: usize, cols: usize) -> Var {
        self.declare(name, InternalKind::General { rows, cols })
    }

    pub fn internal_dim(&self) -> usize {
        self.dim
    }

    /// Adds the constraint `expr ≺ λI` for a square symmetric expression.
    pub fn add(&mut self, expr: Affine) -> Result<()> {
        self.add_grid(vec![vec![expr]])
    }

    /// Adds a block given by its lower triangle: `rows[i][j]` for `j ≤ i`.
    /// The upper triangle is the transpose.
    pub fn add_grid(&mut self, rows: Vec<Vec<Affine>>) -> Result<()> {
        let k = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != i + 1 {
                return Err(Error::structural(format!(
                    "block row {i} has {} entries, expected {}",
                    r.len(),
                    i + 1
                )));
            }
        }
        let sizes: Vec<usize> = (0..k).map(|i| rows[i][i].rows).collect();
        for i in 0..k {
            for j in 0..=i {
                if rows[i][j].shape() != (sizes[i], sizes[j]) {
                    return Err(Error::structural(format!(
                        "sub-block ({i}, {j}) has shape {:?}, expected ({}, {})",
                        rows[i][j].shape(),
                        sizes[i],
                        sizes[j]
                    )));
                }
            }
        }
        let starts: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                let st = *acc;
                *acc += s;
                Some(st)
            })
            .collect();
        let n: usize = sizes.iter().sum();

        let place = |target: &mut DMatrix<f64>, i: usize, j: usize, m: &DMatrix<f64>| {
            target.view_mut((starts[i], starts[j]), m.shape()).copy_from(m);
            if i != j {
                target.view_mut((starts[j], starts[i]), (m.ncols(), m.nrows())).copy_from(&m.transpose());
            }
        };

        let mut constant = DMatrix::zeros(n, n);
        for i in 0..k {
            for j in 0..=i {
                place(&mut constant, i, j, &rows[i][j].constant);
            }
        }

        let mut terms = Vec::new();
        for (vi, v) in self.vars.iter().enumerate() {
            let kind = &self.structure[vi].kind;
            for s in 0..kind.slots() {
                let basis = kind.basis(s);
                let mut coeff = DMatrix::zeros(n, n);
                let mut touched = false;
                for i in 0..k {
                    for j in 0..=i {
                        if let Some(c) = rows[i][j].coefficient(*v, &basis) {
                            place(&mut coeff, i, j, &c);
                            touched = true;
                        }
                    }
                }
                if touched && coeff.amax() > 0.0 {
                    terms.push((self.offsets[vi] + s, coeff));
                }
            }
        }
        self.blocks.push(AmfBlock::new(constant, terms));
        Ok(())
    }

    pub fn build(self) -> Result<AffineMatrixFunction> {
        AffineMatrixFunction::new(self.dim, self.structure, self.blocks)
    }
}
