//! Dense operators between weighted sample spaces.
//!
//! Every operator in the pipeline (response, connecting, square root,
//! triangular factor, visualization, ...) is a matrix together with domain and
//! codomain descriptors. The descriptors carry the quadrature weight of the
//! composite-rectangle rule, which defines adjoints: `A* = w_cod/w_dom * A^T`.
//! With `dt = h` all weights coincide and adjoints are plain transposes; the
//! general formula is kept so the convention is explicit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// What a sample space discretizes; informational, not used in arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceLabel {
    Abstract,
    /// Controls on `[0, horizon]`, sampled at `t_1..t_n`.
    TimeWindow { horizon: f64 },
    /// Profiles on the wave-filled part of the interval, sampled at
    /// `origin, origin + h, ...`.
    SpaceInterval { origin: f64 },
}

/// A weighted sample space: `n` samples with quadrature weight `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceDesc {
    pub label: SpaceLabel,
    pub n: usize,
    pub weight: f64,
}

impl SpaceDesc {
    pub fn abstract_space(n: usize) -> Self {
        Self { label: SpaceLabel::Abstract, n, weight: 1.0 }
    }

    pub fn time_window(horizon: f64, n: usize, dt: f64) -> Self {
        Self { label: SpaceLabel::TimeWindow { horizon }, n, weight: dt }
    }

    pub fn space_interval(origin: f64, n: usize, h: f64) -> Self {
        Self { label: SpaceLabel::SpaceInterval { origin }, n, weight: h }
    }

    /// Compatibility for composition: same size and same weight.
    pub fn matches(&self, other: &SpaceDesc) -> bool {
        self.n == other.n
            && (self.weight - other.weight).abs() <= 1e-12 * self.weight.max(other.weight)
    }

    /// Weighted inner product of two vectors of this space.
    pub fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.weight * u.dot(v)
    }

    /// Weighted norm.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.weight.sqrt() * v.norm()
    }
}

/// Dense operator between weighted sample spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    pub mat: DMatrix<f64>,
    pub dom: SpaceDesc,
    pub cod: SpaceDesc,
}

impl LinOp {
    pub fn new(mat: DMatrix<f64>, dom: SpaceDesc, cod: SpaceDesc) -> Result<Self> {
        if mat.ncols() != dom.n || mat.nrows() != cod.n {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but spaces are cod {} x dom {}",
                mat.nrows(),
                mat.ncols(),
                cod.n,
                dom.n
            )));
        }
        Ok(Self { mat, dom, cod })
    }

    /// Operator on a single space.
    pub fn endomorphism(mat: DMatrix<f64>, space: SpaceDesc) -> Result<Self> {
        Self::new(mat, space, space)
    }

    pub fn identity(space: SpaceDesc) -> Self {
        Self { mat: DMatrix::identity(space.n, space.n), dom: space, cod: space }
    }

    pub fn zeros(dom: SpaceDesc, cod: SpaceDesc) -> Self {
        Self { mat: DMatrix::zeros(cod.n, dom.n), dom, cod }
    }

    pub fn is_square(&self) -> bool {
        self.dom.n == self.cod.n
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dom.n {
            return Err(Error::Dimension(format!(
                "vector of length {} fed to operator with domain {}",
                v.len(),
                self.dom.n
            )));
        }
        Ok(&self.mat * v)
    }

    /// Weighted adjoint: `A* = (w_cod / w_dom) A^T`, swapping the spaces.
    pub fn adjoint(&self) -> LinOp {
        let scale = self.cod.weight / self.dom.weight;
        LinOp { mat: scale * self.mat.transpose(), dom: self.cod, cod: self.dom }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &LinOp) -> Result<LinOp> {
        if !self.dom.matches(&rhs.cod) {
            return Err(Error::Dimension(format!(
                "composition mismatch: inner spaces {} (w={}) vs {} (w={})",
                self.dom.n, self.dom.weight, rhs.cod.n, rhs.cod.weight
            )));
        }
        Ok(LinOp { mat: &self.mat * &rhs.mat, dom: rhs.dom, cod: self.cod })
    }

    pub fn add(&self, rhs: &LinOp) -> Result<LinOp> {
        if !(self.dom.matches(&rhs.dom) && self.cod.matches(&rhs.cod)) {
            return Err(Error::Dimension("operator sum over different spaces".into()));
        }
        Ok(LinOp { mat: &self.mat + &rhs.mat, dom: self.dom, cod: self.cod })
    }

    pub fn sub(&self, rhs: &LinOp) -> Result<LinOp> {
        self.add(&rhs.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> LinOp {
        LinOp { mat: s * &self.mat, dom: self.dom, cod: self.cod }
    }

    /// Same matrix viewed between different spaces (a pure relabeling).
    pub fn relabel(&self, dom: SpaceDesc, cod: SpaceDesc) -> Result<LinOp> {
        LinOp::new(self.mat.clone(), dom, cod)
    }

    /// Spectral norm as an operator between the weighted spaces.
    pub fn norm(&self) -> f64 {
        (self.cod.weight / self.dom.weight).sqrt() * spectral_norm(&self.mat)
    }

    /// Relative symmetry defect `||A - A*|| / ||A||` (square operators).
    pub fn symmetry_defect(&self) -> f64 {
        let a = self.norm();
        if a == 0.0 {
            return 0.0;
        }
        let diff = &self.mat - self.adjoint().mat;
        spectral_norm(&diff) / spectral_norm(&self.mat)
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // singular values only; cheaper and always converges in nalgebra
    m.clone().singular_values().iter().fold(0.0, |a, s| a.max(*s))
}
