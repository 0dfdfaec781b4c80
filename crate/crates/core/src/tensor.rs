//! Dense third-order tensors and the multilinear primitives used by every
//! algorithm in the crate.
//!
//! Values are stored in a single buffer with the mode-3 index running
//! fastest: entry `(i, j, k)` of a `d1 × d2 × d3` tensor lives at
//! `(i * d2 + j) * d3 + k`.
//!
//! Matricization follows the classical fiber ordering: in the mode-`n`
//! unfolding the remaining indices are flattened with the lower-numbered mode
//! varying fastest, so that
//!
//! ```text
//! T(1) = A Λ (C ⊙ B)ᵀ,   T(2) = B Λ (C ⊙ A)ᵀ,   T(3) = C Λ (B ⊙ A)ᵀ
//! ```
//!
//! for `T = Σ λᵢ aᵢ ⊗ bᵢ ⊗ cᵢ`, where [`khatri_rao`] stacks `a_{·j} ⊗ b_{·j}`
//! with the second factor's row index fastest.

use std::fmt::Write as _;
use std::ops::{Add, Sub};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// The six index permutations of an order-3 tensor.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Dense order-3 tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    /// Wraps a buffer laid out mode-3 fastest.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {dims:?}"
            )));
        }
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} values supplied for a {}x{}x{} tensor",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        Ok(Self { dims, data })
    }

    /// Builds a tensor by evaluating `f(i, j, k)` at every index.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.offset(i, j, k);
        self.data[idx] = value;
    }

    pub fn is_cubical(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    /// Returns the common mode size, or `NotCubical`.
    pub fn cubical_dim(&self) -> Result<usize> {
        if self.is_cubical() {
            Ok(self.dims[0])
        } else {
            Err(Error::NotCubical(self.dims))
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += weight · a ⊗ b ⊗ c`.
    pub fn add_rank_one(&mut self, weight: f64, a: &[f64], b: &[f64], c: &[f64]) {
        assert_eq!(a.len(), self.dims[0]);
        assert_eq!(b.len(), self.dims[1]);
        assert_eq!(c.len(), self.dims[2]);
        let d3 = self.dims[2];
        for (i, &ai) in a.iter().enumerate() {
            let wa = weight * ai;
            if wa == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                let wab = wa * bj;
                let start = (i * self.dims[1] + j) * d3;
                for (dst, &ck) in self.data[start..start + d3].iter_mut().zip(c) {
                    *dst += wab * ck;
                }
            }
        }
    }

    /// Tensor with indices rearranged so that `out[j0, j1, j2] = self[i]`
    /// where `i[perm[m]] = j_m`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let dims = [self.dims[perm[0]], self.dims[perm[1]], self.dims[perm[2]]];
        Self::from_fn(dims, |a, b, c| {
            let mut idx = [0usize; 3];
            idx[perm[0]] = a;
            idx[perm[1]] = b;
            idx[perm[2]] = c;
            self.get(idx[0], idx[1], idx[2])
        })
    }

    /// Largest elementwise deviation from full index symmetry.
    pub fn max_asymmetry(&self) -> Result<f64> {
        self.cubical_dim()?;
        let mut worst = 0.0f64;
        for perm in &PERMUTATIONS[1..] {
            let p = self.permuted(*perm);
            for (x, y) in self.data.iter().zip(&p.data) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// `max over index permutations of ‖T − T^perm‖_F / ‖T‖_F`; zero for the
    /// zero tensor.
    pub fn relative_asymmetry(&self) -> Result<f64> {
        self.cubical_dim()?;
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let worst = PERMUTATIONS[1..]
            .iter()
            .map(|perm| (self - &self.permuted(*perm)).frobenius_norm())
            .fold(0.0, f64::max);
        Ok(worst / norm)
    }

    /// `T(I, y, z)`: contraction of modes 2 and 3 against vectors.
    pub fn contract_modes_23(&self, y: &[f64], z: &[f64]) -> Vector {
        let [d1, d2, d3] = self.dims;
        assert_eq!(y.len(), d2);
        assert_eq!(z.len(), d3);
        Vector::from_fn(d1, |i, _| {
            let mut acc = 0.0;
            for (j, &yj) in y.iter().enumerate() {
                let start = (i * d2 + j) * d3;
                let fiber = &self.data[start..start + d3];
                acc += yj * dot(fiber, z);
            }
            acc
        })
    }

    /// `T(x, I, z)`: contraction of modes 1 and 3 against vectors.
    pub fn contract_modes_13(&self, x: &[f64], z: &[f64]) -> Vector {
        let [d1, d2, d3] = self.dims;
        assert_eq!(x.len(), d1);
        assert_eq!(z.len(), d3);
        let mut out = Vector::zeros(d2);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for j in 0..d2 {
                let start = (i * d2 + j) * d3;
                out[j] += xi * dot(&self.data[start..start + d3], z);
            }
        }
        out
    }

    /// `T(x, y, I)`: contraction of modes 1 and 2 against vectors.
    pub fn contract_modes_12(&self, x: &[f64], y: &[f64]) -> Vector {
        let [d1, d2, d3] = self.dims;
        assert_eq!(x.len(), d1);
        assert_eq!(y.len(), d2);
        let mut out = Vector::zeros(d3);
        for (i, &xi) in x.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                let w = xi * yj;
                if w == 0.0 {
                    continue;
                }
                let start = (i * d2 + j) * d3;
                for (o, &t) in out.iter_mut().zip(&self.data[start..start + d3]) {
                    *o += w * t;
                }
            }
        }
        out
    }

    /// Full contraction `T(x, y, z)`.
    pub fn contract_all(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        dot(self.contract_modes_23(y, z).as_slice(), x)
    }

    /// `T(I, I, v)`, the `d1 × d2` mix of frontal slices.
    pub fn contract_mode3(&self, v: &[f64]) -> Matrix {
        let [d1, d2, d3] = self.dims;
        assert_eq!(v.len(), d3);
        Matrix::from_fn(d1, d2, |i, j| {
            let start = (i * d2 + j) * d3;
            dot(&self.data[start..start + d3], v)
        })
    }

    /// `T(v, I, I)`, a `d2 × d3` matrix.
    pub fn contract_mode1(&self, v: &[f64]) -> Matrix {
        let [d1, d2, d3] = self.dims;
        assert_eq!(v.len(), d1);
        let mut out = Matrix::zeros(d2, d3);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for j in 0..d2 {
                for k in 0..d3 {
                    out[(j, k)] += vi * self.data[(i * d2 + j) * d3 + k];
                }
            }
        }
        out
    }

    /// `T(I, v, I)`, a `d1 × d3` matrix.
    pub fn contract_mode2(&self, v: &[f64]) -> Matrix {
        let [d1, d2, d3] = self.dims;
        assert_eq!(v.len(), d2);
        let mut out = Matrix::zeros(d1, d3);
        for i in 0..d1 {
            for (j, &vj) in v.iter().enumerate() {
                if vj == 0.0 {
                    continue;
                }
                for k in 0..d3 {
                    out[(i, k)] += vj * self.data[(i * d2 + j) * d3 + k];
                }
            }
        }
        out
    }

    /// Mode-`n` product with the columns of `m`: the `n`-th index is
    /// replaced by `p` and summed against `m[(a, p)]`.
    pub fn mode_product(&self, mode: usize, m: &Matrix) -> Result<Tensor3> {
        check_mode(mode)?;
        let n = mode - 1;
        if m.nrows() != self.dims[n] {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} matrix has {} rows, tensor mode size is {}",
                m.nrows(),
                self.dims[n]
            )));
        }
        if m.ncols() == 0 {
            return Err(Error::InvalidArgument("contraction matrix has no columns".into()));
        }
        let mut dims = self.dims;
        dims[n] = m.ncols();
        let mut out = Tensor3::zeros(dims);
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    let t = self.get(i, j, k);
                    if t == 0.0 {
                        continue;
                    }
                    let src = [i, j, k];
                    for p in 0..m.ncols() {
                        let mut idx = src;
                        idx[n] = p;
                        let o = out.offset(idx[0], idx[1], idx[2]);
                        out.data[o] += t * m[(src[n], p)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `T(Ma, Mb, Mc)_{ijk} = Σ T_abc Ma_ai Mb_bj Mc_ck`.
    pub fn multilinear(&self, ma: &Matrix, mb: &Matrix, mc: &Matrix) -> Result<Tensor3> {
        self.mode_product(3, mc)?.mode_product(2, mb)?.mode_product(1, ma)
    }

    /// Mode-`n` unfolding; shape `d_n × (product of the other dims)`.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        check_mode(mode)?;
        let [d1, d2, d3] = self.dims;
        let out = match mode {
            1 => Matrix::from_fn(d1, d2 * d3, |i, col| self.get(i, col % d2, col / d2)),
            2 => Matrix::from_fn(d2, d1 * d3, |j, col| self.get(col % d1, j, col / d1)),
            _ => Matrix::from_fn(d3, d1 * d2, |k, col| self.get(col % d1, col / d1, k)),
        };
        Ok(out)
    }

    /// Gram matrix `T(n) T(n)ᵀ` of the mode-`n` unfolding.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix> {
        check_mode(mode)?;
        let [d1, d2, d3] = self.dims;
        let gram = match mode {
            1 => {
                let x = Matrix::from_row_slice(d1, d2 * d3, &self.data);
                &x * x.transpose()
            }
            2 => {
                let mut acc = Matrix::zeros(d2, d2);
                for i in 0..d1 {
                    let start = i * d2 * d3;
                    let s = Matrix::from_row_slice(d2, d3, &self.data[start..start + d2 * d3]);
                    acc += &s * s.transpose();
                }
                acc
            }
            _ => {
                let y = Matrix::from_row_slice(d1 * d2, d3, &self.data);
                y.transpose() * y
            }
        };
        Ok(gram)
    }

    /// Reads the whitespace text format: a `d1 d2 d3` header line followed by
    /// the values in storage order.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .by_ref()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse("empty tensor file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad dimension {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse(format!(
                "header must hold three dimensions, found {}",
                dims.len()
            )));
        }
        let mut data = Vec::with_capacity(dims.iter().product());
        for line in lines {
            for tok in line.split_whitespace() {
                let v = tok
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad value {tok:?}: {e}")))?;
                data.push(v);
            }
        }
        Self::from_vec([dims[0], dims[1], dims[2]], data)
    }

    /// Writes the text format; values use the shortest representation that
    /// parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let [d1, d2, d3] = self.dims;
        let mut out = String::with_capacity(self.data.len() * 24 + 32);
        let _ = writeln!(out, "{d1} {d2} {d3}");
        for row in self.data.chunks(d3) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, rhs.dims, "tensor dimensions differ");
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, rhs.dims, "tensor dimensions differ");
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(Error::InvalidMode(mode))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a ⊗ b ⊗ c`.
pub fn outer3(a: &[f64], b: &[f64], c: &[f64]) -> Tensor3 {
    let mut t = Tensor3::zeros([a.len(), b.len(), c.len()]);
    t.add_rank_one(1.0, a, b, c);
    t
}

/// Column-wise Kronecker product. Column `j` of the `mn × p` result is
/// `a_j ⊗ b_j`, with the row index of `b` varying fastest.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Khatri-Rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (m, n) = (a.nrows(), b.nrows());
    Ok(Matrix::from_fn(m * n, a.ncols(), |row, col| {
        a[(row / n, col)] * b[(row % n, col)]
    }))
}

/// Lower-bound estimate of the tensor operator norm
/// `max |T(x, y, z)|` over unit vectors.
///
/// Runs alternating rank-one maximization from a spectral start (dominant
/// eigenvectors of the mode-2 and mode-3 Gram matrices) and from `restarts`
/// Gaussian starts, keeping the best value. Exact for rank-one and orthogonal
/// CP tensors.
pub fn op_norm_estimate<R: Rng + ?Sized>(t: &Tensor3, max_iters: usize, restarts: usize, rng: &mut R) -> f64 {
    let max_iters = max_iters.max(1);
    if t.frobenius_norm() == 0.0 {
        return 0.0;
    }
    let [_, d2, d3] = t.dims();
    let mut best = 0.0f64;

    let spectral_y = t.mode_gram(2).ok().and_then(dominant_eigenvector);
    let spectral_z = t.mode_gram(3).ok().and_then(dominant_eigenvector);
    if let (Some(y), Some(z)) = (spectral_y, spectral_z) {
        best = best.max(alternating_rank_one(t, y, z, max_iters));
    }
    for _ in 0..restarts {
        let y = random_unit(d2, rng);
        let z = random_unit(d3, rng);
        best = best.max(alternating_rank_one(t, y, z, max_iters));
    }
    best
}

fn alternating_rank_one(t: &Tensor3, mut y: Vector, mut z: Vector, max_iters: usize) -> f64 {
    let mut value = 0.0f64;
    for _ in 0..max_iters {
        let mut x = t.contract_modes_23(y.as_slice(), z.as_slice());
        if !normalize(&mut x) {
            return value;
        }
        y = t.contract_modes_13(x.as_slice(), z.as_slice());
        if !normalize(&mut y) {
            return value;
        }
        z = t.contract_modes_12(x.as_slice(), y.as_slice());
        let next = z.norm();
        if next == 0.0 {
            return value;
        }
        z /= next;
        let done = (next - value).abs() <= 1e-15 * next;
        value = value.max(next);
        if done {
            break;
        }
    }
    value
}

fn dominant_eigenvector(gram: Matrix) -> Option<Vector> {
    let eig = SymmetricEigen::new(gram);
    let (idx, _) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    Some(eig.eigenvectors.column(idx).into_owned())
}

pub(crate) fn normalize(v: &mut Vector) -> bool {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    *v /= n;
    true
}

/// Uniformly distributed unit vector.
pub fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let mut v = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        if normalize(&mut v) {
            return v;
        }
    }
}

/// Tensor with i.i.d. standard normal entries.
pub fn random_gaussian_tensor<R: Rng + ?Sized>(dims: [usize; 3], rng: &mut R) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| StandardNormal.sample(rng))
}
