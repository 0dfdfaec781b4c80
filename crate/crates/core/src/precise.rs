//! Double-double arithmetic and a one-sided Jacobi SVD built on it.
//!
//! Used where `f64` round-off would swamp the quantity being measured, such
//! as the smallest singular value of a slice whose condition number is near
//! `1e11`.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi) / 2`, about 32 significant
/// digits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact product of two `f64` values.
    #[inline]
    pub fn product(a: f64, b: f64) -> Self {
        let (p, e) = two_prod(a, b);
        Self { hi: p, lo: e }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        let s = Self::from(self.hi.sqrt());
        // One Newton step doubles the 53-bit starting accuracy.
        s + (self - s * s) / (s + s)
    }

    pub fn signum(self) -> f64 {
        if self.hi < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_parts(s, e + f)
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        Self::from_parts(p, e + (self.hi * rhs.lo + self.lo * rhs.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Self::from(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Self::from(q2);
        let q3 = r.hi / rhs.hi;
        Self::from_parts(q1, q2) + Self::from(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

/// Dense column-major matrix of double-double entries.
#[derive(Debug, Clone)]
pub struct PreciseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<DoubleDouble>,
}

impl PreciseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![DoubleDouble::ZERO; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> DoubleDouble {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: DoubleDouble) {
        self.data[j * self.rows + i] = v;
    }

    fn column(&self, j: usize) -> &[DoubleDouble] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Singular values in descending order, by one-sided Jacobi.
    ///
    /// Each sweep orthogonalizes every column pair; iteration stops once no
    /// pair has `|g_iᵀg_j| > 1e-30 · ‖g_i‖‖g_j‖`, or after 60 sweeps.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut g = self.clone();
        let (m, n) = (g.rows, g.cols);
        let tol = 1e-30;
        for _ in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (alpha, beta, gamma) = {
                        let (cp, cq) = (g.column(p), g.column(q));
                        let mut a = DoubleDouble::ZERO;
                        let mut b = DoubleDouble::ZERO;
                        let mut c = DoubleDouble::ZERO;
                        for k in 0..m {
                            a += cp[k] * cp[k];
                            b += cq[k] * cq[k];
                            c += cp[k] * cq[k];
                        }
                        (a, b, c)
                    };
                    if gamma.abs().hi() <= tol * (alpha.hi() * beta.hi()).sqrt() || gamma.hi() == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (gamma + gamma);
                    let t = DoubleDouble::from(zeta.signum()) / (zeta.abs() + (DoubleDouble::ONE + zeta * zeta).sqrt());
                    let c = DoubleDouble::ONE / (DoubleDouble::ONE + t * t).sqrt();
                    let s = c * t;
                    for k in 0..m {
                        let x = g.data[p * m + k];
                        let y = g.data[q * m + k];
                        g.data[p * m + k] = c * x - s * y;
                        g.data[q * m + k] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut out: Vec<f64> = (0..n)
            .map(|j| {
                let mut acc = DoubleDouble::ZERO;
                for v in g.column(j) {
                    acc += *v * *v;
                }
                acc.sqrt().to_f64()
            })
            .collect();
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }
}

/// Dot product of two `f64` slices accumulated in double-double.
pub fn dot(a: &[f64], b: &[f64]) -> DoubleDouble {
    let mut acc = DoubleDouble::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += DoubleDouble::product(*x, *y);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_f64() {
        let a = DoubleDouble::from(1.0) + DoubleDouble::from(1e-20);
        let b = a - DoubleDouble::from(1.0);
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);

        let third = DoubleDouble::ONE / DoubleDouble::from(3.0);
        let back = third * DoubleDouble::from(3.0) - DoubleDouble::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_is_accurate() {
        let two = DoubleDouble::from(2.0);
        let r = two.sqrt();
        assert!((r * r - two).to_f64().abs() < 1e-31);
        assert_eq!(DoubleDouble::ZERO.sqrt(), DoubleDouble::ZERO);
    }

    #[test]
    fn exact_products() {
        let x = 1.0 + f64::EPSILON;
        let p = DoubleDouble::product(x, x);
        // (1 + e)² = 1 + 2e + e², the last term below f64 resolution.
        assert_eq!(p.hi(), 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(p.lo, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn jacobi_on_diagonal_and_rotated() {
        let mut m = PreciseMatrix::zeros(3, 3);
        for (i, v) in [3.0, 1e-12, 2.0].iter().enumerate() {
            m.set(i, i, DoubleDouble::from(*v));
        }
        assert_eq!(m.singular_values(), vec![3.0, 2.0, 1e-12]);

        // [[1, 1], [0, 1]] has singular values (sqrt(5) ± 1) / 2.
        let mut m = PreciseMatrix::zeros(2, 2);
        m.set(0, 0, DoubleDouble::ONE);
        m.set(0, 1, DoubleDouble::ONE);
        m.set(1, 1, DoubleDouble::ONE);
        let s = m.singular_values();
        let r5 = 5f64.sqrt();
        assert!((s[0] - (r5 + 1.0) / 2.0).abs() < 1e-15);
        assert!((s[1] - (r5 - 1.0) / 2.0).abs() < 1e-15);
    }

    // A graded matrix whose smallest singular value sits 1e-14 below the
    // largest; plain f64 SVD cannot resolve it to relative precision.
    #[test]
    fn jacobi_resolves_graded_spectrum() {
        let c = 0.6;
        let s = 0.8;
        let sig = [1.0, 1e-14];
        let mut m = PreciseMatrix::zeros(2, 2);
        // rotation · diag(sig) · rotationᵀ
        let entries = [
            [c * c * sig[0] + s * s * sig[1], c * s * (sig[0] - sig[1])],
            [c * s * (sig[0] - sig[1]), s * s * sig[0] + c * c * sig[1]],
        ];
        for i in 0..2 {
            for j in 0..2 {
                m.set(i, j, DoubleDouble::from(entries[i][j]));
            }
        }
        let out = m.singular_values();
        assert!((out[0] - 1.0).abs() < 1e-15);
        // Entry rounding perturbs the matrix by ~1e-17, i.e. ~1e-3 relative
        // to the small singular value; the solve itself adds nothing visible.
        assert!((out[1] / 1e-14 - 1.0).abs() < 1e-2);
    }
}
