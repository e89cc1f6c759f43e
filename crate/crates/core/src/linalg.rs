//! Dense row-major matrices and the flat-vector operations shared by
//! [`State`](crate::State) and [`Params`](crate::Params).
//!
//! Every reduction runs left to right over the storage order, so results are
//! bit-reproducible across runs and platforms.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix storage length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// `-(a · bᵀ)`, the shape of every energy derivative with respect to a weight block.
    pub fn neg_outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| -(a[i] * b[j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += w * vi;
            }
        }
        out
    }
}

/// Sequential dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Operations over a collection of `f64` blocks viewed as one flat vector.
pub trait FlatVector: Clone {
    fn values(&self) -> impl Iterator<Item = &f64>;
    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64>;

    fn len(&self) -> usize {
        self.values().count()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn norm_inf(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn norm2(&self) -> f64 {
        self.values().fold(0.0, |acc, v| acc + v * v).sqrt()
    }

    fn dot(&self, other: &Self) -> f64 {
        self.values()
            .zip(other.values())
            .fold(0.0, |acc, (a, b)| acc + a * b)
    }

    fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += alpha * b;
        }
    }

    fn scale(&mut self, alpha: f64) {
        for a in self.values_mut() {
            *a *= alpha;
        }
    }

    fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self - other`
    fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    /// Overwrites the values in storage order. Panics on length mismatch.
    fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat vector length");
        for (a, &b) in self.values_mut().zip(flat) {
            *a = b;
        }
    }

    /// Bitwise equality of every value (distinguishes `0.0` from `-0.0`).
    fn bit_eq(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .values()
                .zip(other.values())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn neg_outer_layout() {
        let m = Matrix::neg_outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.get(1, 2), -10.0);
    }
}
