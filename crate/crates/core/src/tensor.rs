//! Dense row-major `f64` tensors.
//!
//! Every operation returns a fresh tensor; there are no views, strides or
//! broadcasting. Binary operations require identical shapes.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Dimensions of a tensor, outermost first. Images are `[H, W, C]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::shape("shape must have at least one dimension"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::shape(format!("dimension {pos} of {dims:?} is zero")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= isize::MAX as usize)
            .ok_or_else(|| Error::shape(format!("element count of {dims:?} overflows")))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat row-major offset of a coordinate.
    pub fn offset(&self, coord: &[usize]) -> Result<usize> {
        if coord.len() != self.0.len() {
            return Err(Error::shape(format!(
                "coordinate {coord:?} has rank {} but shape {self} has rank {}",
                coord.len(),
                self.rank()
            )));
        }
        let mut off = 0;
        for (&c, &d) in coord.iter().zip(&self.0) {
            if c >= d {
                return Err(Error::shape(format!("coordinate {coord:?} out of bounds for {self}")));
            }
            off = off * d + c;
        }
        Ok(off)
    }

    /// Inverse of [`Shape::offset`].
    pub fn coord(&self, mut offset: usize) -> Result<Vec<usize>> {
        if offset >= self.len() {
            return Err(Error::shape(format!("offset {offset} out of bounds for {self}")));
        }
        let mut coord = vec![0; self.0.len()];
        for (c, &d) in coord.iter_mut().zip(&self.0).rev() {
            *c = offset % d;
            offset /= d;
        }
        Ok(coord)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.len() != data.len() {
            return Err(Error::shape(format!(
                "shape {shape} needs {} elements, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn filled(dims: impl Into<Vec<usize>>, value: f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![value; shape.len()];
        Ok(Tensor { shape, data })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn zeros_like(other: &Tensor) -> Tensor {
        Tensor {
            shape: other.shape.clone(),
            data: vec![0.0; other.data.len()],
        }
    }

    /// Elements drawn i.i.d. from `[lo, hi)`.
    pub fn random_uniform<R: Rng + ?Sized>(
        dims: impl Into<Vec<usize>>,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::argument(format!("uniform range [{lo}, {hi}) is empty or not finite")));
        }
        let shape = Shape::new(dims)?;
        let data = (0..shape.len()).map(|_| rng.gen_range(lo..hi)).collect();
        Ok(Tensor { shape, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros([n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, coord: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(coord)?])
    }

    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Tensor> {
        let shape = Shape::new(dims)?;
        if shape.len() != self.data.len() {
            return Err(Error::shape(format!("cannot reshape {} into {shape}", self.shape)));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// `[M, K] x [K, N] -> [M, N]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (&[m, k], &[k2, n]) = (self.dims(), rhs.dims()) else {
            return Err(Error::shape(format!(
                "matmul needs rank-2 operands, got {} and {}",
                self.shape, rhs.shape
            )));
        };
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dimensions differ: {} x {}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        for (row, out_row) in self.data.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
            for (&a, b_row) in row.iter().zip(rhs.data.chunks_exact(n)) {
                axpy(a, b_row, out_row);
            }
        }
        Tensor::from_vec([m, n], out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, rhs: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_same_shape(rhs)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|x| x * factor)
    }

    /// `self += alpha * rhs`, in place.
    pub fn add_scaled(&mut self, alpha: f64, rhs: &Tensor) -> Result<()> {
        self.expect_same_shape(rhs)?;
        axpy(alpha, &rhs.data, &mut self.data);
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn expect_same_shape(&self, rhs: &Tensor) -> Result<()> {
        if self.shape != rhs.shape {
            return Err(Error::shape(format!("shape mismatch: {} vs {}", self.shape, rhs.shape)));
        }
        Ok(())
    }
}

/// `y += a * x` over equal-length slices.
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
