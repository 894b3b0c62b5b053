use std::fmt;

use crate::error::{invalid, shape_err, Result};

/// Dense row-major n-dimensional array of `f64`.
#[derive(Clone, PartialEq)]
pub struct TensorND {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TensorND {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(invalid!("tensor dimensions must be positive, got {shape:?}"));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(shape_err!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            ));
        }
        Ok(TensorND { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        TensorND {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        TensorND {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn zeros_like(other: &TensorND) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interprets the tensor as `channels × height × width`.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            other => Err(shape_err!("expected a 3-d tensor, got shape {other:?}")),
        }
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[a, b, c, d] => Ok((a, b, c, d)),
            other => Err(shape_err!("expected a 4-d tensor, got shape {other:?}")),
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        TensorND::new(shape, self.data)
    }

    /// Flattens to a 1-d tensor without copying.
    pub fn flatten(self) -> Self {
        TensorND::from_vec(self.data)
    }

    pub fn dot(&self, other: &TensorND) -> Result<f64> {
        if self.shape != other.shape {
            return Err(shape_err!(
                "dot product of {:?} and {:?}",
                self.shape,
                other.shape
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TensorND {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &TensorND) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err!("add {:?} to {:?}", other.shape, self.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for TensorND {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "TensorND{:?}", self.shape)?;
        let head: Vec<_> = self.data.iter().take(PREVIEW).collect();
        write!(f, " {head:?}")?;
        if self.data.len() > PREVIEW {
            write!(f, " ..")?;
        }
        Ok(())
    }
}
