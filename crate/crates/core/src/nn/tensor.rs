use crate::error::{Error, Result};

/// Dense row-major `f64` tensor with an optional gradient buffer.
///
/// Only rank 1 and rank 2 shapes are used; a rank-1 tensor of length `n`
/// behaves as a `1 × n` row where a matrix is expected.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        Tensor::from_vec(&[rows, cols], values).expect("matrix shape")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[r * c..(r + 1) * c]
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|x| *x = 0.0),
            None => self.grad = Some(vec![0.0; self.values.len()]),
        }
    }

    pub fn grad_mut(&mut self) -> &mut Vec<f64> {
        let n = self.values.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn accumulate_grad(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.values.len());
        for (g, d) in self.grad_mut().iter_mut().zip(delta) {
            *g += d;
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (n, k, m) = (self.rows(), self.cols(), other.cols());
        assert_eq!(k, other.rows(), "matmul inner dimensions");
        let mut out = vec![0.0; n * m];
        if m == 0 || k == 0 {
            return Tensor::matrix(n, m, out);
        }
        let b = &other.values;
        for (a, o) in self.values.chunks_exact(k).zip(out.chunks_exact_mut(m)) {
            for (&av, brow) in a.iter().zip(b.chunks_exact(m)) {
                if av == 0.0 {
                    continue;
                }
                for (ov, &bv) in o.iter_mut().zip(brow) {
                    *ov += av * bv;
                }
            }
        }
        Tensor::matrix(n, m, out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Tensor) -> Tensor {
        let (n, k, m) = (self.rows(), self.cols(), other.cols());
        assert_eq!(n, other.rows(), "t_matmul outer dimensions");
        let mut out = vec![0.0; k * m];
        if m == 0 || k == 0 {
            return Tensor::matrix(k, m, out);
        }
        for (a, b) in self.values.chunks_exact(k).zip(other.values.chunks_exact(m)) {
            for (&av, o) in a.iter().zip(out.chunks_exact_mut(m)) {
                if av == 0.0 {
                    continue;
                }
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        Tensor::matrix(k, m, out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Tensor) -> Tensor {
        let (n, k, m) = (self.rows(), self.cols(), other.rows());
        assert_eq!(k, other.cols(), "matmul_t inner dimensions");
        let mut out = vec![0.0; n * m];
        if m == 0 || k == 0 {
            return Tensor::matrix(n, m, out);
        }
        for (a, o) in self.values.chunks_exact(k).zip(out.chunks_exact_mut(m)) {
            for (ov, b) in o.iter_mut().zip(other.values.chunks_exact(k)) {
                *ov = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Tensor::matrix(n, m, out)
    }

    /// Add `bias` to every row.
    pub fn add_row(&mut self, bias: &[f64]) {
        let c = self.cols();
        assert_eq!(bias.len(), c, "bias width");
        for row in self.values.chunks_mut(c) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Column sums, i.e. the gradient of a broadcast row bias.
    pub fn sum_rows(&self) -> Vec<f64> {
        let c = self.cols();
        let mut out = vec![0.0; c];
        for row in self.values.chunks(c.max(1)) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
