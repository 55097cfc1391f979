//! Dense row-major `f64` tensors and the forward math shared by the tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Dense row-major tensor of 64-bit floats.
///
/// Rank 0 (`shape == []`) is a scalar holding exactly one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Whether dropout masks are drawn or skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        if shape.contains(&0) {
            return Err(NumericsError::Domain(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::Domain(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![], data: vec![value] }
    }

    /// Panics on an empty vector; use [`Tensor::new`] for fallible construction.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must be non-empty");
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let Some(first) = rows.first() else {
            return Err(NumericsError::Domain("matrix needs at least one row".into()));
        };
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(NumericsError::Shape {
                    op: "from_rows",
                    left: vec![cols],
                    right: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Samples every entry from `N(0, std²)` via Box-Muller.
    pub fn randn<R: Rng + ?Sized>(shape: Vec<usize>, std: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| std * standard_normal(rng)).collect();
        Self { shape, data }
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

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// The single value of a scalar or one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> Result<Tensor, NumericsError> {
        let (rows, cols) = self.as_matrix("row")?;
        if i >= rows {
            return Err(NumericsError::Domain(format!("row {i} out of range for {rows} rows")));
        }
        Ok(Tensor::vector(self.data[i * cols..(i + 1) * cols].to_vec()))
    }

    pub(crate) fn as_matrix(&self, op: &'static str) -> Result<(usize, usize), NumericsError> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(NumericsError::Rank { op, expected: 2, shape: other.to_vec() }),
        }
    }

    pub(crate) fn as_vector(&self, op: &'static str) -> Result<usize, NumericsError> {
        match self.shape.as_slice() {
            [n] => Ok(*n),
            other => Err(NumericsError::Rank { op, expected: 1, shape: other.to_vec() }),
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, NumericsError> {
        let (m, k) = self.as_matrix("matmul")?;
        let (k2, n) = other.as_matrix("matmul")?;
        if k != k2 {
            return Err(NumericsError::Shape {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[p * n..(p + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor { shape: vec![m, n], data: out })
    }

    /// Matrix-vector product `W x`.
    pub fn matvec(&self, x: &Tensor) -> Result<Tensor, NumericsError> {
        let (m, k) = self.as_matrix("matvec")?;
        let n = x.as_vector("matvec")?;
        if k != n {
            return Err(NumericsError::Shape {
                op: "matvec",
                left: self.shape.clone(),
                right: x.shape.clone(),
            });
        }
        let data = (0..m)
            .map(|i| dot_slices(&self.data[i * k..(i + 1) * k], &x.data))
            .collect();
        Ok(Tensor { shape: vec![m], data })
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64, NumericsError> {
        let n = self.as_vector("dot")?;
        let m = other.as_vector("dot")?;
        if n != m {
            return Err(NumericsError::Shape {
                op: "dot",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(dot_slices(&self.data, &other.data))
    }

    pub fn relu(&self) -> Tensor {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    pub fn softmax(&self) -> Result<Tensor, NumericsError> {
        let n = self.as_vector("softmax")?;
        if n == 0 {
            return Err(NumericsError::Domain("softmax of an empty vector".into()));
        }
        Ok(Tensor::vector(softmax_slice(&self.data)))
    }

    pub fn concat(&self, other: &Tensor) -> Result<Tensor, NumericsError> {
        self.as_vector("concat")?;
        other.as_vector("concat")?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Tensor::vector(data))
    }

    pub fn mean_rows(&self) -> Result<Tensor, NumericsError> {
        let (rows, cols) = self.as_matrix("mean_rows")?;
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for (o, v) in out.iter_mut().zip(&self.data[r * cols..(r + 1) * cols]) {
                *o += v;
            }
        }
        let inv = 1.0 / rows as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(Tensor::vector(out))
    }

    /// Column-wise maximum together with the winning row per column
    /// (lowest row index on ties).
    pub fn max_pool_rows(&self) -> Result<(Tensor, Vec<usize>), NumericsError> {
        let (rows, cols) = self.as_matrix("max_pool_rows")?;
        let mut best = self.data[..cols].to_vec();
        let mut arg = vec![0; cols];
        for r in 1..rows {
            for c in 0..cols {
                let v = self.data[r * cols + c];
                if v > best[c] {
                    best[c] = v;
                    arg[c] = r;
                }
            }
        }
        Ok((Tensor::vector(best), arg))
    }

    pub fn cosine(&self, other: &Tensor) -> Result<f64, NumericsError> {
        let d = self.dot(other)?;
        let na = norm(&self.data);
        let nb = norm(&other.data);
        if na == 0.0 || nb == 0.0 {
            return Err(NumericsError::ZeroVector("cosine"));
        }
        Ok((d / (na * nb)).clamp(-1.0, 1.0))
    }

    /// Inverted dropout. Eval mode and `p == 0` return an exact copy.
    pub fn dropout<R: Rng + ?Sized>(
        &self,
        p: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor, NumericsError> {
        let mask = dropout_mask(self.len(), p, mode, rng)?;
        Ok(match mask {
            None => self.clone(),
            Some(mask) => Tensor {
                shape: self.shape.clone(),
                data: self.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
            },
        })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

pub(crate) fn dropout_mask<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Option<Vec<f64>>, NumericsError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NumericsError::Domain(format!("dropout probability {p} not in [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - p);
    Ok(Some((0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()))
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot_slices(a, a).sqrt()
}

pub(crate) fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_matmul() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn orthogonal_selection() {
        let a = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
        let b = Tensor::matrix(2, 1, vec![0.0, 5.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn relu_definition() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(x.relu().data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::vector(vec![-3.0, -0.5]);
        assert!(neg.relu().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_cases() {
        let s = Tensor::vector(vec![7.0; 3]).softmax().unwrap();
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = Tensor::vector(vec![0.0, 3f64.ln()]).softmax().unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
        assert_eq!(Tensor::vector(vec![-42.0]).softmax().unwrap().data(), &[1.0]);
        // large logits stay finite
        let s = Tensor::vector(vec![1000.0, 1001.0]).softmax().unwrap();
        assert!(s.is_finite());
    }

    #[test]
    fn pooling_and_concat() {
        let x = Tensor::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(x.mean_rows().unwrap().data(), &[2.0, 2.0]);
        let single = Tensor::from_rows(&[vec![4.0, -1.0]]).unwrap();
        assert_eq!(single.max_pool_rows().unwrap().0.data(), &[4.0, -1.0]);
        let tie = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(tie.max_pool_rows().unwrap().1, vec![0]);
        let c = Tensor::vector(vec![1.0]).concat(&Tensor::vector(vec![2.0, 3.0])).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn cosine_cases() {
        let v = Tensor::vector(vec![0.3, -2.0, 5.0]);
        assert!((v.cosine(&v).unwrap() - 1.0).abs() < 1e-12);
        let a = Tensor::vector(vec![1.0, 0.0]);
        let b = Tensor::vector(vec![0.0, 1.0]);
        assert_eq!(a.cosine(&b).unwrap(), 0.0);
        let a = Tensor::vector(vec![1.0, 1.0]);
        let b = Tensor::vector(vec![-1.0, -1.0]);
        assert!((a.cosine(&b).unwrap() + 1.0).abs() < 1e-12);
        let z = Tensor::vector(vec![0.0, 0.0]);
        assert!(matches!(a.cosine(&z), Err(NumericsError::ZeroVector(_))));
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::vector(vec![1.5, -2.0, 0.25]);
        assert_eq!(x.dropout(0.2, Mode::Eval, &mut rng).unwrap(), x);
        assert_eq!(x.dropout(0.0, Mode::Train, &mut rng).unwrap(), x);
        assert!(x.dropout(1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::vector(vec![1.0; 100_000]);
        let y = x.dropout(0.2, Mode::Train, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }
}
