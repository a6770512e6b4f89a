use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::lit;
use crate::{Error, Result, Scalar};

/// Output head of the matching classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    /// One logit, logistic link, binary cross-entropy.
    Binary,
    /// Positive / neutral / negative logits, softmax cross-entropy.
    ThreeClass,
}

impl Head {
    pub fn n_outputs(self) -> usize {
        match self {
            Head::Binary => 1,
            Head::ThreeClass => 3,
        }
    }

    pub fn from_outputs(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Head::Binary),
            3 => Ok(Head::ThreeClass),
            _ => Err(Error::Format {
                field: "n_classes",
                message: format!("must be 1 or 3, got {n}"),
            }),
        }
    }

    /// Head for a pair-set class count (2 or 3).
    pub fn for_classes(classes: usize) -> Result<Self> {
        match classes {
            2 => Ok(Head::Binary),
            3 => Ok(Head::ThreeClass),
            _ => Err(Error::Config(format!("classes must be 2 or 3, got {classes}"))),
        }
    }
}

/// Layer sizes: input embedding `d`, projection `p`, hidden `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub input: usize,
    pub proj: usize,
    pub hidden: usize,
    pub head: Head,
}

impl Dims {
    pub fn new(input: usize, proj: usize, hidden: usize, head: Head) -> Self {
        Self { input, proj, hidden, head }
    }

    pub fn n_outputs(&self) -> usize {
        self.head.n_outputs()
    }

    /// Block lengths in declaration order: W_phi, b_phi, W_h1, b_h1, W_h2, b_h2.
    pub fn block_lens(&self) -> [usize; 6] {
        let (d, p, q, n) = (self.input, self.proj, self.hidden, self.n_outputs());
        [p * d, p, q * 3 * p, q, n * q, n]
    }

    pub fn n_params(&self) -> usize {
        self.block_lens().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.proj == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("all layer sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Weights of the projection `φ(e) = ReLU(W_phi e + b_phi)` and the head
/// `h(x) = W_h2 ReLU(W_h1 x + b_h1) + b_h2`, stored as one flat buffer in
/// declaration order. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct FgsmParams<T> {
    dims: Dims,
    data: Vec<T>,
}

/// Borrowed parameter blocks.
#[derive(Debug, Clone, Copy)]
pub struct Parts<'a, T> {
    pub w_phi: &'a [T],
    pub b_phi: &'a [T],
    pub w_h1: &'a [T],
    pub b_h1: &'a [T],
    pub w_h2: &'a [T],
    pub b_h2: &'a [T],
}

#[derive(Debug)]
pub struct PartsMut<'a, T> {
    pub w_phi: &'a mut [T],
    pub b_phi: &'a mut [T],
    pub w_h1: &'a mut [T],
    pub b_h1: &'a mut [T],
    pub w_h2: &'a mut [T],
    pub b_h2: &'a mut [T],
}

impl<T: Scalar> FgsmParams<T> {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![T::zero(); dims.n_params()],
        }
    }

    /// Uniform Glorot initialization of the weights, zero biases.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(dims);
        let (d, p, q, n) = (dims.input, dims.proj, dims.hidden, dims.n_outputs());
        let parts = params.parts_mut();
        for (w, fan_in, fan_out) in [(parts.w_phi, d, p), (parts.w_h1, 3 * p, q), (parts.w_h2, q, n)] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in w.iter_mut() {
                *x = lit(rng.gen_range(-limit..limit));
            }
        }
        params
    }

    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.n_params() {
            return Err(Error::DimMismatch {
                what: "parameter buffer".into(),
                expected: dims.n_params(),
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn parts(&self) -> Parts<'_, T> {
        let [a, b, c, d, e, _] = self.dims.block_lens();
        let (w_phi, rest) = self.data.split_at(a);
        let (b_phi, rest) = rest.split_at(b);
        let (w_h1, rest) = rest.split_at(c);
        let (b_h1, rest) = rest.split_at(d);
        let (w_h2, b_h2) = rest.split_at(e);
        Parts {
            w_phi,
            b_phi,
            w_h1,
            b_h1,
            w_h2,
            b_h2,
        }
    }

    pub fn parts_mut(&mut self) -> PartsMut<'_, T> {
        let [a, b, c, d, e, _] = self.dims.block_lens();
        let (w_phi, rest) = self.data.split_at_mut(a);
        let (b_phi, rest) = rest.split_at_mut(b);
        let (w_h1, rest) = rest.split_at_mut(c);
        let (b_h1, rest) = rest.split_at_mut(d);
        let (w_h2, b_h2) = rest.split_at_mut(e);
        PartsMut {
            w_phi,
            b_phi,
            w_h1,
            b_h1,
            w_h2,
            b_h2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    /// Same parameters in another precision.
    pub fn cast<U: Scalar>(&self) -> FgsmParams<U> {
        FgsmParams {
            dims: self.dims,
            data: self.data.iter().map(|&x| U::from_f64_lossy(x.to_f64_lossless())).collect(),
        }
    }

    /// Error unless embeddings of width `dim` fit this model.
    pub fn check_input_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dims.input {
            return Err(Error::DimMismatch {
                what: "embedding width vs. model input".into(),
                expected: self.dims.input,
                actual: dim,
            });
        }
        Ok(())
    }
}
