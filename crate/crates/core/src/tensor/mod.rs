//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! The design is define-by-run: a [`Tape`] is rebuilt on every forward pass,
//! operations append nodes in topological order, and [`Tape::backward`]
//! walks the record in reverse. Values are 64-bit floats throughout so
//! finite-difference checks have headroom. There is no broadcasting beyond
//! bias/scale vectors applied over matrix rows, which keeps every gradient
//! rule short enough to audit by hand.

mod adam;
mod tape;

pub use adam::{adam_step, Adam, AdamState};
pub use tape::{NodeId, Tape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::normal;

/// Dense row-major tensor. `grad` is populated by the backward pass for
/// tensors with `requires_grad` set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::dimension("from_vec", format!("zero dimension in {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::dimension(
                "from_vec",
                format!("shape {shape:?} wants {numel} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn ones(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![1.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
            grad: None,
        }
    }

    /// Row vector `1 x n`.
    pub fn row(values: &[f64]) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values.to_vec(),
            requires_grad: false,
            grad: None,
        }
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dimension("matrix", "ragged rows".to_string()));
        }
        Tensor::from_vec(vec![r, c], rows.concat())
    }

    /// Gaussian init with the given standard deviation.
    pub fn randn<R: rand::RngExt + ?Sized>(rng: &mut R, shape: Vec<usize>, std: f64) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| normal(rng) * std).collect();
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// Xavier/Glorot uniform init for a `rows x cols` weight matrix.
    pub fn xavier<R: rand::RngExt + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Tensor {
            shape: vec![rows, cols],
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }
}

/// Identifier of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable parameter.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub frozen: bool,
}

/// Flat registry of model parameters. Parameter order is insertion order and
/// defines the layout of the flattened vector used by optimizers and the
/// Pareto machinery.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, mut value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(
            !self.params.iter().any(|p| p.name == name),
            "duplicate parameter name {name}"
        );
        value.requires_grad = true;
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name,
            value,
            frozen: false,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Freeze every parameter whose name starts with `prefix`. Frozen
    /// parameters keep their values but drop out of the trainable view.
    pub fn freeze_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.frozen = true;
                n += 1;
            }
        }
        n
    }

    /// Total element count of the trainable (unfrozen) parameters.
    pub fn trainable_len(&self) -> usize {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(|p| p.value.numel())
            .sum()
    }

    /// Concatenate trainable parameters into a flat vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_len());
        for p in &self.params {
            if !p.frozen {
                out.extend_from_slice(&p.value.data);
            }
        }
        out
    }

    /// Write a flat vector back into the trainable parameters.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_len() {
            return Err(Error::dimension(
                "load_flat",
                format!("expected {} values, got {}", self.trainable_len(), flat.len()),
            ));
        }
        let mut off = 0;
        for p in &mut self.params {
            if !p.frozen {
                let n = p.value.numel();
                p.value.data.copy_from_slice(&flat[off..off + n]);
                off += n;
            }
        }
        Ok(())
    }
}
