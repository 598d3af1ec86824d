use serde::{Deserialize, Serialize};

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::rng::SeededRng;
use crate::autodiff::tensor::Tensor;

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }

    /// Weight matrix drawn from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
        Self::new(name, Tensor::matrix(rows, cols, data).expect("init shape"))
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    /// Puts this parameter on `graph`, trainable or frozen.
    pub fn bind(&self, graph: &mut Graph, mode: Binding) -> Var {
        match mode {
            Binding::Trainable => graph.param(&self.value),
            Binding::Frozen => graph.constant(self.value.clone()),
        }
    }
}

/// Whether a forward pass records gradients for a network's parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binding {
    Trainable,
    Frozen,
}

/// Anything that owns an ordered list of parameters.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
