use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::graph::Var;
use crate::tensor::Tensor;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// How a parameter was initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    /// Uniform(±sqrt(6 / fan_in)).
    KaimingUniform { fan_in: usize },
    /// Uniform(±bound).
    Uniform { bound: f64 },
    Constant(f64),
    /// Loaded from a checkpoint or set by hand.
    External,
}

impl InitScheme {
    pub fn describe(&self) -> String {
        match self {
            InitScheme::KaimingUniform { fan_in } => format!("kaiming_uniform(fan_in={fan_in})"),
            InitScheme::Uniform { bound } => format!("uniform({bound:e})"),
            InitScheme::Constant(v) => format!("constant({v})"),
            InitScheme::External => "external".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub init: InitScheme,
}

/// Deterministic parameter initialiser: one ChaCha stream per seed, drawn
/// in registration order.
pub struct Initializer {
    seed: u64,
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&mut self, shape: &[usize], scheme: &InitScheme) -> Tensor {
        match *scheme {
            InitScheme::KaimingUniform { fan_in } => {
                let bound = (6.0 / fan_in.max(1) as f64).sqrt();
                Tensor::from_fn(shape.to_vec(), |_| self.rng.gen_range(-bound..bound))
            }
            InitScheme::Uniform { bound } => {
                Tensor::from_fn(shape.to_vec(), |_| self.rng.gen_range(-bound..bound))
            }
            InitScheme::Constant(v) => Tensor::full(shape.to_vec(), v),
            InitScheme::External => Tensor::zeros(shape.to_vec()),
        }
    }
}

/// Flat, named collection of trainable tensors. Every parameter is owned
/// exactly once, so [`ParamStore::count`] never double counts.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter drawn from `init`. Names must be unique.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        scheme: InitScheme,
        init: &mut Initializer,
    ) -> Result<ParamId> {
        let value = init.sample(shape, &scheme);
        self.insert(name.into(), value, scheme)
    }

    pub fn insert(&mut self, name: String, value: Tensor, init: InitScheme) -> Result<ParamId> {
        if self.params.iter().any(|p| p.name == name) {
            return Err(TensorError::Config(format!("duplicate parameter name {name}")));
        }
        self.params.push(Param { name, value, init });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    /// Graph leaf holding a copy of the parameter value.
    pub fn var(&self, id: ParamId) -> Var {
        Var::leaf(self.params[id.0].value.clone(), true, Some(id))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Scalar count of parameters whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| p.value.numel())
            .sum()
    }
}
