use indexmap::IndexMap;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named learnable tensors, iterated in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore<T> {
    entries: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::arg(
                "parameter store",
                format!("duplicate parameter `{name}`"),
            ));
        }
        self.entries.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        ParameterStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

/// Resolves parameter names to handles for one execution backend.
pub trait Binder<H> {
    fn get(&self, name: &str) -> Result<H>;

    fn get_opt(&self, name: &str) -> Result<Option<H>> {
        match self.get(name) {
            Ok(h) => Ok(Some(h)),
            Err(Error::UnknownParameter(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

impl<T: Scalar> Binder<Tensor<T>> for ParameterStore<T> {
    fn get(&self, name: &str) -> Result<Tensor<T>> {
        ParameterStore::get(self, name).cloned()
    }
}

/// How a declared parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Ones,
    Zeros,
}

/// A parameter declaration: name, shape and initializer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Pointwise conv `cin -> cout`, weight `[cout, cin, 1, 1]`.
pub fn pointwise_specs(prefix: &str, cin: usize, cout: usize, bias: bool) -> Vec<ParamSpec> {
    let mut v = vec![ParamSpec::new(
        join(prefix, "weight"),
        &[cout, cin, 1, 1],
        Init::FanIn(cin),
    )];
    if bias {
        v.push(ParamSpec::new(
            join(prefix, "bias"),
            &[cout],
            Init::FanIn(cin),
        ));
    }
    v
}

/// Depthwise 3x3 conv over `c` channels, weight `[c, 1, 3, 3]`.
pub fn depthwise_specs(prefix: &str, c: usize, bias: bool) -> Vec<ParamSpec> {
    let mut v = vec![ParamSpec::new(
        join(prefix, "weight"),
        &[c, 1, 3, 3],
        Init::FanIn(9),
    )];
    if bias {
        v.push(ParamSpec::new(join(prefix, "bias"), &[c], Init::FanIn(9)));
    }
    v
}

/// Layer-norm scale (ones) and offset (zeros) over `c` channels.
pub fn norm_specs(prefix: &str, c: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec::new(join(prefix, "scale"), &[c], Init::Ones),
        ParamSpec::new(join(prefix, "offset"), &[c], Init::Zeros),
    ]
}

/// Allocates and initializes every declared parameter in order.
pub fn materialize<T: Scalar, R: Rng + ?Sized>(
    specs: &[ParamSpec],
    rng: &mut R,
) -> Result<ParameterStore<T>> {
    let mut store = ParameterStore::new();
    for spec in specs {
        let t = match spec.init {
            Init::FanIn(fan) => {
                let bound = 1.0 / (fan.max(1) as f64).sqrt();
                Tensor::uniform(&spec.shape, -bound, bound, rng)?
            }
            Init::Ones => Tensor::ones(&spec.shape)?,
            Init::Zeros => Tensor::zeros(&spec.shape)?,
        };
        store.insert(spec.name.clone(), t)?;
    }
    Ok(store)
}

/// Joins a dotted parameter path.
pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
