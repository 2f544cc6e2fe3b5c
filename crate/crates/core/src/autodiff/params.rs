use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Real, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry<T> {
    name: String,
    value: Matrix<T>,
    grad: Matrix<T>,
}

/// Named parameters in insertion order, each with a gradient accumulator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    entries: Vec<Entry<T>>,
    by_name: BTreeMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Matrix<T>) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Contract(alloc::format!("duplicate parameter `{name}`")));
        }
        let id = self.entries.len();
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn get(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix<T> {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.entries[id.0].grad
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(T::zero());
        }
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.rows() * e.value.cols()).sum()
    }

    /// Same parameters in another precision, gradients reset.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for e in &self.entries {
            out.insert(&e.name, e.value.cast()).expect("names are unique");
        }
        out
    }

    /// Copy values from `other` by name; every name must exist with the same shape.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Checkpoint(alloc::format!(
                "expected {} parameters, found {}",
                self.len(),
                other.len()
            )));
        }
        for e in &mut self.entries {
            let id = other
                .get(&e.name)
                .ok_or_else(|| Error::Checkpoint(alloc::format!("missing parameter `{}`", e.name)))?;
            let v = other.value(id);
            if v.shape() != e.value.shape() {
                return Err(Error::Checkpoint(alloc::format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    e.name,
                    v.shape(),
                    e.value.shape()
                )));
            }
            e.value = v.clone();
        }
        Ok(())
    }
}
