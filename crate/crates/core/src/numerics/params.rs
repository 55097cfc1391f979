use indexmap::IndexMap;

use super::{NumericsError, Tensor};

/// Named trainable tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamRegistry {
    entries: IndexMap<String, Tensor>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<(), NumericsError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(NumericsError::DuplicateParam(name));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn get_index(&self, index: usize) -> Option<(&str, &Tensor)> {
        self.entries.get_index(index).map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn get_index_mut(&mut self, index: usize) -> Option<(&str, &mut Tensor)> {
        self.entries.get_index_mut(index).map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of scalar entries across all tensors.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }
}

/// Gradient per registered parameter, same order and shapes as the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: IndexMap<String, Tensor>,
}

impl Gradients {
    pub(crate) fn new(entries: IndexMap<String, Tensor>) -> Self {
        Self { entries }
    }

    pub fn zeros_like(params: &ParamRegistry) -> Self {
        let entries = params
            .iter()
            .map(|(k, v)| (k.to_string(), Tensor::zeros(v.shape().to_vec())))
            .collect();
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `other` into `self` entry by entry.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (name, g) in &other.entries {
            if let Some(mine) = self.entries.get_mut(name) {
                for (a, b) in mine.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.entries.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_and_uniqueness() {
        let mut reg = ParamRegistry::new();
        reg.insert("b", Tensor::scalar(1.0)).unwrap();
        reg.insert("a", Tensor::scalar(2.0)).unwrap();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["b", "a"]);
        assert!(matches!(
            reg.insert("a", Tensor::scalar(0.0)),
            Err(NumericsError::DuplicateParam(_))
        ));
    }
}
