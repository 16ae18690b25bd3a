use std::collections::BTreeMap;

use super::Tensor;

/// Named trainable parameters held as plain buffers between steps.
///
/// A forward pass binds the store into leaf tensors; after backward() the
/// binding reports per-parameter gradients keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) {
        assert_eq!(value.len(), shape.iter().product::<usize>());
        assert!(
            self.entries
                .insert(name.to_string(), (shape, value))
                .is_none(),
            "duplicate parameter name {name}"
        );
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f64])> {
        self.entries
            .get(name)
            .map(|(s, v)| (s.as_slice(), v.as_slice()))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.entries.get_mut(name).map(|(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], &[f64])> {
        self.entries
            .iter()
            .map(|(k, (s, v))| (k.as_str(), s.as_slice(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Create trainable leaf tensors for one forward/backward pass.
    pub fn bind(&self) -> Binding {
        let leaves = self
            .entries
            .iter()
            .map(|(k, (s, v))| (k.clone(), Tensor::leaf(s.clone(), v.clone())))
            .collect();
        Binding { leaves }
    }

    /// Read-only binding: leaves are constants, no gradient bookkeeping.
    pub fn bind_frozen(&self) -> Binding {
        let leaves = self
            .entries
            .iter()
            .map(|(k, (s, v))| (k.clone(), Tensor::constant(s.clone(), v.clone())))
            .collect();
        Binding { leaves }
    }
}

pub struct Binding {
    leaves: BTreeMap<String, Tensor>,
}

impl Binding {
    pub fn get(&self, name: &str) -> Tensor {
        self.leaves
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .clone()
    }

    /// Gradient per parameter; parameters the loss never touched get zeros.
    pub fn grads(&self) -> BTreeMap<String, Vec<f64>> {
        self.leaves
            .iter()
            .map(|(k, t)| {
                let g = t.grad().unwrap_or_else(|| vec![0.0; t.len()]);
                (k.clone(), g)
            })
            .collect()
    }
}
