//! Named, ordered parameter collections.
//!
//! Parameters live in a `Vec` with stable names and a fixed order, so
//! optimizer updates, checkpoint serialization and gradient alignment all
//! walk the same sequence deterministically.

use super::{NnError, Result, Scalar, Tensor};

/// One named parameter tensor.
#[derive(Debug, Clone)]
pub struct Param<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Gradients aligned index-for-index with a [`ParamSet`].
pub type GradSet<T> = Vec<Tensor<T>>;

/// Ordered set of named parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<T = f32> {
    entries: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> ParamSet<T> {
        ParamSet {
            entries: Vec::new(),
        }
    }

    /// Appends a parameter; names must be unique within the set.
    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) -> usize {
        let name = name.into();
        debug_assert!(
            self.index_of(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(Param { name, value });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.entries.iter()
    }

    pub fn get(&self, idx: usize) -> &Param<T> {
        &self.entries[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Param<T> {
        &mut self.entries[idx]
    }

    pub fn value(&self, idx: usize) -> &Tensor<T> {
        &self.entries[idx].value
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|p| p.name == name)
    }

    /// Zero gradients matching this set's shapes and order.
    pub fn zero_grads(&self) -> GradSet<T> {
        self.entries
            .iter()
            .map(|p| Tensor::zeros(p.value.shape()))
            .collect()
    }

    /// Total scalar element count across all parameters.
    pub fn element_count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    /// Checks that a gradient set is aligned with this parameter set.
    pub fn check_aligned(&self, grads: &GradSet<T>) -> Result<()> {
        if grads.len() != self.entries.len() {
            return Err(NnError::ShapeMismatch {
                op: "check_aligned",
                detail: format!(
                    "{} gradient tensors for {} parameters",
                    grads.len(),
                    self.entries.len()
                ),
            });
        }
        for (p, g) in self.entries.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "check_aligned",
                    detail: format!(
                        "parameter {} has shape {:?} but gradient has {:?}",
                        p.name,
                        p.value.shape(),
                        g.shape()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_lookup_preserve_order() {
        let mut set = ParamSet::<f32>::new();
        set.push("a.weight", Tensor::zeros(&[2, 2]));
        set.push("a.bias", Tensor::zeros(&[2]));
        assert_eq!(set.index_of("a.bias"), Some(1));
        assert_eq!(set.get(0).name, "a.weight");
        assert_eq!(set.element_count(), 6);
    }

    #[test]
    fn alignment_check_catches_shape_drift() {
        let mut set = ParamSet::<f32>::new();
        set.push("w", Tensor::zeros(&[3]));
        let mut grads = set.zero_grads();
        assert!(set.check_aligned(&grads).is_ok());
        grads[0] = Tensor::zeros(&[4]);
        assert!(set.check_aligned(&grads).is_err());
    }
}
