use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::base::ParameterVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.size()
    }
}

/// A named, shaped tensor materialised out of a flat vector (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered map between the structured weights of a network and its flat
/// parameter vector. Tensors are laid out back to back in declaration order,
/// each one row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightLayout {
    tensors: Vec<TensorSpec>,
    total_size: usize,
}

impl WeightLayout {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, Vec<usize>)>) -> Self {
        let mut offset = 0;
        let tensors = entries
            .into_iter()
            .map(|(name, shape)| {
                let spec = TensorSpec {
                    name: name.into(),
                    shape,
                    offset,
                };
                offset += spec.size();
                spec
            })
            .collect();
        Self {
            tensors,
            total_size: offset,
        }
    }

    pub fn total_size(&self) -> usize {
        self.total_size
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Flat index range of `name`. Panics on unknown names, which are
    /// programming errors inside the cell implementations.
    pub fn range(&self, name: &str) -> Range<usize> {
        self.get(name)
            .unwrap_or_else(|| panic!("no tensor named {name}"))
            .range()
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.total_size {
            return Err(Error::DimensionMismatch {
                expected: self.total_size,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn unflatten(&self, theta: &[f64]) -> Result<Vec<Tensor>> {
        self.check(theta)?;
        Ok(self
            .tensors
            .iter()
            .map(|t| Tensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: theta[t.range()].to_vec(),
            })
            .collect())
    }

    pub fn flatten(&self, tensors: &[Tensor]) -> Result<ParameterVector> {
        if tensors.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.tensors.len(),
                got: tensors.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.total_size);
        for (spec, tensor) in self.tensors.iter().zip(tensors) {
            if spec.name != tensor.name || spec.shape != tensor.shape || tensor.data.len() != spec.size() {
                return Err(Error::config(format!(
                    "tensor {} does not match layout entry {} {:?}",
                    tensor.name, spec.name, spec.shape
                )));
            }
            flat.extend_from_slice(&tensor.data);
        }
        Ok(ParameterVector::from_vec(flat))
    }

    /// Tensor name and row-major multi-index of a flat coordinate.
    pub fn locate(&self, flat_index: usize) -> Option<(&str, Vec<usize>)> {
        let spec = self.tensors.iter().find(|t| t.range().contains(&flat_index))?;
        let mut rem = flat_index - spec.offset;
        let mut index = vec![0; spec.shape.len()];
        for (axis, &dim) in spec.shape.iter().enumerate().rev() {
            index[axis] = rem % dim;
            rem /= dim;
        }
        Some((spec.name.as_str(), index))
    }
}
