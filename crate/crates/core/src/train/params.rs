//! Named parameter tensors and their gradients.

use crate::error::{Result, RgcnError};
use crate::sparse::{DenseMatrix, DenseTensor3};
use std::collections::HashMap;

/// A matrix- or rank-3-valued tensor, the unit the tape and optimizer
/// operate on.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Matrix(DenseMatrix),
    Tensor3(DenseTensor3),
}

impl Value {
    pub fn data(&self) -> &[f64] {
        match self {
            Value::Matrix(m) => m.data(),
            Value::Tensor3(t) => t.data(),
        }
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        match self {
            Value::Matrix(m) => m.data_mut(),
            Value::Tensor3(t) => t.data_mut(),
        }
    }

    pub fn len(&self) -> usize {
        self.data().len()
    }

    pub fn is_empty(&self) -> bool {
        self.data().is_empty()
    }

    pub fn shape(&self) -> Vec<usize> {
        match self {
            Value::Matrix(m) => vec![m.rows(), m.cols()],
            Value::Tensor3(t) => {
                let (a, b, c) = t.dims();
                vec![a, b, c]
            }
        }
    }

    pub fn zeros_like(&self) -> Value {
        match self {
            Value::Matrix(m) => Value::Matrix(DenseMatrix::zeros(m.rows(), m.cols())),
            Value::Tensor3(t) => {
                let (a, b, c) = t.dims();
                Value::Tensor3(DenseTensor3::zeros(a, b, c))
            }
        }
    }

    pub fn as_matrix(&self) -> Result<&DenseMatrix> {
        match self {
            Value::Matrix(m) => Ok(m),
            Value::Tensor3(_) => Err(RgcnError::Integrity("expected matrix value".into())),
        }
    }

    pub fn as_tensor3(&self) -> Result<&DenseTensor3> {
        match self {
            Value::Tensor3(t) => Ok(t),
            Value::Matrix(_) => Err(RgcnError::Integrity("expected rank-3 value".into())),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Registry of named trainable tensors. Names are unique; every tensor a
/// model touches must be registered before training starts.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Value>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Value) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(RgcnError::Integrity(format!(
                "parameter '{name}' registered twice"
            )));
        }
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(id)
    }

    pub fn id_of(&self, name: &str) -> Result<ParamId> {
        self.by_name.get(name).copied().ok_or_else(|| {
            RgcnError::Integrity(format!("unregistered parameter '{name}' touched"))
        })
    }

    pub fn get(&self, id: ParamId) -> &Value {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Value {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Value)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (ParamId(i), self.names[i].as_str(), v))
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Value::len).sum()
    }
}

/// Gradients shaped like their parameters.
#[derive(Debug, Clone)]
pub struct GradStore {
    grads: Vec<Value>,
}

impl GradStore {
    pub fn zeros_like(params: &ParamStore) -> Self {
        GradStore {
            grads: params.values.iter().map(Value::zeros_like).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Value {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Value {
        &mut self.grads[id.0]
    }

    pub fn accumulate(&mut self, id: ParamId, delta: &[f64]) {
        let g = self.grads[id.0].data_mut();
        debug_assert_eq!(g.len(), delta.len());
        for (gv, &dv) in g.iter_mut().zip(delta.iter()) {
            *gv += dv;
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
