use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;

use crate::diff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::State(format!("parameter {name} registered twice")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::State(format!("no parameter named {name}")))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.tensors[self.id(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let id = self.id(name)?;
        Ok(&mut self.tensors[id])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor as a leaf, in store order.
    pub fn on_tape(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// Copy with the tensors replaced; used to evaluate perturbed parameters.
    pub fn with_tensors(&self, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != self.len() || tensors.iter().zip(&self.tensors).any(|(a, b)| a.dim() != b.dim()) {
            return Err(Error::Precondition("replacement tensors do not match the store layout".into()));
        }
        Ok(Self { names: self.names.clone(), tensors, index: self.index.clone() })
    }
}

/// Uniform Glorot initialisation for a `fan_in x fan_out` weight.
pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit))
}

/// Bias row drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`. Zero biases
/// would leave a ReLU stack positively homogeneous, which on constant node
/// features collapses every embedding onto a single ray.
pub fn bias<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((1, fan_out), |_| rng.random_range(-limit..limit))
}

/// Adaptive-moment optimiser state.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update. `frozen[i]` keeps parameter `i` fixed.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor], frozen: &[bool]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::Precondition(format!("{} gradients for {} parameters", grads.len(), store.len())));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, g) in grads.iter().enumerate() {
            if frozen.get(i).copied().unwrap_or(false) {
                continue;
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::State(format!("non-finite gradient for {}", store.names[i])));
            }
            let (b1, b2) = (self.beta1, self.beta2);
            self.m[i].zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            self.v[i].zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            let (lr, eps) = (self.lr, self.eps);
            ndarray::Zip::from(&mut store.tensors[i]).and(&self.m[i]).and(&self.v[i]).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.insert("a", array![[1.0]]).unwrap();
        assert!(s.insert("a", array![[2.0]]).is_err());
        assert!(s.get("b").is_err());
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut s = ParamStore::new();
        s.insert("x", array![[3.0, -2.0]]).unwrap();
        let mut opt = Adam::new(&s, 0.1);
        for _ in 0..500 {
            let g = s.get("x").unwrap().mapv(|x| 2.0 * x);
            opt.step(&mut s, &[g], &[]).unwrap();
        }
        assert!(s.get("x").unwrap().iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn frozen_parameters_stay() {
        let mut s = ParamStore::new();
        s.insert("x", array![[1.0]]).unwrap();
        let mut opt = Adam::new(&s, 0.1);
        opt.step(&mut s, &[array![[1.0]]], &[true]).unwrap();
        assert_eq!(s.get("x").unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn glorot_bounds() {
        let w = glorot(10, 6, &mut rng_from_seed(1));
        assert!(w.iter().all(|x| x.abs() < 0.62));
    }
}
