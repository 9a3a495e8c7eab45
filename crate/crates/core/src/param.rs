//! Named trainable parameters and their gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Result, Tensor, TensorError};

/// Handle into a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub gradient: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let gradient = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            gradient,
        }
    }

    pub fn zero_grad(&mut self) {
        self.gradient.data_mut().fill(0.0);
    }
}

/// Ordered collection of parameters; ids are insertion positions.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    /// Weight matrix drawn from uniform(−1/√fan_in, +1/√fan_in).
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.add(name, Tensor::new(shape, data).expect("parameter shape"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            for g in p.gradient.data_mut() {
                *g *= factor;
            }
        }
    }

    /// Replaces a value, keeping the registered shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(TensorError::Shape {
                op: "set_value",
                left: p.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gradient_mirrors_value_shape_and_zeroes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ps = ParamSet::new();
        let w = ps.add_uniform("w", &[3, 4], 3, &mut rng);
        assert_eq!(ps.get(w).gradient.shape(), &[3, 4]);
        ps.get_mut(w).gradient.data_mut()[5] = 2.0;
        ps.zero_grad();
        assert!(ps.get(w).gradient.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn uniform_init_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ps = ParamSet::new();
        let w = ps.add_uniform("w", &[16, 16], 16, &mut rng);
        assert!(ps.value(w).data().iter().all(|v| v.abs() <= 0.25));
        assert_eq!(ps.id_of("w"), Some(w));
    }

    #[test]
    fn set_value_rejects_shape_change() {
        let mut ps = ParamSet::new();
        let b = ps.add_zeros("b", &[4]);
        assert!(ps.set_value(b, Tensor::zeros(&[5])).is_err());
        assert!(ps.set_value(b, Tensor::filled(&[4], 1.0)).is_ok());
    }
}
