use super::layers::Linear;
use super::network::{Gradients, QNetwork};
use super::scalar::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    t: u64,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &QNetwork<T>, config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            m: net.zero_gradients(),
            v: net.zero_gradients(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut QNetwork<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::invalid("gradient layout does not match optimizer state"));
        }
        self.t += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let step = T::of(c.learning_rate * bc2.sqrt() / bc1);
        let eps = T::of(c.eps * bc2.sqrt());
        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                p[i] -= step * m[i] / (v[i].sqrt() + eps);
            }
        };
        for (((layer, g), m), v) in net.layers_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let Linear { weight, bias } = layer;
            update(weight.data_mut(), g.weight.data(), m.weight.data_mut(), v.weight.data_mut());
            update(bias.data_mut(), g.bias.data(), m.bias.data_mut(), v.bias.data_mut());
        }
        Ok(())
    }
}
