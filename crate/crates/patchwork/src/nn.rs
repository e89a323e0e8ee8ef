//! Conv layers, weight init and the Adam optimizer used by every trainable
//! component.

use crate::tensor::conv::conv2d;
use crate::tensor::{Arr, Grads, Var};
use crate::util::hash_f64s;
use ndarray::IxDyn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

pub fn normal_init(rng: &mut impl Rng, shape: &[usize], std: f64) -> Arr {
    let dist = Normal::new(0.0, std).expect("normal init");
    Arr::from_shape_simple_fn(IxDyn(shape), || dist.sample(rng))
}

pub fn uniform_init(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Arr {
    Arr::from_shape_simple_fn(IxDyn(shape), || rng.gen_range(lo..hi))
}

/// A conv layer owning its parameter leaves; leaf ids stay stable across
/// training steps so optimizer state can key off them.
pub struct Conv2d {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        rng: &mut impl Rng,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        std: f64,
    ) -> Self {
        Conv2d {
            weight: Var::leaf(normal_init(rng, &[c_out, c_in, k, k], std)),
            bias: Var::leaf(Arr::zeros(IxDyn(&[c_out]))),
            stride,
            pad,
        }
    }

    /// Zero-initialized layer (residual generators start at identity).
    pub fn zeros(c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize) -> Self {
        Conv2d {
            weight: Var::leaf(Arr::zeros(IxDyn(&[c_out, c_in, k, k]))),
            bias: Var::leaf(Arr::zeros(IxDyn(&[c_out]))),
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Var) -> Var {
        conv2d(x, &self.weight, Some(&self.bias), self.stride, self.pad)
    }

    pub fn params(&self) -> Vec<Var> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

pub fn set_trainable(params: &[Var], trainable: bool) {
    for p in params {
        p.set_trainable(trainable);
    }
}

/// Bit-exact fingerprint of a named parameter list (order matters).
pub fn param_fingerprint(named: &[(String, Var)]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for (name, var) in named {
        for b in name.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        let v = var.value_ref();
        hash_f64s(&mut h, v.as_slice().expect("contiguous param"));
    }
    h
}

/// Adam with bias correction. State is keyed by leaf id.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: HashMap<u64, Arr>,
    v: HashMap<u64, Arr>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn step(&mut self, params: &[Var], grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for p in params {
            let Some(g) = grads.get(p) else { continue };
            let m = self
                .m
                .entry(p.id())
                .or_insert_with(|| Arr::zeros(g.raw_dim()));
            let v = self
                .v
                .entry(p.id())
                .or_insert_with(|| Arr::zeros(g.raw_dim()));
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let mut value = p.value();
            ndarray::Zip::from(&mut value)
                .and(&*m)
                .and(&*v)
                .for_each(|x, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *x -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
            p.set_value(value);
        }
    }
}
