use alloc::vec::Vec;

use super::{Matrix, ParamStore};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = || {
            store
                .ids()
                .map(|id| {
                    let (r, c) = store.value(id).shape();
                    Matrix::zeros(r, c)
                })
                .collect::<Vec<_>>()
        };
        Adam {
            cfg,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one update from the gradients currently in `store`.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        self.step += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - powi_u64(b1, self.step);
        let bc2 = 1.0 - powi_u64(b2, self.step);
        let lr = T::from_f64(self.cfg.step_size);
        let eps = T::from_f64(self.cfg.eps);
        let (b1t, b2t) = (T::from_f64(b1), T::from_f64(b2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - b1), T::from_f64(1.0 - b2));
        let (bc1, bc2) = (T::from_f64(bc1), T::from_f64(bc2));
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let g = store.grad(id).clone();
            let m = &mut self.m[id.index()];
            let v = &mut self.v[id.index()];
            let value = store.value_mut(id);
            for (((p, &gi), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1t * *mi + one_b1 * gi;
                *vi = b2t * *vi + one_b2 * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

fn powi_u64(base: f64, exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Rescale all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(store: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let total: f64 = store
        .ids()
        .map(|id| store.grad(id).data().iter().map(|g| g.as_f64() * g.as_f64()).sum::<f64>())
        .sum();
    let norm = num_traits::Float::sqrt(total);
    if norm > max_norm && norm > 0.0 {
        let s = T::from_f64(max_norm / norm);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.grad_mut(id).data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    #[test]
    fn adam_minimises_quadratic() {
        let mut store = ParamStore::<f64>::new();
        let p = store.insert("x", Matrix::from_rows(&[&[3.0, -2.0]])).unwrap();
        let mut opt = Adam::new(
            AdamConfig {
                step_size: 0.1,
                ..AdamConfig::default()
            },
            &store,
        );
        for _ in 0..500 {
            store.zero_grad();
            let mut t = Tape::new();
            let x = t.param(&store, p);
            let sq = t.mul(x, x).unwrap();
            let l = t.sum(sq);
            t.backward(l, &mut store).unwrap();
            opt.step(&mut store);
        }
        assert!(store.value(p).max_abs() < 1e-2);
        assert_eq!(opt.steps_taken(), 500);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut store = ParamStore::<f64>::new();
        let p = store.insert("x", Matrix::zeros(1, 2)).unwrap();
        store.grad_mut(p).data_mut().copy_from_slice(&[3.0, 4.0]);
        let before = clip_grad_norm(&mut store, 1.0);
        assert_eq!(before, 5.0);
        let g = store.grad(p);
        assert!((g.get(0, 0) - 0.6).abs() < 1e-12 && (g.get(0, 1) - 0.8).abs() < 1e-12);
    }
}
