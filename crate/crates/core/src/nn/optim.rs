//! SGD (with momentum) and Adam over a [`ParamStore`].
//!
//! Updates are applied per parameter in id order; together with the
//! deterministic kernels this keeps whole training runs reproducible.

use ndarray::ArrayD;

use super::store::{ParamId, ParamStore};
use super::tape::{Grads, Tape};
use super::Scalar;

pub trait Optimizer<F: Scalar> {
    /// Apply one update step from the gradients bound on `tape`.
    fn step(&mut self, store: &mut ParamStore<F>, tape: &Tape<F>, grads: &Grads<F>);
    fn set_lr(&mut self, lr: f64);
    fn lr(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct SgdConf {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConf {
    fn default() -> Self {
        SgdConf {
            lr: 0.02,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

pub struct Sgd<F: Scalar> {
    conf: SgdConf,
    velocity: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(store: &ParamStore<F>, conf: SgdConf) -> Self {
        Sgd {
            conf,
            velocity: vec![None; store.len()],
        }
    }
}

impl<F: Scalar> Optimizer<F> for Sgd<F> {
    fn step(&mut self, store: &mut ParamStore<F>, tape: &Tape<F>, grads: &Grads<F>) {
        let lr = F::from_f64(self.conf.lr);
        let mu = F::from_f64(self.conf.momentum);
        let wd = F::from_f64(self.conf.weight_decay);
        for (pid, var) in tape.bound_params() {
            let Some(grad) = grads.get(var) else { continue };
            let mut g = grad.clone();
            if self.conf.weight_decay != 0.0 {
                g = g + &store.value(pid).mapv(|v| v * wd);
            }
            let v = match &mut self.velocity[pid.0] {
                Some(v) => {
                    v.zip_mut_with(&g, |vi, &gi| *vi = *vi * mu + gi);
                    v.clone()
                }
                slot @ None => {
                    *slot = Some(g.clone());
                    g
                }
            };
            store
                .value_mut(pid)
                .zip_mut_with(&v, |p, &vi| *p = *p - lr * vi);
        }
    }

    fn set_lr(&mut self, lr: f64) {
        self.conf.lr = lr;
    }

    fn lr(&self) -> f64 {
        self.conf.lr
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConf {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConf {
    fn default() -> Self {
        AdamConf {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub struct Adam<F: Scalar> {
    conf: AdamConf,
    m: Vec<Option<ArrayD<F>>>,
    v: Vec<Option<ArrayD<F>>>,
    t: Vec<u64>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(store: &ParamStore<F>, conf: AdamConf) -> Self {
        Adam {
            conf,
            m: vec![None; store.len()],
            v: vec![None; store.len()],
            t: vec![0; store.len()],
        }
    }

    fn update(&mut self, pid: ParamId, value: &mut ArrayD<F>, grad: &ArrayD<F>) {
        let b1 = F::from_f64(self.conf.beta1);
        let b2 = F::from_f64(self.conf.beta2);
        let eps = F::from_f64(self.conf.eps);
        let one = F::one();
        self.t[pid.0] += 1;
        let t = self.t[pid.0] as i32;

        let m = self.m[pid.0].get_or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
        let v = self.v[pid.0].get_or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
        m.zip_mut_with(grad, |mi, &gi| *mi = b1 * *mi + (one - b1) * gi);
        v.zip_mut_with(grad, |vi, &gi| *vi = b2 * *vi + (one - b2) * gi * gi);

        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let lr = F::from_f64(self.conf.lr);
        ndarray::Zip::from(value)
            .and(&*m)
            .and(&*v)
            .for_each(|p, &mi, &vi| {
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                *p = *p - lr * mhat / (vhat.sqrt() + eps);
            });
    }
}

impl<F: Scalar> Optimizer<F> for Adam<F> {
    fn step(&mut self, store: &mut ParamStore<F>, tape: &Tape<F>, grads: &Grads<F>) {
        for (pid, var) in tape.bound_params() {
            let Some(grad) = grads.get(var) else { continue };
            let grad = grad.clone();
            self.update(pid, store.value_mut(pid), &grad);
        }
    }

    fn set_lr(&mut self, lr: f64) {
        self.conf.lr = lr;
    }

    fn lr(&self) -> f64 {
        self.conf.lr
    }
}
