//! Layer builders: plain-old-data structs holding parameter ids plus the
//! geometry needed to replay the op on a tape. He-style initialization is
//! drawn from a caller-supplied seeded RNG in f64, then converted, so f32
//! and f64 stores initialize identically.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::kernels::ConvConf;
use super::store::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::Scalar;

fn he_normal<F: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> ArrayD<F> {
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("normal params");
    let n: usize = shape.iter().product();
    let data: Vec<F> = (0..n).map(|_| F::from_f64(dist.sample(rng))).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("init shape")
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub conf: ConvConf,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn init<F: Scalar, R: Rng>(
        store: &mut ParamStore<F>,
        rng: &mut R,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        conf: ConvConf,
        bias: bool,
    ) -> Self {
        let w = store.add(
            format!("{name}.w"),
            he_normal(rng, &[out_c, in_c, k, k], in_c * k * k),
        );
        let b = bias.then(|| {
            store.add(
                format!("{name}.b"),
                ArrayD::from_elem(IxDyn(&[out_c]), F::zero()),
            )
        });
        Conv2d { w, b, conf }
    }

    pub fn forward<F: Scalar>(&self, t: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Var {
        let w = t.param(store, self.w);
        let b = self.b.map(|b| t.param(store, b));
        t.conv2d(x, w, b, self.conf)
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub conf: ConvConf,
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub fn init<F: Scalar, R: Rng>(
        store: &mut ParamStore<F>,
        rng: &mut R,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        conf: ConvConf,
        bias: bool,
    ) -> Self {
        let w = store.add(
            format!("{name}.w"),
            he_normal(rng, &[in_c, out_c, k, k], in_c * k * k),
        );
        let b = bias.then(|| {
            store.add(
                format!("{name}.b"),
                ArrayD::from_elem(IxDyn(&[out_c]), F::zero()),
            )
        });
        ConvTranspose2d { w, b, conf }
    }

    pub fn forward<F: Scalar>(&self, t: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Var {
        let w = t.param(store, self.w);
        let b = self.b.map(|b| t.param(store, b));
        t.conv_transpose2d(x, w, b, self.conf)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn init<F: Scalar, R: Rng>(
        store: &mut ParamStore<F>,
        rng: &mut R,
        name: &str,
        in_f: usize,
        out_f: usize,
        bias: bool,
    ) -> Self {
        let w = store.add(format!("{name}.w"), he_normal(rng, &[in_f, out_f], in_f));
        let b = bias.then(|| {
            store.add(
                format!("{name}.b"),
                ArrayD::from_elem(IxDyn(&[out_f]), F::zero()),
            )
        });
        Linear { w, b }
    }

    pub fn forward<F: Scalar>(&self, t: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Var {
        let w = t.param(store, self.w);
        let b = self.b.map(|b| t.param(store, b));
        t.linear(x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct GroupNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
    pub eps: f64,
}

impl GroupNorm {
    pub fn init<F: Scalar>(store: &mut ParamStore<F>, name: &str, channels: usize, groups: usize) -> Self {
        let gamma = store.add(
            format!("{name}.gamma"),
            ArrayD::from_elem(IxDyn(&[channels]), F::one()),
        );
        let beta = store.add(
            format!("{name}.beta"),
            ArrayD::from_elem(IxDyn(&[channels]), F::zero()),
        );
        GroupNorm {
            gamma,
            beta,
            groups,
            eps: 1e-5,
        }
    }

    pub fn forward<F: Scalar>(&self, t: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Var {
        let gamma = t.param(store, self.gamma);
        let beta = t.param(store, self.beta);
        t.group_norm(x, gamma, beta, self.groups, self.eps)
    }
}

/// Pre-activation residual block: x + conv(relu(conv(relu(x)))), both convs
/// 3x3 stride 1 with channel count preserved.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl ResidualBlock {
    pub fn init<F: Scalar, R: Rng>(
        store: &mut ParamStore<F>,
        rng: &mut R,
        name: &str,
        channels: usize,
    ) -> Self {
        let conf = ConvConf::new(1, 1);
        ResidualBlock {
            conv1: Conv2d::init(store, rng, &format!("{name}.conv1"), channels, channels, 3, conf, true),
            conv2: Conv2d::init(store, rng, &format!("{name}.conv2"), channels, channels, 3, conf, true),
        }
    }

    pub fn forward<F: Scalar>(&self, t: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Var {
        let a = t.relu(x);
        let a = self.conv1.forward(t, store, a);
        let a = t.relu(a);
        let a = self.conv2.forward(t, store, a);
        t.add(x, a)
    }
}
