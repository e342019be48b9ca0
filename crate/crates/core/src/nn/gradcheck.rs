//! Central-difference gradient verification.
//!
//! Re-runs an arbitrary forward closure with each checked parameter
//! perturbed by ±h and compares the analytic gradient element by element.
//! Run these checks in f64: f32 round-off cannot hit tight tolerances.

use ndarray::ArrayD;

use super::store::{ParamId, ParamStore};
use super::tape::{Tape, Var};

/// Worst-case finite-difference comparison for one parameter.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Analytic gradient (dense, zeros where no gradient flowed).
    pub analytic: ArrayD<f64>,
    pub numeric: ArrayD<f64>,
}

impl GradCheckReport {
    /// Relative error of `a` vs `b` with an absolute floor for near-zero pairs.
    fn rel(a: f64, b: f64) -> f64 {
        let denom = a.abs().max(b.abs());
        if denom < 1e-8 {
            0.0
        } else {
            (a - b).abs() / denom
        }
    }
}

/// Check analytic gradients of `forward`'s scalar output w.r.t. `params`
/// against central differences with step `h`.
///
/// `forward` must be a pure function of the store contents.
pub fn gradcheck<Fw>(
    store: &mut ParamStore<f64>,
    params: &[ParamId],
    h: f64,
    mut forward: Fw,
) -> Vec<GradCheckReport>
where
    Fw: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Var,
{
    // Analytic pass.
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store);
    let grads = tape.backward(loss);
    let bound = tape.bound_params();

    let mut reports = Vec::new();
    for &pid in params {
        let var = bound
            .iter()
            .find(|(id, _)| *id == pid)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("gradcheck: parameter {} not bound by forward", store.name(pid)));
        let shape = store.value(pid).raw_dim();
        let analytic = grads
            .get(var)
            .cloned()
            .unwrap_or_else(|| ArrayD::zeros(shape.clone()));

        let mut numeric = ArrayD::<f64>::zeros(shape);
        let n = store.value(pid).len();
        for i in 0..n {
            let orig = store.value(pid).as_slice().expect("standard layout")[i];

            store.value_mut(pid).as_slice_mut().expect("layout")[i] = orig + h;
            let mut tp = Tape::new();
            let lp = forward(&mut tp, store);
            let fp = tp.scalar(lp);

            store.value_mut(pid).as_slice_mut().expect("layout")[i] = orig - h;
            let mut tm = Tape::new();
            let lm = forward(&mut tm, store);
            let fm = tm.scalar(lm);

            store.value_mut(pid).as_slice_mut().expect("layout")[i] = orig;
            numeric.as_slice_mut().expect("layout")[i] = (fp - fm) / (2.0 * h);
        }

        let mut max_rel = 0.0f64;
        let mut max_abs = 0.0f64;
        for (&a, &nmr) in analytic.iter().zip(numeric.iter()) {
            max_rel = max_rel.max(GradCheckReport::rel(a, nmr));
            max_abs = max_abs.max((a - nmr).abs());
        }
        reports.push(GradCheckReport {
            name: store.name(pid).to_string(),
            max_rel_err: max_rel,
            max_abs_err: max_abs,
            analytic,
            numeric,
        });
    }
    reports
}

/// Convenience: assert all reports are within `tol` relative error.
pub fn assert_gradcheck(reports: &[GradCheckReport], tol: f64) {
    for r in reports {
        assert!(
            r.max_rel_err <= tol,
            "gradient check failed for {}: rel err {} > {} (abs {})",
            r.name,
            r.max_rel_err,
            tol,
            r.max_abs_err
        );
    }
}

#[cfg(test)]
mod tests {
    use super::super::kernels::ConvConf;
    use super::super::layers::{Conv2d, ConvTranspose2d, GroupNorm, Linear};
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn filled(shape: &[usize], f: impl Fn(usize) -> f64) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        ArrayD::from_shape_vec(IxDyn(shape), (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn conv2d_grads_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::<f64>::new();
        let conv = Conv2d::init(&mut store, &mut rng, "c", 2, 3, 3, ConvConf::new(2, 1), true);
        let x = filled(&[1, 2, 6, 6], |i| ((i as f64) * 0.31).sin());
        let params: Vec<_> = store.ids().collect();
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let xv = t.constant(x.clone());
            let y = conv.forward(t, s, xv);
            let y = t.sigmoid(y);
            t.mean_all(y)
        });
        assert_gradcheck(&reports, 1e-6);
    }

    #[test]
    fn conv_transpose2d_grads_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut store = ParamStore::<f64>::new();
        let convt =
            ConvTranspose2d::init(&mut store, &mut rng, "ct", 3, 2, 4, ConvConf::new(2, 1), true);
        let xid = store.add("x", filled(&[1, 3, 4, 4], |i| ((i as f64) * 0.17).cos()));
        let params: Vec<_> = store.ids().collect();
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let xv = t.param(s, xid);
            let y = convt.forward(t, s, xv);
            let y = t.sigmoid(y);
            t.mean_all(y)
        });
        assert_gradcheck(&reports, 1e-6);
    }

    #[test]
    fn linear_and_softmax_ce_grads_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::init(&mut store, &mut rng, "fc", 5, 4, true);
        let xid = store.add("x", filled(&[3, 5], |i| ((i as f64) * 0.23).sin()));
        let params: Vec<_> = store.ids().collect();
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let xv = t.param(s, xid);
            let y = lin.forward(t, s, xv);
            t.softmax_ce(y, &[1, 3, 0], Some(vec![1.0, 0.0, 1.0]), 2.0)
        });
        assert_gradcheck(&reports, 1e-6);
    }

    #[test]
    fn group_norm_grads_match_fd() {
        let mut store = ParamStore::<f64>::new();
        let gn = GroupNorm::init(&mut store, "gn", 4, 2);
        let xid = store.add("x", filled(&[2, 4, 3, 3], |i| ((i as f64) * 0.41).sin()));
        let params: Vec<_> = store.ids().collect();
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let xv = t.param(s, xid);
            let y = gn.forward(t, s, xv);
            let y = t.sigmoid(y);
            t.mean_all(y)
        });
        assert_gradcheck(&reports, 1e-5);
    }

    #[test]
    fn bce_smooth_l1_roi_align_grads_match_fd() {
        let mut store = ParamStore::<f64>::new();
        let xid = store.add("x", filled(&[1, 2, 6, 6], |i| ((i as f64) * 0.13).sin()));
        let target = filled(&[2, 2, 3, 3], |i| ((i % 2) as f64));
        let params: Vec<_> = store.ids().collect();
        let rois = vec![
            crate::nn::Roi {
                batch: 0,
                x0: 1.0,
                y0: 0.5,
                x1: 5.0,
                y1: 4.5,
            },
            crate::nn::Roi {
                batch: 0,
                x0: -1.0,
                y0: 2.0,
                x1: 4.0,
                y1: 7.0,
            },
        ];
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let xv = t.param(s, xid);
            let feats = t.roi_align(xv, &rois, 3, 1.0);
            let p = t.sigmoid(feats);
            let l_bce = t.bce(p, target.clone(), None, 36.0, 1e-7);
            let boxes = t.reshape(feats, &[9, 4]);
            let l_box = t.smooth_l1(
                boxes,
                filled(&[9, 4], |i| (i as f64) * 0.05),
                Some(vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]),
                1.0,
                6.0,
            );
            let l_box = t.scale(l_box, 0.5);
            t.add(l_bce, l_box)
        });
        assert_gradcheck(&reports, 1e-6);
    }

    #[test]
    fn detach_blocks_gradient_exactly() {
        let mut store = ParamStore::<f64>::new();
        let aid = store.add("a", filled(&[4], |i| i as f64 * 0.3 + 0.1));
        let bid = store.add("b", filled(&[4], |i| 0.9 - i as f64 * 0.2));
        let forward = |t: &mut Tape<f64>, s: &ParamStore<f64>| {
            let a = t.param(s, aid);
            let b = t.param(s, bid);
            // loss = mean((detach(a) - b)^2): gradient flows to b only.
            let da = t.detach(a);
            let d = t.sub(da, b);
            let d2 = t.mul(d, d);
            t.mean_all(d2)
        };
        // b's gradient is the true derivative and must match FD.
        let reports = gradcheck(&mut store, &[bid], 1e-5, forward);
        assert_gradcheck(&reports, 1e-6);
        // a is stop-gradient blocked: the analytic gradient is exactly zero
        // even though the value (and hence the FD derivative) does depend
        // on a. FD agreement is deliberately not expected here.
        let mut tape = Tape::new();
        let loss = forward(&mut tape, &store);
        let grads = tape.backward(loss);
        let a_var = tape
            .bound_params()
            .iter()
            .find(|(id, _)| *id == aid)
            .map(|(_, v)| *v)
            .unwrap();
        assert!(grads.get(a_var).is_none() || grads.get(a_var).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embed_scatter_grads_match_fd() {
        let mut store = ParamStore::<f64>::new();
        let table = store.add("cb", filled(&[4, 3], |i| ((i as f64) * 0.7).sin()));
        let params: Vec<_> = store.ids().collect();
        let reports = gradcheck(&mut store, &params, 1e-5, |t, s| {
            let tb = t.param(s, table);
            let rows = t.embed(tb, &[2, 0, 2, 1]);
            let sq = t.mul(rows, rows);
            t.mean_all(sq)
        });
        assert_gradcheck(&reports, 1e-6);
    }
}
