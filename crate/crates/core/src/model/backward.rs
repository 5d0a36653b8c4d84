use ndarray::{Array2, Axis, Zip};

use super::forward::{BatchForward, BnCache};
use super::params::{BatchNorm, Dense, ModelParams};
use super::{cst, Scalar};
use crate::error::{Error, Result};

/// Accumulates into `grads` the gradient of
/// `sum_b weights[b] * -log p_b(actions[b])` with respect to every trainable
/// tensor. `actions[b]` is a cell index `u * n + v`.
///
/// The forward pass must have been run with `retain = true`.
pub fn backward<F: Scalar>(
    params: &ModelParams<F>,
    fwd: &BatchForward<F>,
    actions: &[usize],
    weights: &[f64],
    grads: &mut ModelParams<F>,
) -> Result<()> {
    let cache = fwd
        .cache
        .as_ref()
        .ok_or_else(|| Error::Usage("backward needs a forward pass run with retention".into()))?;
    let (batch, n) = (fwd.batch, fwd.n);
    let cells = n * n;
    if actions.len() != batch || weights.len() != batch {
        return Err(Error::arg("one action and one weight per batch member are required"));
    }
    for (b, &a) in actions.iter().enumerate() {
        if a >= cells || !cache.allowed[b * cells + a] {
            return Err(Error::arg(format!("action cell {a} of batch member {b} is masked or out of range")));
        }
    }

    // logits -> raw decoder output
    let clip = params.hyper.clip;
    let mut draw = Array2::<F>::zeros((batch * cells, 1));
    for b in 0..batch {
        for c in 0..cells {
            let k = b * cells + c;
            if !cache.allowed[k] {
                continue;
            }
            let target = if c == actions[b] { 1.0 } else { 0.0 };
            let du = weights[b] * (fwd.probs[[b, c]] - target);
            let t = cache.tanh[k].to_f64().unwrap();
            draw[[k, 0]] = cst(du * clip * (1.0 - t * t));
        }
    }

    // decoder
    let last = params.decoder.len() - 1;
    let mut dz = draw;
    let states = &cache.states;
    let e_final = &states.last().expect("encoder output").e;
    let mut d_e = Array2::<F>::zeros(e_final.raw_dim());
    for k in (0..=last).rev() {
        let input_owned;
        let input = if k == 0 {
            e_final
        } else {
            input_owned = cache.dec_pre[k - 1].mapv(|v| if v > F::zero() { v } else { F::zero() });
            &input_owned
        };
        dense_backward(&mut grads.decoder[k], input, &dz);
        let dx = dz.dot(&params.decoder[k].weight.t());
        if k == 0 {
            d_e = dx;
        } else {
            let pre = &cache.dec_pre[k - 1];
            dz = dx;
            Zip::from(&mut dz).and(pre).for_each(|g, &p| {
                if p <= F::zero() {
                    *g = F::zero();
                }
            });
        }
    }

    let d = params.hyper.d;
    let mut d_h = Array2::<F>::zeros(states.last().unwrap().h.raw_dim());
    for l in (0..params.layers.len()).rev() {
        let lp = &params.layers[l];
        let lc = &cache.layers[l];
        let h = &states[l].h;
        let e = &states[l].e;
        let gl = &mut grads.layers[l];

        // node branch
        let mut dy = d_h.clone();
        Zip::from(&mut dy).and(&lc.node.out).for_each(|g, &y| {
            if y <= F::zero() {
                *g = F::zero();
            }
        });
        let dp = bn_backward(&dy, &lp.node_norm, &lc.node, &mut gl.node_norm).as_standard_layout().into_owned();
        // edge branch
        let mut dzq = d_e.clone();
        Zip::from(&mut dzq).and(&lc.edge.out).for_each(|g, &z| {
            if z <= F::zero() {
                *g = F::zero();
            }
        });
        let dq = bn_backward(&dzq, &lp.edge_norm, &lc.edge, &mut gl.edge_norm).as_standard_layout().into_owned();

        // residual paths
        let mut dh_in = d_h;
        let mut de_in = d_e.as_standard_layout().into_owned();

        gl.w1 += &h.t().dot(&dp);
        dh_in += &dp.dot(&lp.w1.t());

        // gated aggregation
        let mut dg = Array2::<F>::zeros(lc.g.raw_dim());
        {
            let sig = lc.sig.as_slice().expect("standard layout");
            let g = lc.g.as_slice().expect("standard layout");
            let dp_s = dp.as_slice().expect("standard layout");
            let dg_s = dg.as_slice_mut().expect("standard layout");
            let de_s = de_in.as_slice_mut().expect("standard layout");
            for b in 0..batch {
                for i in 0..n {
                    let dpi = &dp_s[(b * n + i) * d..(b * n + i + 1) * d];
                    for j in 0..n {
                        let row = ((b * n + i) * n + j) * d;
                        let gj = (b * n + j) * d;
                        for c in 0..d {
                            let s = sig[row + c];
                            de_s[row + c] += dpi[c] * g[gj + c] * s * (F::one() - s);
                            dg_s[gj + c] += dpi[c] * s;
                        }
                    }
                }
            }
        }
        gl.w2 += &h.t().dot(&dg);
        dh_in += &dg.dot(&lp.w2.t());

        gl.w3 += &e.t().dot(&dq);
        de_in += &dq.dot(&lp.w3.t());

        let mut da4 = Array2::<F>::zeros(h.raw_dim());
        let mut da5 = Array2::<F>::zeros(h.raw_dim());
        {
            let dq_s = dq.as_slice().expect("standard layout");
            let a4 = da4.as_slice_mut().expect("standard layout");
            let a5 = da5.as_slice_mut().expect("standard layout");
            for b in 0..batch {
                for i in 0..n {
                    for j in 0..n {
                        let row = ((b * n + i) * n + j) * d;
                        for c in 0..d {
                            let v = dq_s[row + c];
                            a4[(b * n + i) * d + c] += v;
                            a5[(b * n + j) * d + c] += v;
                        }
                    }
                }
            }
        }
        gl.w4 += &h.t().dot(&da4);
        gl.w5 += &h.t().dot(&da5);
        dh_in += &da4.dot(&lp.w4.t());
        dh_in += &da5.dot(&lp.w5.t());

        d_h = dh_in;
        d_e = de_in;
    }

    dense_backward(&mut grads.node_proj, &cache.nodes, &d_h);
    dense_backward(&mut grads.edge_proj, &cache.edges, &d_e);
    Ok(())
}

fn dense_backward<F: Scalar>(grad: &mut Dense<F>, input: &Array2<F>, dout: &Array2<F>) {
    grad.weight += &input.t().dot(dout);
    grad.bias += &dout.sum_axis(Axis(0));
}

fn bn_backward<F: Scalar>(dy: &Array2<F>, bn: &BatchNorm<F>, cache: &BnCache<F>, grad: &mut BatchNorm<F>) -> Array2<F> {
    let mut dgamma = Array2::<F>::zeros((1, dy.ncols()));
    Zip::from(dy.rows()).and(cache.xhat.rows()).for_each(|g, x| {
        Zip::from(dgamma.row_mut(0)).and(&g).and(&x).for_each(|a, &g, &x| *a += g * x);
    });
    let dgamma = dgamma.row(0).to_owned();
    let dbeta = dy.sum_axis(Axis(0));
    grad.gamma += &dgamma;
    grad.beta += &dbeta;

    let mut dx = dy.clone();
    if cache.batch_stats {
        // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
        let m: F = cst(dy.nrows() as f64);
        let mean_dxhat = (&bn.gamma * &dbeta).mapv(|v| v / m);
        let mean_dxhat_x = (&bn.gamma * &dgamma).mapv(|v| v / m);
        Zip::from(dx.rows_mut()).and(cache.xhat.rows()).for_each(|mut row, x| {
            Zip::from(&mut row)
                .and(&x)
                .and(&bn.gamma)
                .and(&cache.inv_std)
                .and(&mean_dxhat)
                .and(&mean_dxhat_x)
                .for_each(|v, &x, &g, &s, &mg, &mgx| *v = s * (g * *v - mg - x * mgx));
        });
    } else {
        Zip::from(dx.rows_mut()).for_each(|mut row| {
            Zip::from(&mut row).and(&bn.gamma).and(&cache.inv_std).for_each(|v, &g, &s| *v = *v * g * s);
        });
    }
    dx
}
