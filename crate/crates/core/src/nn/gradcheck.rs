//! Central finite-difference checks for tape gradients.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::Result;

/// Step used for the central differences.
pub const STEP: f64 = 1e-5;

/// Largest elementwise relative error between the tape gradient and central
/// differences of the scalar `f` with respect to every entry of `inputs`.
/// The denominator is `max(|analytic|, |numeric|, floor)`.
pub fn max_relative_error(
    inputs: &[Tensor],
    floor: f64,
    f: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
) -> Result<f64> {
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs.iter().map(|t| g.input(t.clone())).collect();
        let out = f(&mut g, &ids)?;
        Ok(g.value(out).item())
    };
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &ids)?;
    let grads = g.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (k, &id) in ids.iter().enumerate() {
        let analytic = grads.of(&g, id);
        for i in 0..xs[k].data.len() {
            let orig = xs[k].data[i];
            xs[k].data[i] = orig + STEP;
            let up = eval(&xs)?;
            xs[k].data[i] = orig - STEP;
            let down = eval(&xs)?;
            xs[k].data[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// As [`max_relative_error`], perturbing every parameter of `store` instead
/// of explicit inputs. `stride` checks every `stride`-th scalar.
pub fn max_relative_error_params(
    store: &super::ParamStore,
    floor: f64,
    stride: usize,
    f: impl Fn(&mut Graph, &super::ParamStore) -> Result<NodeId>,
) -> Result<f64> {
    let eval = |s: &super::ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let out = f(&mut g, s)?;
        Ok(g.value(out).item())
    };
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let grads = g.backward(out)?.params(store);
    let mut s = store.clone();
    let mut worst: f64 = 0.0;
    let mut counter = 0usize;
    for k in 0..s.len() {
        for i in 0..s.tensors()[k].data.len() {
            counter += 1;
            if !counter.is_multiple_of(stride.max(1)) {
                continue;
            }
            let orig = s.tensors()[k].data[i];
            s.tensors_mut()[k].data[i] = orig + STEP;
            let up = eval(&s)?;
            s.tensors_mut()[k].data[i] = orig - STEP;
            let down = eval(&s)?;
            s.tensors_mut()[k].data[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = grads[k].data[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(floor));
        }
    }
    Ok(worst)
}
