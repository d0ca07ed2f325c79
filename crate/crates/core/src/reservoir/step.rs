//! Single-step state updates for the four reservoir regimes.

use super::config::SubGroupPartition;
use super::delay::DelayBuffer;
use super::weights::{Layer, LayerWeights};
use crate::error::{Error, Result};

fn check_dims(w: &LayerWeights, x: usize, u: usize) -> Result<()> {
    if x != w.size() || u != w.n_in() {
        return Err(Error::shape(format!("layer expects state {} and input {}, got {x} and {u}", w.size(), w.n_in())));
    }
    Ok(())
}

/// `out = (1-a) prev + [a] tanh(pre)`, in place over `pre`.
fn leaky_tanh(prev: &[f64], pre: &mut [f64], leak: f64, leak_on_activation: bool) -> Result<()> {
    let gain = if leak_on_activation { leak } else { 1.0 };
    for (p, &x) in pre.iter_mut().zip(prev) {
        *p = (1.0 - leak) * x + gain * p.tanh();
        if !p.is_finite() {
            return Err(Error::Numerical { step: 0, msg: "non-finite reservoir state".into() });
        }
    }
    Ok(())
}

/// Leaky-integrator update of one reservoir. No output feedback.
pub fn step_shallow(x: &[f64], u: &[f64], w: &LayerWeights, leak: f64, leak_on_activation: bool) -> Result<Vec<f64>> {
    check_dims(w, x.len(), u.len())?;
    let mut next = vec![0.0; x.len()];
    w.preactivation(u, x, &mut next);
    leaky_tanh(x, &mut next, leak, leak_on_activation)?;
    Ok(next)
}

/// Heterogeneous shallow update: each sub-group's slice of the previous
/// state is replaced by that slice `tau_i` steps further back, and the
/// ordinary update runs on that mixed-age state. The input enters only
/// through `W_in`. The result is pushed into `buffer` and returned.
pub fn step_hetero_shallow(
    buffer: &mut DelayBuffer,
    u: &[f64],
    w: &LayerWeights,
    leak: f64,
    partition: &SubGroupPartition,
    leak_on_activation: bool,
) -> Result<Vec<f64>> {
    check_dims(w, buffer.dim(), u.len())?;
    if partition.total() != w.size() {
        return Err(Error::shape(format!("partition covers {} neurons, layer has {}", partition.total(), w.size())));
    }
    if buffer.capacity() < partition.max_delay() + 1 {
        return Err(Error::config("delay buffer shorter than the largest group delay"));
    }
    let delayed = mixed_age_state(buffer, partition);
    let next = step_shallow(&delayed, u, w, leak, leak_on_activation)?;
    buffer.push(next.clone());
    Ok(next)
}

/// Concatenation of each group's slice read at that group's delay.
pub(crate) fn mixed_age_state(buffer: &DelayBuffer, partition: &SubGroupPartition) -> Vec<f64> {
    let mut out = vec![0.0; buffer.dim()];
    for (range, delay) in partition.ranges() {
        buffer.read_into(delay, range.clone(), &mut out[range]);
    }
    out
}

/// Deep update: layer 1 is driven by `u`, layer `i > 1` by the state layer
/// `i-1` reached during this same step.
pub fn step_deep(states: &[Vec<f64>], u: &[f64], layers: &[Layer]) -> Result<Vec<Vec<f64>>> {
    if states.len() != layers.len() || layers.is_empty() {
        return Err(Error::shape(format!("{} states for {} layers", states.len(), layers.len())));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for (i, (layer, x)) in layers.iter().zip(states).enumerate() {
        let drive = if i == 0 { u } else { &out[i - 1] };
        let next = step_shallow(x, drive, &layer.weights, layer.config.leak_rate, layer.config.leak_on_activation)?;
        out.push(next);
    }
    Ok(out)
}

/// Heterogeneous deep update: layer `i` reads its own state `tau_i` steps
/// back (both in the leak term and through `W`), while the drive from the
/// layer below is that layer's fresh state. Results are pushed into the
/// per-layer buffers.
pub fn step_hetero_deep(buffers: &mut [DelayBuffer], u: &[f64], layers: &[Layer]) -> Result<Vec<Vec<f64>>> {
    if buffers.len() != layers.len() || layers.is_empty() {
        return Err(Error::shape(format!("{} buffers for {} layers", buffers.len(), layers.len())));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for (i, (layer, buffer)) in layers.iter().zip(buffers.iter_mut()).enumerate() {
        if buffer.capacity() < layer.config.delay + 1 {
            return Err(Error::config(format!("delay buffer of layer {i} shorter than its delay")));
        }
        let delayed = buffer.read(layer.config.delay);
        let drive = if i == 0 { u } else { &out[i - 1] };
        let next =
            step_shallow(&delayed, drive, &layer.weights, layer.config.leak_rate, layer.config.leak_on_activation)?;
        buffer.push(next.clone());
        out.push(next);
    }
    Ok(out)
}
