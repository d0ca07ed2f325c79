use nalgebra::DMatrix;

use super::config::{LayerConfig, StateTap, SubGroupPartition, Variant};
use super::delay::DelayBuffer;
use super::step::{mixed_age_state, step_deep, step_hetero_deep, step_hetero_shallow, step_shallow};
use super::weights::Layer;
use crate::error::{Error, Result};

/// A reservoir of fixed random weights in one of the four regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    variant: Variant,
    n_in: usize,
    layers: Vec<Layer>,
    partition: Option<SubGroupPartition>,
    tap: StateTap,
}

impl Reservoir {
    /// Samples every layer from its config. Layer `i > 0` takes the size of
    /// layer `i-1` as its input dimension.
    pub fn build(
        variant: Variant,
        n_in: usize,
        configs: &[LayerConfig],
        partition: Option<SubGroupPartition>,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(configs.len());
        let mut dim = n_in;
        for cfg in configs {
            let layer = Layer::init(*cfg, dim)?;
            dim = layer.size();
            layers.push(layer);
        }
        Self::from_layers(variant, n_in, layers, partition)
    }

    /// Assembles a reservoir from existing layers after checking that the
    /// variant, layer chain and partition are consistent.
    pub fn from_layers(
        variant: Variant,
        n_in: usize,
        layers: Vec<Layer>,
        partition: Option<SubGroupPartition>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a reservoir needs at least one layer"));
        }
        if !variant.is_deep() && layers.len() != 1 {
            return Err(Error::config(format!("{variant} reservoir takes exactly one layer, got {}", layers.len())));
        }
        let mut dim = n_in;
        for (i, l) in layers.iter().enumerate() {
            l.config.validate()?;
            if l.weights.n_in() != dim {
                return Err(Error::shape(format!(
                    "layer {i} expects {} inputs, previous stage provides {dim}",
                    l.weights.n_in()
                )));
            }
            if l.config.size != l.size() {
                return Err(Error::shape(format!("layer {i} config size disagrees with its weights")));
            }
            if variant != Variant::HeteroDeep && l.config.delay != 0 {
                return Err(Error::config(format!("layer delays only apply to hetero_deep, not {variant}")));
            }
            dim = l.size();
        }
        match (variant, &partition) {
            (Variant::HeteroShallow, Some(p)) if p.total() != layers[0].size() => {
                return Err(Error::config(format!(
                    "partition covers {} neurons, reservoir has {}",
                    p.total(),
                    layers[0].size()
                )))
            }
            (Variant::HeteroShallow, None) => return Err(Error::config("hetero_shallow needs a sub-group partition")),
            (Variant::HeteroShallow, Some(_)) | (_, None) => {}
            (_, Some(_)) => return Err(Error::config(format!("{variant} does not take a partition"))),
        }
        Ok(Self { variant, n_in, layers, partition, tap: StateTap::default() })
    }

    pub fn with_tap(mut self, tap: StateTap) -> Self {
        self.tap = tap;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn partition(&self) -> Option<&SubGroupPartition> {
        self.partition.as_ref()
    }

    pub fn tap(&self) -> StateTap {
        self.tap
    }

    /// Width of a state row: the sum of layer sizes.
    pub fn state_dim(&self) -> usize {
        self.layers.iter().map(Layer::size).sum()
    }

    pub fn start(&self) -> ReservoirState<'_> {
        ReservoirState::new(self)
    }

    /// Runs the whole input sequence (`T x n_in`) from the zero state and
    /// returns the states after `washout` (`(T - washout) x state_dim`), layers
    /// concatenated in order.
    pub fn run_sequence(&self, inputs: &DMatrix<f64>, washout: usize) -> Result<DMatrix<f64>> {
        self.run_from(inputs, washout, None)
    }

    /// As [`run_sequence`](Self::run_sequence), starting from the given
    /// per-layer states instead of zero.
    pub fn run_from(
        &self,
        inputs: &DMatrix<f64>,
        washout: usize,
        initial: Option<&[Vec<f64>]>,
    ) -> Result<DMatrix<f64>> {
        let t = inputs.nrows();
        if t == 0 {
            return Err(Error::EmptyInput("input sequence has no rows".into()));
        }
        if inputs.ncols() != self.n_in {
            return Err(Error::shape(format!(
                "reservoir expects {} input features, sequence has {}",
                self.n_in,
                inputs.ncols()
            )));
        }
        if washout >= t {
            return Err(Error::config(format!("washout {washout} leaves no rows of {t}")));
        }
        let mut state = self.start();
        if let Some(init) = initial {
            state.set(init)?;
        }
        let mut out = DMatrix::zeros(t - washout, self.state_dim());
        let mut u = vec![0.0; self.n_in];
        for step in 0..t {
            for (j, v) in u.iter_mut().enumerate() {
                *v = inputs[(step, j)];
            }
            let row = state.step(&u).map_err(|e| match e {
                Error::Numerical { msg, .. } => Error::Numerical { step, msg },
                other => other,
            })?;
            if step >= washout {
                for (c, v) in row.iter().enumerate() {
                    out[(step - washout, c)] = *v;
                }
            }
        }
        Ok(out)
    }
}

/// Mutable per-sequence state. Independent sequences each get their own
/// state while sharing the reservoir's weights.
#[derive(Debug, Clone)]
pub struct ReservoirState<'a> {
    model: &'a Reservoir,
    current: Vec<Vec<f64>>,
    buffers: Vec<DelayBuffer>,
    row: Vec<f64>,
}

impl<'a> ReservoirState<'a> {
    fn new(model: &'a Reservoir) -> Self {
        let current: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; l.size()]).collect();
        let buffers = match model.variant {
            Variant::HeteroShallow => {
                let p = model.partition.as_ref().expect("validated");
                vec![DelayBuffer::new(model.layers[0].size(), p.max_delay())]
            }
            Variant::HeteroDeep => model.layers.iter().map(|l| DelayBuffer::new(l.size(), l.config.delay)).collect(),
            _ => Vec::new(),
        };
        Self { model, current, buffers, row: vec![0.0; model.state_dim()] }
    }

    /// Replaces the state: for heterogeneous variants the given vectors
    /// become the single most recent history entry.
    pub fn set(&mut self, states: &[Vec<f64>]) -> Result<()> {
        if states.len() != self.current.len() || states.iter().zip(&self.current).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::shape("initial state does not match the layer sizes"));
        }
        self.current = states.to_vec();
        for (b, s) in self.buffers.iter_mut().zip(states) {
            b.clear();
            b.push(s.clone());
        }
        Ok(())
    }

    /// Freshest per-layer states.
    pub fn current(&self) -> &[Vec<f64>] {
        &self.current
    }

    /// Advances one step and returns the state row exposed to the readout.
    pub fn step(&mut self, u: &[f64]) -> Result<&[f64]> {
        let m = self.model;
        match m.variant {
            Variant::Shallow => {
                let l = &m.layers[0];
                self.current[0] =
                    step_shallow(&self.current[0], u, &l.weights, l.config.leak_rate, l.config.leak_on_activation)?;
            }
            Variant::Deep => self.current = step_deep(&self.current, u, &m.layers)?,
            Variant::HeteroShallow => {
                let l = &m.layers[0];
                self.current[0] = step_hetero_shallow(
                    &mut self.buffers[0],
                    u,
                    &l.weights,
                    l.config.leak_rate,
                    m.partition.as_ref().expect("validated"),
                    l.config.leak_on_activation,
                )?;
            }
            Variant::HeteroDeep => self.current = step_hetero_deep(&mut self.buffers, u, &m.layers)?,
        }
        self.fill_row();
        Ok(&self.row)
    }

    fn fill_row(&mut self) {
        let m = self.model;
        let mut offset = 0;
        match (m.variant, m.tap) {
            (Variant::HeteroShallow, StateTap::Delayed) => {
                let p = m.partition.as_ref().expect("validated");
                self.row.copy_from_slice(&mixed_age_state(&self.buffers[0], p));
            }
            (Variant::HeteroDeep, StateTap::Delayed) => {
                for (l, b) in m.layers.iter().zip(&self.buffers) {
                    let n = l.size();
                    b.read_into(l.config.delay, 0..n, &mut self.row[offset..offset + n]);
                    offset += n;
                }
            }
            _ => {
                for s in &self.current {
                    self.row[offset..offset + s.len()].copy_from_slice(s);
                    offset += s.len();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(t: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(t, n, |r, c| ((r * 7 + c * 3) % 11) as f64 / 11.0 - 0.5)
    }

    fn shallow(size: usize) -> Reservoir {
        let cfg = LayerConfig { size, seed: 4, ..Default::default() };
        Reservoir::build(Variant::Shallow, 2, &[cfg], None).unwrap()
    }

    #[test]
    fn row_counts_and_washout_suffix() {
        let r = shallow(20);
        let x = inputs(5, 2);
        let full = r.run_sequence(&x, 0).unwrap();
        assert_eq!(full.shape(), (5, 20));
        let tail = r.run_sequence(&x, 2).unwrap();
        assert_eq!(tail, full.rows(2, 3).into_owned());
        assert!(r.run_sequence(&x, 5).is_err());
        assert!(matches!(r.run_sequence(&DMatrix::zeros(0, 2), 0), Err(Error::EmptyInput(_))));
        assert!(matches!(r.run_sequence(&DMatrix::zeros(3, 4), 0), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_input_stays_at_origin() {
        let r = shallow(20);
        assert!(r.run_sequence(&DMatrix::zeros(10, 2), 0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deep_layers_chain_dimensions() {
        let cfgs: Vec<_> = [30, 20, 10]
            .iter()
            .enumerate()
            .map(|(i, &size)| LayerConfig { size, seed: i as u64, bias_scale: 0.1, ..Default::default() })
            .collect();
        let r = Reservoir::build(Variant::Deep, 3, &cfgs, None).unwrap();
        assert_eq!(r.layers()[1].weights.n_in(), 30);
        assert_eq!(r.run_sequence(&inputs(4, 3), 0).unwrap().ncols(), 60);
    }

    #[test]
    fn structural_validation() {
        let cfg = LayerConfig { size: 10, ..Default::default() };
        assert!(Reservoir::build(Variant::Shallow, 2, &[cfg, cfg], None).is_err());
        assert!(Reservoir::build(Variant::HeteroShallow, 2, &[cfg], None).is_err());
        let bad = SubGroupPartition::new(vec![3, 3], vec![0, 1]).unwrap();
        assert!(Reservoir::build(Variant::HeteroShallow, 2, &[cfg], Some(bad.clone())).is_err());
        assert!(Reservoir::build(Variant::Shallow, 2, &[cfg], Some(bad)).is_err());
        let delayed = LayerConfig { delay: 2, ..cfg };
        assert!(Reservoir::build(Variant::Deep, 2, &[delayed], None).is_err());
        assert!(Reservoir::build(Variant::HeteroDeep, 2, &[delayed], None).is_ok());
    }

    #[test]
    fn hetero_delayed_tap_lags_current_tap() {
        let cfg = LayerConfig { size: 6, seed: 2, ..Default::default() };
        let part = SubGroupPartition::new(vec![3, 3], vec![0, 2]).unwrap();
        let r = Reservoir::build(Variant::HeteroShallow, 2, &[cfg], Some(part)).unwrap();
        let x = inputs(8, 2);
        let delayed = r.run_sequence(&x, 0).unwrap();
        let current = r.clone().with_tap(StateTap::Current).run_sequence(&x, 0).unwrap();
        assert_eq!(delayed.columns(0, 3), current.columns(0, 3));
        // Group 2 exposes the state from two steps earlier.
        for t in 2..8 {
            for c in 3..6 {
                assert_eq!(delayed[(t, c)], current[(t - 2, c)]);
            }
        }
    }
}
