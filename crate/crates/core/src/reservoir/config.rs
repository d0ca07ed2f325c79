use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which state-update regime a model runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// One leaky-integrator reservoir.
    Shallow,
    /// A unidirectional stack of reservoirs.
    Deep,
    /// One reservoir split into sub-groups that read their own past state
    /// at per-group delays.
    HeteroShallow,
    /// A stack whose layer `i` reads its own state `tau_i` steps back.
    HeteroDeep,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Shallow, Variant::Deep, Variant::HeteroShallow, Variant::HeteroDeep];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Shallow => "shallow",
            Variant::Deep => "deep",
            Variant::HeteroShallow => "hetero_shallow",
            Variant::HeteroDeep => "hetero_deep",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Variant::Shallow => 0,
            Variant::Deep => 1,
            Variant::HeteroShallow => 2,
            Variant::HeteroDeep => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn is_deep(self) -> bool {
        matches!(self, Variant::Deep | Variant::HeteroDeep)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown model variant {s:?}")))
    }
}

/// Hyperparameters of one reservoir layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub size: usize,
    pub spectral_radius: f64,
    pub leak_rate: f64,
    /// Half-width of the uniform input weight distribution.
    pub input_scale: f64,
    /// Half-width of the uniform bias distribution.
    pub bias_scale: f64,
    /// Fraction of nonzero recurrent weights.
    pub connectivity: f64,
    /// Self-delay in steps (heterogeneous deep layers only).
    pub delay: usize,
    pub seed: u64,
    /// `x' = (1-a) x + a f(.)` when true, `x' = (1-a) x + f(.)` when false.
    pub leak_on_activation: bool,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            size: 100,
            spectral_radius: 0.3,
            leak_rate: 0.5,
            input_scale: 0.1,
            bias_scale: 0.0,
            connectivity: 0.1,
            delay: 0,
            seed: 0,
            leak_on_activation: true,
        }
    }
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.size == 0 {
            return bad("layer size must be positive".into());
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return bad(format!("leak rate {} outside (0, 1]", self.leak_rate));
        }
        if !(self.spectral_radius > 0.0) || !self.spectral_radius.is_finite() {
            return bad(format!("spectral radius {} must be positive", self.spectral_radius));
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return bad(format!("connectivity {} outside (0, 1]", self.connectivity));
        }
        if !(self.input_scale > 0.0) || !self.input_scale.is_finite() {
            return bad(format!("input scale {} must be positive", self.input_scale));
        }
        if !(self.bias_scale >= 0.0) || !self.bias_scale.is_finite() {
            return bad(format!("bias scale {} must be nonnegative", self.bias_scale));
        }
        Ok(())
    }
}

/// Contiguous neuron sub-groups and their self-delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubGroupPartition {
    group_sizes: Vec<usize>,
    group_delays: Vec<usize>,
}

impl SubGroupPartition {
    pub fn new(group_sizes: Vec<usize>, group_delays: Vec<usize>) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.len() != group_delays.len() {
            return Err(Error::config(format!("{} group sizes for {} delays", group_sizes.len(), group_delays.len())));
        }
        if group_sizes.contains(&0) {
            return Err(Error::config("sub-group sizes must be positive"));
        }
        Ok(Self { group_sizes, group_delays })
    }

    /// Splits `size` into `delays.len()` near-equal groups, larger first.
    pub fn equal(size: usize, delays: Vec<usize>) -> Result<Self> {
        let g = delays.len();
        if g == 0 || size < g {
            return Err(Error::config(format!("cannot split {size} neurons into {g} groups")));
        }
        let sizes = (0..g).map(|i| size / g + usize::from(i < size % g)).collect();
        Self::new(sizes, delays)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn delays(&self) -> &[usize] {
        &self.group_delays
    }

    pub fn total(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn max_delay(&self) -> usize {
        self.group_delays.iter().copied().max().unwrap_or(0)
    }

    /// `(start..end, delay)` per group.
    pub fn ranges(&self) -> impl Iterator<Item = (std::ops::Range<usize>, usize)> + '_ {
        self.group_sizes
            .iter()
            .scan(0, |start, &len| {
                let r = *start..*start + len;
                *start += len;
                Some(r)
            })
            .zip(self.group_delays.iter().copied())
    }
}

/// Which state a heterogeneous model exposes to the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateTap {
    /// Each group or layer contributes its state `tau` steps back, the same
    /// vector the next update reads.
    #[default]
    Delayed,
    /// Each group or layer contributes its freshest state.
    Current,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_tag(v.tag()), Some(v));
        }
        assert!("lstm".parse::<Variant>().is_err());
    }

    #[test]
    fn layer_validation() {
        assert!(LayerConfig::default().validate().is_ok());
        for bad in [
            LayerConfig { leak_rate: 0.0, ..Default::default() },
            LayerConfig { leak_rate: 1.5, ..Default::default() },
            LayerConfig { spectral_radius: 0.0, ..Default::default() },
            LayerConfig { connectivity: 0.0, ..Default::default() },
            LayerConfig { size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn equal_partition() {
        let p = SubGroupPartition::equal(10, vec![1, 3, 5]).unwrap();
        assert_eq!(p.sizes(), &[4, 3, 3]);
        assert_eq!(p.total(), 10);
        assert_eq!(p.max_delay(), 5);
        let ranges: Vec<_> = p.ranges().collect();
        assert_eq!(ranges, vec![(0..4, 1), (4..7, 3), (7..10, 5)]);
        assert!(SubGroupPartition::new(vec![1, 2], vec![0]).is_err());
    }
}
