//! The `ESNM1` model container.
//!
//! Little-endian binary layout:
//!
//! ```text
//! b"ESNM" u8 version=1
//! u8 variant (0 shallow, 1 deep, 2 hetero_shallow, 3 hetero_deep)
//! u8 tap (0 delayed, 1 current)
//! u32 n_in, u32 n_layers
//! per layer:
//!   u32 size, f64 spectral_radius, f64 leak_rate, f64 input_scale,
//!   f64 bias_scale, f64 connectivity, u32 delay, u64 seed,
//!   u8 leak_on_activation, u32 layer_n_in,
//!   u32 nnz, nnz x (u32 row, u32 col, f64 value)      recurrent W, COO
//!   size * layer_n_in x f64                           W_in, row-major
//!   size x f64                                        theta
//! u32 n_groups, n_groups x u32 sizes, n_groups x u32 delays
//! u8 has_readout [u32 rows, u32 cols, rows * cols x f64 row-major]
//! u32 n_meta, n_meta x (u32 len, utf8 key, u32 len, utf8 value)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::config::{LayerConfig, StateTap, SubGroupPartition, Variant};
use super::model::Reservoir;
use super::sparse::CsrMatrix;
use super::weights::{Layer, LayerWeights};
use crate::error::{Error, Result};
use crate::readout::ReadoutWeights;

const MAGIC: &[u8; 4] = b"ESNM";
const VERSION: u8 = 1;

/// A reservoir, its trained readout (if any) and free-form string metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub reservoir: Reservoir,
    pub readout: Option<ReadoutWeights>,
    pub meta: BTreeMap<String, String>,
}

impl ModelContainer {
    pub fn new(reservoir: Reservoir) -> Self {
        Self { reservoir, readout: None, meta: BTreeMap::new() }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.bytes(MAGIC);
        w.u8(VERSION);
        write_reservoir(&mut w, &self.reservoir);
        match &self.readout {
            None => w.u8(0),
            Some(r) => {
                w.u8(1);
                let m = r.matrix();
                w.u32(m.nrows());
                w.u32(m.ncols());
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        w.f64(m[(i, j)]);
                    }
                }
            }
        }
        w.u32(self.meta.len());
        for (k, v) in &self.meta {
            w.str(k);
            w.str(v);
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(format_err("missing ESNM magic"));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(format_err(&format!("unsupported version {version}")));
        }
        let reservoir = read_reservoir(&mut r)?;
        let readout = match r.u8()? {
            0 => None,
            1 => {
                let (rows, cols) = (r.u32()?, r.u32()?);
                let vals = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                Some(ReadoutWeights::new(DMatrix::from_row_slice(rows, cols, &vals))?)
            }
            t => return Err(format_err(&format!("bad readout flag {t}"))),
        };
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.str()?;
            let v = r.str()?;
            meta.insert(k, v);
        }
        if r.pos != bytes.len() {
            return Err(format_err(&format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { reservoir, readout, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

/// The reservoir section alone, as stored in the container.
pub fn encode_reservoir(reservoir: &Reservoir) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    write_reservoir(&mut w, reservoir);
    w.0
}

fn write_reservoir(w: &mut Writer, res: &Reservoir) {
    w.u8(res.variant().tag());
    w.u8(match res.tap() {
        StateTap::Delayed => 0,
        StateTap::Current => 1,
    });
    w.u32(res.n_in());
    w.u32(res.layers().len());
    for layer in res.layers() {
        let c = &layer.config;
        w.u32(c.size);
        w.f64(c.spectral_radius);
        w.f64(c.leak_rate);
        w.f64(c.input_scale);
        w.f64(c.bias_scale);
        w.f64(c.connectivity);
        w.u32(c.delay);
        w.0.extend_from_slice(&c.seed.to_le_bytes());
        w.u8(c.leak_on_activation as u8);
        let lw = &layer.weights;
        w.u32(lw.n_in());
        w.u32(lw.recurrent().nnz());
        for (r, col, v) in lw.recurrent().triplets() {
            w.0.extend_from_slice(&r.to_le_bytes());
            w.0.extend_from_slice(&col.to_le_bytes());
            w.f64(v);
        }
        for i in 0..lw.size() {
            for j in 0..lw.n_in() {
                w.f64(lw.input()[(i, j)]);
            }
        }
        for &t in lw.bias() {
            w.f64(t);
        }
    }
    match res.partition() {
        None => w.u32(0),
        Some(p) => {
            w.u32(p.sizes().len());
            p.sizes().iter().for_each(|&s| w.u32(s));
            p.delays().iter().for_each(|&d| w.u32(d));
        }
    }
}

fn read_reservoir(r: &mut Reader) -> Result<Reservoir> {
    let variant = Variant::from_tag(r.u8()?).ok_or_else(|| format_err("unknown variant tag"))?;
    let tap = match r.u8()? {
        0 => StateTap::Delayed,
        1 => StateTap::Current,
        t => return Err(format_err(&format!("unknown tap {t}"))),
    };
    let n_in = r.u32()?;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let config = LayerConfig {
            size: r.u32()?,
            spectral_radius: r.f64()?,
            leak_rate: r.f64()?,
            input_scale: r.f64()?,
            bias_scale: r.f64()?,
            connectivity: r.f64()?,
            delay: r.u32()?,
            seed: u64::from_le_bytes(r.take(8)?.try_into().unwrap()),
            leak_on_activation: r.u8()? != 0,
        };
        let layer_n_in = r.u32()?;
        let nnz = r.u32()?;
        let mut triplets = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let row = r.u32()? as u32;
            let col = r.u32()? as u32;
            triplets.push((row, col, r.f64()?));
        }
        let n = config.size;
        let w = CsrMatrix::from_triplets(n, n, &triplets)?;
        let w_in_vals = (0..n * layer_n_in).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let theta = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let weights = LayerWeights::new(w, DMatrix::from_row_slice(n, layer_n_in, &w_in_vals), theta)?;
        layers.push(Layer { config, weights });
    }
    let n_groups = r.u32()?;
    let partition = if n_groups == 0 {
        None
    } else {
        let sizes = (0..n_groups).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let delays = (0..n_groups).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        Some(SubGroupPartition::new(sizes, delays)?)
    };
    Ok(Reservoir::from_layers(variant, n_in, layers, partition)?.with_tap(tap))
}

fn format_err(msg: &str) -> Error {
    Error::Format { kind: "ESNM1", msg: msg.to_string() }
}

struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err("truncated container"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format_err("metadata is not utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(variant: Variant, seed: u64) -> Reservoir {
        let cfg = LayerConfig { size: 12, seed, bias_scale: 0.1, ..Default::default() };
        match variant {
            Variant::Shallow => Reservoir::build(variant, 3, &[cfg], None),
            Variant::Deep => Reservoir::build(variant, 3, &[cfg, LayerConfig { seed: seed + 1, ..cfg }], None),
            Variant::HeteroShallow => {
                Reservoir::build(variant, 3, &[cfg], Some(SubGroupPartition::equal(12, vec![1, 3, 5]).unwrap()))
            }
            Variant::HeteroDeep => Reservoir::build(
                variant,
                3,
                &[LayerConfig { delay: 1, ..cfg }, LayerConfig { delay: 3, seed: seed + 1, ..cfg }],
                None,
            ),
        }
        .unwrap()
    }

    #[test]
    fn rejects_corruption() {
        let bytes = ModelContainer::new(sample(Variant::Shallow, 1)).encode();
        assert!(ModelContainer::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ModelContainer::decode(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(ModelContainer::decode(&bad), Err(Error::Format { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn lossless_roundtrip(v in 0usize..4, seed in any::<u32>(), with_readout in any::<bool>()) {
            let mut c = ModelContainer::new(sample(Variant::ALL[v], seed as u64));
            if with_readout {
                let m = DMatrix::from_fn(4, 15, |i, j| (i as f64 - j as f64) / 7.0);
                c.readout = Some(ReadoutWeights::new(m).unwrap());
            }
            c.meta.insert("context.width".into(), "14".into());
            let back = ModelContainer::decode(&c.encode()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.encode(), c.encode());
        }
    }
}
