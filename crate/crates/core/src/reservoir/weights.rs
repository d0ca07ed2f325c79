use nalgebra::DMatrix;
use rand::Rng;

use super::config::LayerConfig;
use super::sparse::CsrMatrix;
use super::spectral::spectral_radius;
use crate::error::{Error, Result};
use crate::rng;

const MAX_DRAWS: u64 = 10;

/// Frozen random matrices of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    w: CsrMatrix,
    w_in: DMatrix<f64>,
    theta: Vec<f64>,
}

impl LayerWeights {
    pub fn new(w: CsrMatrix, w_in: DMatrix<f64>, theta: Vec<f64>) -> Result<Self> {
        let n = w.n_rows();
        if w.n_cols() != n || w_in.nrows() != n || theta.len() != n {
            return Err(Error::shape(format!(
                "layer weights disagree: W {}x{}, W_in {}x{}, theta {}",
                w.n_rows(),
                w.n_cols(),
                w_in.nrows(),
                w_in.ncols(),
                theta.len()
            )));
        }
        if w_in.ncols() == 0 {
            return Err(Error::shape("input weights need at least one column"));
        }
        if w.values().iter().chain(w_in.iter()).chain(&theta).any(|v| !v.is_finite()) {
            return Err(Error::Numerical { step: 0, msg: "non-finite layer weight".into() });
        }
        Ok(Self { w, w_in, theta })
    }

    pub fn size(&self) -> usize {
        self.theta.len()
    }

    pub fn n_in(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn recurrent(&self) -> &CsrMatrix {
        &self.w
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.w_in
    }

    pub fn bias(&self) -> &[f64] {
        &self.theta
    }

    /// `out = W_in u + W x + theta`.
    pub(crate) fn preactivation(&self, u: &[f64], x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.theta);
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                let col = self.w_in.column(j);
                out.iter_mut().zip(col.iter()).for_each(|(o, w)| *o += w * uj);
            }
        }
        self.w.mul_add(x, out);
    }
}

/// A layer's weights together with the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub config: LayerConfig,
    pub weights: LayerWeights,
}

impl Layer {
    pub fn init(config: LayerConfig, n_in: usize) -> Result<Self> {
        Ok(Self { weights: init_layer(&config, n_in)?, config })
    }

    pub fn size(&self) -> usize {
        self.weights.size()
    }
}

fn uniform(r: &mut impl Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        r.random_range(-half_width..=half_width)
    }
}

/// Samples a layer: sparse uniform [-1, 1] recurrent weights rescaled to the
/// configured spectral radius, dense uniform input weights and a uniform bias.
/// A draw whose recurrent matrix has zero spectral radius is repeated with a
/// fresh sub-seed, up to ten times.
pub fn init_layer(config: &LayerConfig, n_in: usize) -> Result<LayerWeights> {
    config.validate()?;
    if n_in == 0 {
        return Err(Error::config("layer input dimension must be positive"));
    }
    let n = config.size;
    let mut r = rng::seeded(rng::derive(config.seed, 1_000));
    let w_in = DMatrix::from_fn(n, n_in, |_, _| uniform(&mut r, config.input_scale));
    let theta: Vec<f64> = (0..n).map(|_| uniform(&mut r, config.bias_scale)).collect();

    for draw in 0..MAX_DRAWS {
        let mut r = rng::seeded(rng::derive(config.seed, draw));
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|_| {
                let mut row = Vec::new();
                for c in 0..n as u32 {
                    if r.random::<f64>() < config.connectivity {
                        row.push((c, r.random_range(-1.0..=1.0)));
                    }
                }
                row
            })
            .collect();
        let mut w = CsrMatrix::from_raw_rows(n, n, rows);
        let rho = spectral_radius(&w)?;
        if rho > 1e-12 {
            w.scale(config.spectral_radius / rho);
            return LayerWeights::new(w, w_in, theta);
        }
        log::debug!("recurrent draw {draw} for seed {} has zero spectral radius", config.seed);
    }
    Err(Error::Numerical { step: 0, msg: format!("recurrent matrix had zero spectral radius in {MAX_DRAWS} draws") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let cfg = LayerConfig { size: 50, seed: 9, bias_scale: 0.1, ..Default::default() };
        assert_eq!(init_layer(&cfg, 3).unwrap(), init_layer(&cfg, 3).unwrap());
        let other = LayerConfig { seed: 10, ..cfg };
        assert_ne!(init_layer(&cfg, 3).unwrap(), init_layer(&other, 3).unwrap());
    }

    #[test]
    fn weight_ranges() {
        let cfg = LayerConfig { size: 40, input_scale: 0.1, bias_scale: 0.2, seed: 1, ..Default::default() };
        let w = init_layer(&cfg, 252).unwrap();
        assert!(w.input().iter().all(|v| v.abs() <= 0.1));
        assert!(w.bias().iter().all(|v| v.abs() <= 0.2));
        assert!(w.bias().iter().any(|&v| v != 0.0));
        let zero_bias = init_layer(&LayerConfig { bias_scale: 0.0, ..cfg }, 3).unwrap();
        assert!(zero_bias.bias().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonzero_count_is_binomial() {
        let cfg = LayerConfig { size: 100, connectivity: 0.1, seed: 3, ..Default::default() };
        let w = init_layer(&cfg, 1).unwrap();
        // Binomial(10000, 0.1): mean 1000, sd 30.
        let nnz = w.recurrent().nnz() as f64;
        assert!((nnz - 1000.0).abs() <= 90.0, "nnz {nnz}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let w = CsrMatrix::zeros(2, 2);
        assert!(LayerWeights::new(w.clone(), DMatrix::zeros(3, 1), vec![0.0; 2]).is_err());
        assert!(LayerWeights::new(w, DMatrix::zeros(2, 0), vec![0.0; 2]).is_err());
    }
}
