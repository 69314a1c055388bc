//! The learned timestamp generator behind mutable triggers: a 5-layer MLP
//! `m -> 64 -> 64 -> 64 -> 64 -> m` with ReLU hidden activations and a
//! logistic output, so generated timestamps always land in `(0, 1)`.

// index loops here mirror the row-major matrix layout
#![allow(clippy::needless_range_loop)]

use super::TriggerError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hidden width of every generator layer.
pub const GENERATOR_HIDDEN: usize = 64;
/// Number of affine layers.
pub const GENERATOR_LAYERS: usize = 5;

pub const GENERATOR_MAGIC: &[u8; 4] = b"EVTG";
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *zo += acc;
        }
        z
    }
}

/// Learnable parameters of the trigger timestamp generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer gradients, same shapes as [`GeneratorParams`].
#[derive(Debug, Clone)]
pub struct GeneratorGrads {
    pub layers: Vec<DenseLayer>,
}

impl GeneratorGrads {
    pub fn add_assign(&mut self, other: &GeneratorGrads) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v *= k);
            l.b.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Flat gradient views matching [`GeneratorParams::param_groups_mut`].
    pub fn groups(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
            .collect()
    }
}

/// Forward-pass intermediates needed by [`GeneratorParams::backward`].
#[derive(Debug, Clone)]
pub struct GeneratorCache {
    /// Input to each layer; `inputs[0]` is the sampled timestamp vector.
    inputs: Vec<Vec<f64>>,
    /// Final logistic output.
    output: Vec<f64>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn layer_widths(m: usize) -> [(usize, usize); GENERATOR_LAYERS] {
    [
        (m, GENERATOR_HIDDEN),
        (GENERATOR_HIDDEN, GENERATOR_HIDDEN),
        (GENERATOR_HIDDEN, GENERATOR_HIDDEN),
        (GENERATOR_HIDDEN, GENERATOR_HIDDEN),
        (GENERATOR_HIDDEN, m),
    ]
}

impl GeneratorParams {
    /// Seeded Glorot-uniform initialization for a trigger of `m` events.
    pub fn init(m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_widths(m)
            .into_iter()
            .map(|(i, o)| {
                let scale = (6.0 / (i + o) as f64).sqrt();
                DenseLayer {
                    in_dim: i,
                    out_dim: o,
                    w: (0..i * o).map(|_| rng.random_range(-scale..scale)).collect(),
                    b: vec![0.0; o],
                }
            })
            .collect();
        GeneratorParams { layers }
    }

    /// All-zero parameters; the forward pass then outputs logistic(0) = 0.5
    /// everywhere.
    pub fn zeros(m: usize) -> Self {
        GeneratorParams {
            layers: layer_widths(m)
                .into_iter()
                .map(|(i, o)| DenseLayer::zeros(i, o))
                .collect(),
        }
    }

    /// Trigger event count this generator was built for.
    pub fn trigger_len(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, t: &[f64]) -> Result<Vec<f64>, TriggerError> {
        Ok(self.forward_cached(t)?.0)
    }

    /// Forward pass keeping per-layer inputs for the backward pass.
    pub fn forward_cached(&self, t: &[f64]) -> Result<(Vec<f64>, GeneratorCache), TriggerError> {
        if t.len() != self.trigger_len() {
            return Err(TriggerError::LengthMismatch {
                expected: self.trigger_len(),
                found: t.len(),
            });
        }
        let mut inputs = Vec::with_capacity(GENERATOR_LAYERS);
        let mut x = t.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            inputs.push(x.clone());
            let mut z = layer.affine(&x);
            if li + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            } else {
                for v in &mut z {
                    *v = logistic(*v);
                }
            }
            x = z;
        }
        let output = x.clone();
        Ok((x, GeneratorCache { inputs, output }))
    }

    /// Backpropagate `d_out = dL/d(output)` to parameter gradients.
    pub fn backward(&self, cache: &GeneratorCache, d_out: &[f64]) -> GeneratorGrads {
        assert_eq!(d_out.len(), cache.output.len());
        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
            .collect();
        // logistic derivative in terms of the output
        let mut dz: Vec<f64> = d_out
            .iter()
            .zip(&cache.output)
            .map(|(d, y)| d * y * (1.0 - y))
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &cache.inputs[li];
            let g = &mut grads[li];
            for o in 0..layer.out_dim {
                g.b[o] = dz[o];
                let row = &mut g.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (ri, xi) in row.iter_mut().zip(x) {
                    *ri = dz[o] * xi;
                }
            }
            if li == 0 {
                break;
            }
            // dL/dx = W^T dz, masked by the ReLU applied when x was produced
            let mut dx = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (dxi, wi) in dx.iter_mut().zip(row) {
                    *dxi += wi * dz[o];
                }
            }
            for (dxi, xi) in dx.iter_mut().zip(x) {
                if *xi <= 0.0 {
                    *dxi = 0.0;
                }
            }
            dz = dx;
        }
        GeneratorGrads { layers: grads }
    }

    /// Flat views over all parameter buffers, in checkpoint order.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }

    pub fn from_flat(&self, flat: &[f64]) -> GeneratorParams {
        let mut out = self.clone();
        let mut off = 0;
        for l in &mut out.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        assert_eq!(off, flat.len());
        out
    }

    /// Serialize as a versioned checkpoint:
    /// `"EVTG" | u32 version | u32 layer count`, then per layer
    /// `u32 in_dim | u32 out_dim | weights (out*in f64) | bias (out f64)`,
    /// all little-endian.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(GENERATOR_MAGIC);
        out.extend_from_slice(&GENERATOR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
            for v in l.w.iter().chain(l.b.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<GeneratorParams, TriggerError> {
        let bad = |m: &str| TriggerError::Checkpoint(m.to_string());
        let mut off = 0usize;
        let take = |off: &mut usize, n: usize| -> Result<&[u8], TriggerError> {
            if *off + n > bytes.len() {
                return Err(TriggerError::Checkpoint("truncated checkpoint".into()));
            }
            let s = &bytes[*off..*off + n];
            *off += n;
            Ok(s)
        };
        if take(&mut off, 4)? != GENERATOR_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
        if version != GENERATOR_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n_layers = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let out_dim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let mut read_f64s = |n: usize| -> Result<Vec<f64>, TriggerError> {
                take(&mut off, n * 8).map(|s| {
                    s.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect()
                })
            };
            let w = read_f64s(in_dim * out_dim)?;
            let b = read_f64s(out_dim)?;
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                w,
                b,
            });
        }
        if off != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        if layers.is_empty() {
            return Err(bad("no layers"));
        }
        Ok(GeneratorParams { layers })
    }
}
