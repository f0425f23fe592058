use rand::Rng;

use super::config::{JerryNetConfig, Shape3};
use crate::error::{Error, Result};
use crate::seed::rng;

/// A named parameter tensor with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensor {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name,
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Every weight and bias of the network, in forward order: for each conv a
/// kernel `[out, in, kh, kw]` followed by its bias `[out]`, then for each dense
/// layer a weight `[out, in]` followed by its bias `[out]`.
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tensors: Vec<ParamTensor>,
}

impl ModelParams {
    /// All-zero parameters laid out for `cfg` on an input of shape `input`.
    pub fn zeros(cfg: &JerryNetConfig, input: Shape3) -> Result<Self> {
        let mut tensors = Vec::new();
        let [mut c, _, _] = input;
        cfg.block_shapes(input)?;
        for (b, block) in cfg.blocks.iter().enumerate() {
            for k in 0..block.convs {
                let out = block.out_channels;
                tensors.push(ParamTensor::zeros(
                    format!("block{b}.conv{k}.weight"),
                    vec![out, c, cfg.kernel[0], cfg.kernel[1]],
                ));
                tensors.push(ParamTensor::zeros(format!("block{b}.conv{k}.bias"), vec![out]));
                c = out;
            }
        }
        let mut width = cfg.flat_dim(input)?;
        let dims = cfg.fc_dims.iter().copied().chain(std::iter::once(cfg.num_classes));
        for (i, out) in dims.enumerate() {
            tensors.push(ParamTensor::zeros(format!("fc{i}.weight"), vec![out, width]));
            tensors.push(ParamTensor::zeros(format!("fc{i}.bias"), vec![out]));
            width = out;
        }
        Ok(Self { tensors })
    }

    /// He-uniform weights, U(−√(6/fan_in), √(6/fan_in)); zero biases.
    pub fn he_uniform(cfg: &JerryNetConfig, input: Shape3, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(cfg, input)?;
        let mut r = rng(seed);
        for t in params.tensors.iter_mut().filter(|t| t.shape.len() > 1) {
            let fan_in: usize = t.shape[1..].iter().product();
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in t.data.iter_mut() {
                *v = r.random_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
        }
    }

    /// Total number of scalars.
    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (tensor index, offset) of flat scalar `i`.
    pub fn locate(&self, mut i: usize) -> Option<(usize, usize)> {
        for (ti, t) in self.tensors.iter().enumerate() {
            if i < t.data.len() {
                return Some((ti, i));
            }
            i -= t.data.len();
        }
        None
    }

    pub fn get_flat(&self, i: usize) -> f64 {
        let (t, o) = self.locate(i).expect("flat index in range");
        self.tensors[t].data[o]
    }

    pub fn set_flat(&mut self, i: usize, v: f64) {
        let (t, o) = self.locate(i).expect("flat index in range");
        self.tensors[t].data[o] = v;
    }

    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors.iter().flat_map(|t| t.data.iter().copied())
    }

    pub fn all_finite(&self) -> bool {
        self.iter_flat().all(f64::is_finite)
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.tensors.iter_mut().flat_map(|t| t.data.iter_mut()) {
            *v *= factor;
        }
    }

    /// Checks this store matches the layout `cfg` expects for `input`.
    pub fn check_layout(&self, cfg: &JerryNetConfig, input: Shape3) -> Result<()> {
        let expected = Self::zeros(cfg, input)?;
        let shapes = |p: &ModelParams| p.tensors.iter().map(|t| t.shape.clone()).collect::<Vec<_>>();
        if shapes(self) != shapes(&expected) {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", shapes(&expected)),
                actual: format!("{:?}", shapes(self)),
            });
        }
        if !self.all_finite() {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(())
    }
}
