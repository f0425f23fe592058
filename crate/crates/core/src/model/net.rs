//! Forward and backward passes of the direction CNN.

use super::config::{JerryNetConfig, Shape3};
use super::loss::{loss_and_logit_grad, softmax};
use super::params::ModelParams;
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::features::PhaseMatrix;

/// A dense c×h×w feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Shape3,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape3) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn new(shape: Shape3, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", shape),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub argmax: Direction,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probs = softmax(&logits);
        // Strict comparison keeps the lowest index on ties.
        let best = probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > probs[best] { i } else { best });
        Self {
            logits,
            probs,
            argmax: Direction::from_index(best).expect("nine outputs"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Conv {
        weight: usize,
        out_c: usize,
        kh: usize,
        kw: usize,
    },
    Relu,
    Pool {
        ph: usize,
        pw: usize,
    },
    Dense {
        weight: usize,
        out: usize,
    },
}

fn build_ops(cfg: &JerryNetConfig) -> Vec<Op> {
    let mut ops = Vec::new();
    let mut p = 0;
    for block in &cfg.blocks {
        for _ in 0..block.convs {
            ops.push(Op::Conv {
                weight: p,
                out_c: block.out_channels,
                kh: cfg.kernel[0],
                kw: cfg.kernel[1],
            });
            ops.push(Op::Relu);
            p += 2;
        }
        ops.push(Op::Pool {
            ph: cfg.pool[0],
            pw: cfg.pool[1],
        });
    }
    let n_dense = cfg.fc_dims.len() + 1;
    for (i, out) in cfg
        .fc_dims
        .iter()
        .copied()
        .chain(std::iter::once(cfg.num_classes))
        .enumerate()
    {
        ops.push(Op::Dense { weight: p, out });
        if i + 1 < n_dense {
            ops.push(Op::Relu);
        }
        p += 2;
    }
    ops
}

/// What backward needs from each op.
enum Saved {
    Input(Tensor),
    ReluOut(Tensor),
    PoolArgmax { input_shape: Shape3, argmax: Vec<usize> },
}

fn conv_forward(x: &Tensor, w: &[f64], b: &[f64], out_c: usize, kh: usize, kw: usize) -> Tensor {
    let [in_c, h, wd] = x.shape;
    let (oh, ow) = (h - kh + 1, wd - kw + 1);
    let mut y = Tensor::zeros([out_c, oh, ow]);
    for o in 0..out_c {
        let out_plane = &mut y.data[o * oh * ow..(o + 1) * oh * ow];
        out_plane.fill(b[o]);
        for i in 0..in_c {
            let in_plane = &x.data[i * h * wd..(i + 1) * h * wd];
            for a in 0..kh {
                for c in 0..kw {
                    let wt = w[((o * in_c + i) * kh + a) * kw + c];
                    for r in 0..oh {
                        let src = &in_plane[(r + a) * wd + c..(r + a) * wd + c + ow];
                        let dst = &mut out_plane[r * ow..(r + 1) * ow];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wt * s;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Returns (input gradient, kernel gradient, bias gradient).
fn conv_backward(x: &Tensor, w: &[f64], dy: &Tensor, kh: usize, kw: usize) -> (Tensor, Vec<f64>, Vec<f64>) {
    let [in_c, h, wd] = x.shape;
    let [out_c, oh, ow] = dy.shape;
    let mut dx = Tensor::zeros(x.shape);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_c];
    for o in 0..out_c {
        let g_plane = &dy.data[o * oh * ow..(o + 1) * oh * ow];
        db[o] = g_plane.iter().sum();
        for i in 0..in_c {
            let in_plane = &x.data[i * h * wd..(i + 1) * h * wd];
            let dx_plane = &mut dx.data[i * h * wd..(i + 1) * h * wd];
            for a in 0..kh {
                for c in 0..kw {
                    let widx = ((o * in_c + i) * kh + a) * kw + c;
                    let wt = w[widx];
                    let mut acc = 0.0;
                    for r in 0..oh {
                        let g = &g_plane[r * ow..(r + 1) * ow];
                        let row = (r + a) * wd + c;
                        let src = &in_plane[row..row + ow];
                        acc += g.iter().zip(src).map(|(g, s)| g * s).sum::<f64>();
                        let dst = &mut dx_plane[row..row + ow];
                        for (d, g) in dst.iter_mut().zip(g) {
                            *d += wt * g;
                        }
                    }
                    dw[widx] = acc;
                }
            }
        }
    }
    (dx, dw, db)
}

fn pool_forward(x: &Tensor, ph: usize, pw: usize) -> (Tensor, Vec<usize>) {
    let [c, h, w] = x.shape;
    let (oh, ow) = (h / ph, w / pw);
    let mut y = Tensor::zeros([c, oh, ow]);
    let mut argmax = vec![0; c * oh * ow];
    for ch in 0..c {
        for r in 0..oh {
            for col in 0..ow {
                let mut best_idx = (ch * h + r * ph) * w + col * pw;
                let mut best = x.data[best_idx];
                for a in 0..ph {
                    for b in 0..pw {
                        let idx = (ch * h + r * ph + a) * w + col * pw + b;
                        if x.data[idx] > best {
                            best = x.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ch * oh + r) * ow + col;
                y.data[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (y, argmax)
}

fn dense_forward(x: &[f64], w: &[f64], b: &[f64], out: usize) -> Vec<f64> {
    let n = x.len();
    (0..out)
        .map(|o| b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Forward pass recording what backward needs.
struct Trace {
    saved: Vec<Saved>,
    logits: Vec<f64>,
}

fn run_forward(ops: &[Op], params: &ModelParams, input: Tensor, keep: bool) -> Trace {
    let mut x = input;
    let mut saved = Vec::with_capacity(if keep { ops.len() } else { 0 });
    for op in ops {
        match *op {
            Op::Conv { weight, out_c, kh, kw } => {
                let y = conv_forward(
                    &x,
                    &params.tensors[weight].data,
                    &params.tensors[weight + 1].data,
                    out_c,
                    kh,
                    kw,
                );
                if keep {
                    saved.push(Saved::Input(x));
                }
                x = y;
            }
            Op::Relu => {
                for v in x.data.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                if keep {
                    saved.push(Saved::ReluOut(x.clone()));
                }
            }
            Op::Pool { ph, pw } => {
                let (y, argmax) = pool_forward(&x, ph, pw);
                if keep {
                    saved.push(Saved::PoolArgmax {
                        input_shape: x.shape,
                        argmax,
                    });
                }
                x = y;
            }
            Op::Dense { weight, out } => {
                let y = dense_forward(
                    &x.data,
                    &params.tensors[weight].data,
                    &params.tensors[weight + 1].data,
                    out,
                );
                if keep {
                    saved.push(Saved::Input(x));
                }
                x = Tensor {
                    shape: [out, 1, 1],
                    data: y,
                };
            }
        }
    }
    Trace { saved, logits: x.data }
}

fn run_backward(ops: &[Op], params: &ModelParams, trace: Trace, dlogits: Vec<f64>) -> ModelParams {
    let mut grads = params.zeros_like();
    let mut g = Tensor {
        shape: [dlogits.len(), 1, 1],
        data: dlogits,
    };
    for (op, saved) in ops.iter().zip(trace.saved).rev() {
        match (*op, saved) {
            (Op::Dense { weight, out }, Saved::Input(x)) => {
                let n = x.data.len();
                let w = &params.tensors[weight].data;
                let mut dx = vec![0.0; n];
                {
                    let dw = &mut grads.tensors[weight].data;
                    for o in 0..out {
                        let go = g.data[o];
                        let wrow = &w[o * n..(o + 1) * n];
                        let dwrow = &mut dw[o * n..(o + 1) * n];
                        for k in 0..n {
                            dwrow[k] = go * x.data[k];
                            dx[k] += go * wrow[k];
                        }
                    }
                }
                grads.tensors[weight + 1].data.copy_from_slice(&g.data);
                g = Tensor {
                    shape: x.shape,
                    data: dx,
                };
            }
            (Op::Relu, Saved::ReluOut(y)) => {
                for (gv, yv) in g.data.iter_mut().zip(&y.data) {
                    if *yv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            (Op::Pool { .. }, Saved::PoolArgmax { input_shape, argmax }) => {
                let mut dx = Tensor::zeros(input_shape);
                for (gv, &idx) in g.data.iter().zip(&argmax) {
                    dx.data[idx] += gv;
                }
                g = dx;
            }
            (Op::Conv { weight, kh, kw, .. }, Saved::Input(x)) => {
                let (dx, dw, db) = conv_backward(&x, &params.tensors[weight].data, &g, kh, kw);
                grads.tensors[weight].data = dw;
                grads.tensors[weight + 1].data = db;
                g = dx;
            }
            _ => unreachable!("trace and op list are built together"),
        }
    }
    grads
}

/// The network: a validated config bound to an input shape.
#[derive(Debug, Clone)]
pub struct JerryNet {
    cfg: JerryNetConfig,
    input_shape: Shape3,
    ops: Vec<Op>,
    param_shapes: Vec<Vec<usize>>,
}

impl JerryNet {
    /// Binds `cfg` to phase matrices with `num_bins` × `num_frames` entries per row.
    pub fn new(cfg: JerryNetConfig, num_bins: usize, num_frames: usize) -> Result<Self> {
        let input_shape = cfg.input_shape(num_bins, num_frames);
        let param_shapes = ModelParams::zeros(&cfg, input_shape)?
            .tensors
            .into_iter()
            .map(|t| t.shape)
            .collect();
        let ops = build_ops(&cfg);
        Ok(Self {
            cfg,
            input_shape,
            ops,
            param_shapes,
        })
    }

    pub fn config(&self) -> &JerryNetConfig {
        &self.cfg
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input_shape
    }

    pub fn init_params(&self, seed: u64) -> ModelParams {
        ModelParams::he_uniform(&self.cfg, self.input_shape, seed).expect("shape validated in new")
    }

    pub fn zero_params(&self) -> ModelParams {
        ModelParams::zeros(&self.cfg, self.input_shape).expect("shape validated in new")
    }

    fn to_input(&self, pm: &PhaseMatrix) -> Result<Tensor> {
        let expected = self.cfg.input_shape(pm.num_bins(), pm.num_frames());
        if expected != self.input_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.input_shape),
                actual: format!("{:?}", expected),
            });
        }
        // Both layouts share the row-major 3×F×T buffer.
        Tensor::new(self.input_shape, pm.as_slice().to_vec())
    }

    pub fn forward(&self, params: &ModelParams, pm: &PhaseMatrix) -> Result<Prediction> {
        self.forward_tensor(params, self.to_input(pm)?)
    }

    pub fn forward_tensor(&self, params: &ModelParams, input: Tensor) -> Result<Prediction> {
        self.check_input(params, &input)?;
        Ok(Prediction::from_logits(
            run_forward(&self.ops, params, input, false).logits,
        ))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backward(
        &self,
        params: &ModelParams,
        pm: &PhaseMatrix,
        label: Direction,
    ) -> Result<(f64, ModelParams, Prediction)> {
        self.backward_tensor(params, self.to_input(pm)?, label)
    }

    pub fn backward_tensor(
        &self,
        params: &ModelParams,
        input: Tensor,
        label: Direction,
    ) -> Result<(f64, ModelParams, Prediction)> {
        self.check_input(params, &input)?;
        let trace = run_forward(&self.ops, params, input, true);
        let prediction = Prediction::from_logits(trace.logits.clone());
        let (loss, dlogits) = loss_and_logit_grad(self.cfg.loss, &prediction, label);
        let grads = run_backward(&self.ops, params, trace, dlogits);
        Ok((loss, grads, prediction))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss_tensor(&self, params: &ModelParams, input: Tensor, label: Direction) -> Result<f64> {
        let p = self.forward_tensor(params, input)?;
        Ok(loss_and_logit_grad(self.cfg.loss, &p, label).0)
    }

    fn check_input(&self, params: &ModelParams, input: &Tensor) -> Result<()> {
        if input.shape != self.input_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.input_shape),
                actual: format!("{:?}", input.shape),
            });
        }
        let matches = params.tensors.len() == self.param_shapes.len()
            && params
                .tensors
                .iter()
                .zip(&self.param_shapes)
                .all(|(t, s)| &t.shape == s);
        if !matches {
            return Err(Error::ShapeMismatch {
                expected: "parameters laid out for this config".into(),
                actual: format!("{} tensors", params.tensors.len()),
            });
        }
        Ok(())
    }

    pub fn tensor_from(&self, pm: &PhaseMatrix) -> Result<Tensor> {
        self.to_input(pm)
    }
}
