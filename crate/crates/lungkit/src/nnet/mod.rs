//! CNN-BiGRU per-frame binary detector: two temporal convolutions with
//! rectifier activations feed a bidirectional GRU whose concatenated
//! hidden states map through an affine layer and sigmoid to one
//! probability per frame. Forward pass, exact analytic gradients
//! (backpropagation through time in both directions), training loop, and
//! model persistence.

mod io;
mod train;

pub use io::{load_model, save_model};
pub use train::{train, EpochLog, TrainConfig, TrainOutcome, TrainSample};

use crate::dataset::{SegmentGrid, Task};
use crate::dsp::{FeatureMatrix, NormStats};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability clip applied inside the binary cross-entropy.
pub const PROB_CLIP: f64 = 1e-7;

/// Network dimensions. Defaults follow the reference architecture; every
/// size is overridable for reduced test models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arch {
    pub in_channels: usize,
    pub conv1_out: usize,
    pub conv2_out: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            in_channels: crate::dsp::channels::TOTAL,
            conv1_out: 64,
            conv2_out: 64,
            kernel: 5,
            hidden: 64,
        }
    }
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.conv1_out == 0
            || self.conv2_out == 0
            || self.hidden == 0
            || self.kernel == 0
            || self.kernel.is_multiple_of(2)
        {
            return Err(Error::ConfigInvalid(format!(
                "bad architecture {self:?}: sizes must be positive, kernel odd"
            )));
        }
        Ok(())
    }
}

/// Temporal convolution, same-padding. Weight layout is `[k][in][out]`:
/// `weight[(k * in_ch + i) * out_ch + o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

impl ConvLayer {
    fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        ConvLayer {
            weight: vec![0.0; kernel * in_ch * out_ch],
            bias: vec![0.0; out_ch],
            in_ch,
            out_ch,
            kernel,
        }
    }

    /// `x` is `frames x in_ch` row-major; returns `frames x out_ch`.
    fn forward(&self, x: &[f64], frames: usize) -> Vec<f64> {
        let (inc, out, kk) = (self.in_ch, self.out_ch, self.kernel);
        let pad = kk / 2;
        let mut y = vec![0.0; frames * out];
        for t in 0..frames {
            let row = &mut y[t * out..(t + 1) * out];
            row.copy_from_slice(&self.bias);
            for k in 0..kk {
                let tt = t as isize + k as isize - pad as isize;
                if tt < 0 || tt >= frames as isize {
                    continue;
                }
                let xrow = &x[tt as usize * inc..(tt as usize + 1) * inc];
                for (i, &xv) in xrow.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let w = &self.weight[(k * inc + i) * out..(k * inc + i + 1) * out];
                    for (o, &wv) in w.iter().enumerate() {
                        row[o] += wv * xv;
                    }
                }
            }
        }
        y
    }

    /// Accumulate parameter gradients and (optionally) the input gradient.
    fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        frames: usize,
        dw: &mut [f64],
        db: &mut [f64],
        mut dx: Option<&mut [f64]>,
    ) {
        let (inc, out, kk) = (self.in_ch, self.out_ch, self.kernel);
        let pad = kk / 2;
        for t in 0..frames {
            let dyrow = &dy[t * out..(t + 1) * out];
            for (o, &g) in dyrow.iter().enumerate() {
                db[o] += g;
            }
            for k in 0..kk {
                let tt = t as isize + k as isize - pad as isize;
                if tt < 0 || tt >= frames as isize {
                    continue;
                }
                let tt = tt as usize;
                let xrow = &x[tt * inc..(tt + 1) * inc];
                for (i, &xv) in xrow.iter().enumerate() {
                    let base = (k * inc + i) * out;
                    if xv != 0.0 {
                        let dwrow = &mut dw[base..base + out];
                        for (o, &g) in dyrow.iter().enumerate() {
                            dwrow[o] += xv * g;
                        }
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let w = &self.weight[base..base + out];
                        let mut s = 0.0;
                        for (o, &g) in dyrow.iter().enumerate() {
                            s += w[o] * g;
                        }
                        dx[tt * inc + i] += s;
                    }
                }
            }
        }
    }
}

/// One GRU direction. Input-to-hidden matrices are `hidden x input`
/// row-major, hidden-to-hidden are `hidden x hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruWeights {
    pub w_update: Vec<f64>,
    pub u_update: Vec<f64>,
    pub b_update: Vec<f64>,
    pub w_reset: Vec<f64>,
    pub u_reset: Vec<f64>,
    pub b_reset: Vec<f64>,
    pub w_cand: Vec<f64>,
    pub u_cand: Vec<f64>,
    pub b_cand: Vec<f64>,
    pub input: usize,
    pub hidden: usize,
}

impl GruWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruWeights {
            w_update: vec![0.0; hidden * input],
            u_update: vec![0.0; hidden * hidden],
            b_update: vec![0.0; hidden],
            w_reset: vec![0.0; hidden * input],
            u_reset: vec![0.0; hidden * hidden],
            b_reset: vec![0.0; hidden],
            w_cand: vec![0.0; hidden * input],
            u_cand: vec![0.0; hidden * hidden],
            b_cand: vec![0.0; hidden],
            input,
            hidden,
        }
    }
}

/// Output layer: affine map from the concatenated hidden states to one
/// logit per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputLayer {
    pub weight: Vec<f64>,
    pub bias: f64,
}

/// All parameters of one detection model, plus the per-channel feature
/// statistics it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub task: Task,
    pub arch: Arch,
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub gru_fwd: GruWeights,
    pub gru_bwd: GruWeights,
    pub out: OutputLayer,
    pub norm: NormStats,
}

impl ModelParams {
    /// All-zero parameters (sigmoid(0) = 0.5 everywhere).
    pub fn zeros(task: Task, arch: Arch, norm: NormStats) -> Result<Self> {
        arch.validate()?;
        if norm.mean.len() != arch.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "norm stats cover {} channels, architecture wants {}",
                norm.mean.len(),
                arch.in_channels
            )));
        }
        Ok(ModelParams {
            task,
            arch,
            conv1: ConvLayer::zeros(arch.in_channels, arch.conv1_out, arch.kernel),
            conv2: ConvLayer::zeros(arch.conv1_out, arch.conv2_out, arch.kernel),
            gru_fwd: GruWeights::zeros(arch.conv2_out, arch.hidden),
            gru_bwd: GruWeights::zeros(arch.conv2_out, arch.hidden),
            out: OutputLayer {
                weight: vec![0.0; 2 * arch.hidden],
                bias: 0.0,
            },
            norm,
        })
    }

    /// Seeded initialization: weights uniform in `[-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)]`, biases zero. Sampling order is the tensor order,
    /// so identical seeds give identical parameters.
    pub fn init(task: Task, arch: Arch, norm: NormStats, seed: u64) -> Result<Self> {
        let mut params = ModelParams::zeros(task, arch, norm)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        };
        let k = arch.kernel;
        fill(&mut params.conv1.weight, arch.in_channels * k);
        fill(&mut params.conv2.weight, arch.conv1_out * k);
        for gru in [&mut params.gru_fwd, &mut params.gru_bwd] {
            let (inp, hid) = (gru.input, gru.hidden);
            fill(&mut gru.w_update, inp);
            fill(&mut gru.u_update, hid);
            fill(&mut gru.w_reset, inp);
            fill(&mut gru.u_reset, hid);
            fill(&mut gru.w_cand, inp);
            fill(&mut gru.u_cand, hid);
        }
        fill(&mut params.out.weight, 2 * arch.hidden);
        Ok(params)
    }

    /// Tensor names and lengths in flattening order.
    pub fn tensor_specs(arch: &Arch) -> Vec<(&'static str, usize)> {
        let k = arch.kernel;
        let (c0, c1, c2, h) = (
            arch.in_channels,
            arch.conv1_out,
            arch.conv2_out,
            arch.hidden,
        );
        let mut specs = vec![
            ("conv1.weight", k * c0 * c1),
            ("conv1.bias", c1),
            ("conv2.weight", k * c1 * c2),
            ("conv2.bias", c2),
        ];
        for dir in ["gru_fwd", "gru_bwd"] {
            for gate in ["update", "reset", "cand"] {
                // leak: &'static str needed; use a match over fixed names.
                let (w, u, b) = gate_names(dir, gate);
                specs.push((w, h * c2));
                specs.push((u, h * h));
                specs.push((b, h));
            }
        }
        specs.push(("out.weight", 2 * h));
        specs.push(("out.bias", 1));
        specs
    }

    pub fn param_count(&self) -> usize {
        ModelParams::tensor_specs(&self.arch)
            .iter()
            .map(|(_, len)| len)
            .sum()
    }

    /// Borrow tensors in flattening order.
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
        ];
        for gru in [&self.gru_fwd, &self.gru_bwd] {
            out.extend([
                gru.w_update.as_slice(),
                gru.u_update.as_slice(),
                gru.b_update.as_slice(),
                gru.w_reset.as_slice(),
                gru.u_reset.as_slice(),
                gru.b_reset.as_slice(),
                gru.w_cand.as_slice(),
                gru.u_cand.as_slice(),
                gru.b_cand.as_slice(),
            ]);
        }
        out.push(&self.out.weight);
        out.push(std::slice::from_ref(&self.out.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
        ];
        for gru in [&mut self.gru_fwd, &mut self.gru_bwd] {
            out.extend([
                gru.w_update.as_mut_slice(),
                gru.u_update.as_mut_slice(),
                gru.b_update.as_mut_slice(),
                gru.w_reset.as_mut_slice(),
                gru.u_reset.as_mut_slice(),
                gru.b_reset.as_mut_slice(),
                gru.w_cand.as_mut_slice(),
                gru.u_cand.as_mut_slice(),
                gru.b_cand.as_mut_slice(),
            ]);
        }
        out.push(&mut self.out.weight);
        out.push(std::slice::from_mut(&mut self.out.bias));
        out
    }

    /// Concatenate all tensors into one vector (gradient/optimizer layout).
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            flat.extend_from_slice(t);
        }
        flat
    }

    /// Overwrite all tensors from a flat vector in the same layout.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has {} values, model has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }
}

fn gate_names(dir: &str, gate: &str) -> (&'static str, &'static str, &'static str) {
    match (dir, gate) {
        ("gru_fwd", "update") => ("gru_fwd.w_update", "gru_fwd.u_update", "gru_fwd.b_update"),
        ("gru_fwd", "reset") => ("gru_fwd.w_reset", "gru_fwd.u_reset", "gru_fwd.b_reset"),
        ("gru_fwd", "cand") => ("gru_fwd.w_cand", "gru_fwd.u_cand", "gru_fwd.b_cand"),
        ("gru_bwd", "update") => ("gru_bwd.w_update", "gru_bwd.u_update", "gru_bwd.b_update"),
        ("gru_bwd", "reset") => ("gru_bwd.w_reset", "gru_bwd.u_reset", "gru_bwd.b_reset"),
        ("gru_bwd", "cand") => ("gru_bwd.w_cand", "gru_bwd.u_cand", "gru_bwd.b_cand"),
        _ => unreachable!("fixed tensor naming"),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[h] = sum_i w[h * cols + i] * x[i] (+ b[h])`
fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], b: Option<&[f64]>, out: &mut [f64]) {
    for h in 0..rows {
        let row = &w[h * cols..(h + 1) * cols];
        let mut acc = b.map_or(0.0, |b| b[h]);
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[h] = acc;
    }
}

/// `out[i] += sum_h w[h * cols + i] * g[h]`
fn matvec_transpose_acc(w: &[f64], rows: usize, cols: usize, g: &[f64], out: &mut [f64]) {
    for h in 0..rows {
        let row = &w[h * cols..(h + 1) * cols];
        let gv = g[h];
        if gv == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(row) {
            *o += wv * gv;
        }
    }
}

/// `dw[h * cols + i] += g[h] * x[i]`
fn outer_acc(dw: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    for h in 0..rows {
        let gv = g[h];
        if gv == 0.0 {
            continue;
        }
        let row = &mut dw[h * cols..(h + 1) * cols];
        for (o, xv) in row.iter_mut().zip(x) {
            *o += gv * xv;
        }
    }
}

/// Per-direction activations kept for backpropagation through time.
struct GruCache {
    /// `(frames + 1) x hidden`; row 0 is the zero initial state.
    h: Vec<f64>,
    update: Vec<f64>,
    reset: Vec<f64>,
    cand: Vec<f64>,
    /// `reset (x) h_prev`, cached for the candidate-path gradients.
    reset_h: Vec<f64>,
}

/// Run one GRU direction over `input` (`frames x in_dim`, already in
/// processing order).
fn gru_forward(w: &GruWeights, input: &[f64], frames: usize) -> GruCache {
    let (inp, hid) = (w.input, w.hidden);
    let mut cache = GruCache {
        h: vec![0.0; (frames + 1) * hid],
        update: vec![0.0; frames * hid],
        reset: vec![0.0; frames * hid],
        cand: vec![0.0; frames * hid],
        reset_h: vec![0.0; frames * hid],
    };
    let mut pre = vec![0.0; hid];
    let mut acc = vec![0.0; hid];
    for t in 0..frames {
        let x = &input[t * inp..(t + 1) * inp];
        let (h_prev_rows, h_rows) = cache.h.split_at_mut((t + 1) * hid);
        let h_prev = &h_prev_rows[t * hid..];
        let h_t = &mut h_rows[..hid];

        let z = &mut cache.update[t * hid..(t + 1) * hid];
        matvec(&w.w_update, hid, inp, x, Some(&w.b_update), &mut pre);
        matvec(&w.u_update, hid, hid, h_prev, None, &mut acc);
        for (zh, (p, a)) in z.iter_mut().zip(pre.iter().zip(&acc)) {
            *zh = sigmoid(p + a);
        }

        let r = &mut cache.reset[t * hid..(t + 1) * hid];
        matvec(&w.w_reset, hid, inp, x, Some(&w.b_reset), &mut pre);
        matvec(&w.u_reset, hid, hid, h_prev, None, &mut acc);
        for (rh, (p, a)) in r.iter_mut().zip(pre.iter().zip(&acc)) {
            *rh = sigmoid(p + a);
        }

        let rh = &mut cache.reset_h[t * hid..(t + 1) * hid];
        for ((rhv, rv), hv) in rh.iter_mut().zip(r.iter()).zip(h_prev) {
            *rhv = rv * hv;
        }

        let n = &mut cache.cand[t * hid..(t + 1) * hid];
        matvec(&w.w_cand, hid, inp, x, Some(&w.b_cand), &mut pre);
        matvec(&w.u_cand, hid, hid, rh, None, &mut acc);
        for (nh, (p, a)) in n.iter_mut().zip(pre.iter().zip(&acc)) {
            *nh = (p + a).tanh();
        }

        for (hh, ((zv, nv), hp)) in h_t.iter_mut().zip(z.iter().zip(n.iter()).zip(h_prev)) {
            *hh = (1.0 - zv) * nv + zv * hp;
        }
    }
    cache
}

/// Same-shaped gradient accumulator for one GRU direction.
struct GruGrads<'a> {
    w_update: &'a mut [f64],
    u_update: &'a mut [f64],
    b_update: &'a mut [f64],
    w_reset: &'a mut [f64],
    u_reset: &'a mut [f64],
    b_reset: &'a mut [f64],
    w_cand: &'a mut [f64],
    u_cand: &'a mut [f64],
    b_cand: &'a mut [f64],
}

/// Backpropagation through time for one direction. `dh_out[t]` is the
/// loss gradient arriving at the hidden state emitted at step `t`; the
/// input gradient is accumulated into `dx`.
fn gru_backward(
    w: &GruWeights,
    input: &[f64],
    cache: &GruCache,
    dh_out: &[f64],
    frames: usize,
    grads: &mut GruGrads,
    dx: &mut [f64],
) {
    let (inp, hid) = (w.input, w.hidden);
    let mut dh = vec![0.0; hid];
    let mut da_cand = vec![0.0; hid];
    let mut da_reset = vec![0.0; hid];
    let mut da_update = vec![0.0; hid];
    let mut dh_reset = vec![0.0; hid];
    for t in (0..frames).rev() {
        let x = &input[t * inp..(t + 1) * inp];
        let h_prev = &cache.h[t * hid..(t + 1) * hid];
        let z = &cache.update[t * hid..(t + 1) * hid];
        let r = &cache.reset[t * hid..(t + 1) * hid];
        let n = &cache.cand[t * hid..(t + 1) * hid];
        let rh = &cache.reset_h[t * hid..(t + 1) * hid];

        for (dhv, g) in dh.iter_mut().zip(&dh_out[t * hid..(t + 1) * hid]) {
            *dhv += g;
        }

        // h = (1 - z) * n + z * h_prev
        for i in 0..hid {
            let dn = dh[i] * (1.0 - z[i]);
            da_cand[i] = dn * (1.0 - n[i] * n[i]);
            let dz = dh[i] * (h_prev[i] - n[i]);
            da_update[i] = dz * z[i] * (1.0 - z[i]);
        }
        // Carry into h_prev: direct path through the update gate.
        let mut dh_prev: Vec<f64> = (0..hid).map(|i| dh[i] * z[i]).collect();

        // Candidate path: a_n = W_n x + U_n (r * h_prev) + b_n
        outer_acc(grads.w_cand, hid, inp, &da_cand, x);
        outer_acc(grads.u_cand, hid, hid, &da_cand, rh);
        for (b, g) in grads.b_cand.iter_mut().zip(&da_cand) {
            *b += g;
        }
        dh_reset.iter_mut().for_each(|v| *v = 0.0);
        matvec_transpose_acc(&w.u_cand, hid, hid, &da_cand, &mut dh_reset);
        for i in 0..hid {
            dh_prev[i] += dh_reset[i] * r[i];
            let dr = dh_reset[i] * h_prev[i];
            da_reset[i] = dr * r[i] * (1.0 - r[i]);
        }

        // Reset gate: a_r = W_r x + U_r h_prev + b_r
        outer_acc(grads.w_reset, hid, inp, &da_reset, x);
        outer_acc(grads.u_reset, hid, hid, &da_reset, h_prev);
        for (b, g) in grads.b_reset.iter_mut().zip(&da_reset) {
            *b += g;
        }
        matvec_transpose_acc(&w.u_reset, hid, hid, &da_reset, &mut dh_prev);

        // Update gate: a_z = W_z x + U_z h_prev + b_z
        outer_acc(grads.w_update, hid, inp, &da_update, x);
        outer_acc(grads.u_update, hid, hid, &da_update, h_prev);
        for (b, g) in grads.b_update.iter_mut().zip(&da_update) {
            *b += g;
        }
        matvec_transpose_acc(&w.u_update, hid, hid, &da_update, &mut dh_prev);

        // Input gradient.
        let dxr = &mut dx[t * inp..(t + 1) * inp];
        matvec_transpose_acc(&w.w_update, hid, inp, &da_update, dxr);
        matvec_transpose_acc(&w.w_reset, hid, inp, &da_reset, dxr);
        matvec_transpose_acc(&w.w_cand, hid, inp, &da_cand, dxr);

        dh.copy_from_slice(&dh_prev);
    }
}

/// Everything the backward pass needs from one forward run.
struct ForwardCache {
    frames: usize,
    conv1_act: Vec<f64>,
    conv2_act: Vec<f64>,
    conv2_act_rev: Vec<f64>,
    gru_fwd: GruCache,
    gru_bwd: GruCache,
    probs: Vec<f64>,
}

fn reversed_rows(x: &[f64], frames: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for t in 0..frames {
        out[t * width..(t + 1) * width]
            .copy_from_slice(&x[(frames - 1 - t) * width..(frames - t) * width]);
    }
    out
}

fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn run_forward(params: &ModelParams, features: &FeatureMatrix) -> Result<ForwardCache> {
    let arch = &params.arch;
    if features.channels != arch.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "features have {} channels, model expects {}",
            features.channels, arch.in_channels
        )));
    }
    let frames = features.frames;
    if frames == 0 {
        return Err(Error::ShapeMismatch("empty feature matrix".into()));
    }

    let mut conv1_act = params.conv1.forward(&features.data, frames);
    relu_inplace(&mut conv1_act);
    let mut conv2_act = params.conv2.forward(&conv1_act, frames);
    relu_inplace(&mut conv2_act);

    let conv2_act_rev = reversed_rows(&conv2_act, frames, arch.conv2_out);
    let gru_fwd = gru_forward(&params.gru_fwd, &conv2_act, frames);
    let gru_bwd = gru_forward(&params.gru_bwd, &conv2_act_rev, frames);

    let hid = arch.hidden;
    let probs = (0..frames)
        .map(|t| {
            let hf = &gru_fwd.h[(t + 1) * hid..(t + 2) * hid];
            // Backward direction processed reversed input: its step
            // frames-1-t emitted the state for original frame t.
            let s = frames - 1 - t;
            let hb = &gru_bwd.h[(s + 1) * hid..(s + 2) * hid];
            let mut logit = params.out.bias;
            for (wv, hv) in params.out.weight[..hid].iter().zip(hf) {
                logit += wv * hv;
            }
            for (wv, hv) in params.out.weight[hid..].iter().zip(hb) {
                logit += wv * hv;
            }
            sigmoid(logit)
        })
        .collect();

    Ok(ForwardCache {
        frames,
        conv1_act,
        conv2_act,
        conv2_act_rev,
        gru_fwd,
        gru_bwd,
        probs,
    })
}

/// Per-frame detection probabilities. `features` must already be
/// normalized with the model's [`NormStats`].
pub fn forward(params: &ModelParams, features: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(run_forward(params, features)?.probs)
}

/// Mean binary cross-entropy with probabilities clipped to
/// `[PROB_CLIP, 1 - PROB_CLIP]`.
pub fn bce_loss(probs: &[f64], targets: &SegmentGrid) -> Result<f64> {
    if probs.len() != targets.frames() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} target frames",
            probs.len(),
            targets.frames()
        )));
    }
    if probs.is_empty() {
        return Err(Error::ShapeMismatch("empty probability sequence".into()));
    }
    let mut total = 0.0;
    for (&p, &t) in probs.iter().zip(targets.values()) {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        total -= if t { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / probs.len() as f64)
}

/// Exact gradient of the mean batch loss for every parameter, flattened
/// in [`ModelParams::flatten`] order. Returns `(loss, gradient)`.
///
/// The batch loss is the mean over recordings of each recording's mean
/// per-frame cross-entropy, so duplicating the batch leaves the gradient
/// unchanged.
pub fn gradients(
    params: &ModelParams,
    batch: &[(&FeatureMatrix, &SegmentGrid)],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("gradient of an empty batch".into()));
    }
    let mut total_loss = 0.0;
    let mut flat = vec![0.0; params.param_count()];
    for &(features, grid) in batch {
        let (loss, grad) = sample_gradient(params, features, grid)?;
        total_loss += loss;
        for (acc, g) in flat.iter_mut().zip(&grad) {
            *acc += g;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut flat {
        *g *= scale;
    }
    Ok((total_loss * scale, flat))
}

/// Loss and flat gradient for a single recording.
pub(crate) fn sample_gradient(
    params: &ModelParams,
    features: &FeatureMatrix,
    grid: &SegmentGrid,
) -> Result<(f64, Vec<f64>)> {
    let cache = run_forward(params, features)?;
    let loss = bce_loss(&cache.probs, grid)?;
    let arch = &params.arch;
    let frames = cache.frames;
    let hid = arch.hidden;

    // d(mean BCE)/d(logit): (p - t)/frames, zero where the clip is active.
    let inv = 1.0 / frames as f64;
    let dlogit: Vec<f64> = cache
        .probs
        .iter()
        .zip(grid.values())
        .map(|(&p, &t)| {
            if p <= PROB_CLIP || p >= 1.0 - PROB_CLIP {
                0.0
            } else {
                (p - f64::from(u8::from(t))) * inv
            }
        })
        .collect();

    let mut grads = ModelParams::zeros(params.task, *arch, NormStats::identity(arch.in_channels))?;

    // Output layer and the gradients entering each GRU direction.
    let mut dh_fwd = vec![0.0; frames * hid];
    let mut dh_bwd_rev = vec![0.0; frames * hid];
    for t in 0..frames {
        let g = dlogit[t];
        if g == 0.0 {
            continue;
        }
        grads.out.bias += g;
        let hf = &cache.gru_fwd.h[(t + 1) * hid..(t + 2) * hid];
        let s = frames - 1 - t;
        let hb = &cache.gru_bwd.h[(s + 1) * hid..(s + 2) * hid];
        for i in 0..hid {
            grads.out.weight[i] += g * hf[i];
            grads.out.weight[hid + i] += g * hb[i];
            dh_fwd[t * hid + i] += g * params.out.weight[i];
            dh_bwd_rev[s * hid + i] += g * params.out.weight[hid + i];
        }
    }

    // BPTT in both directions; input gradients land on conv2's output.
    let mut dconv2_act = vec![0.0; frames * arch.conv2_out];
    {
        let g = &mut grads.gru_fwd;
        let mut gg = GruGrads {
            w_update: &mut g.w_update,
            u_update: &mut g.u_update,
            b_update: &mut g.b_update,
            w_reset: &mut g.w_reset,
            u_reset: &mut g.u_reset,
            b_reset: &mut g.b_reset,
            w_cand: &mut g.w_cand,
            u_cand: &mut g.u_cand,
            b_cand: &mut g.b_cand,
        };
        gru_backward(
            &params.gru_fwd,
            &cache.conv2_act,
            &cache.gru_fwd,
            &dh_fwd,
            frames,
            &mut gg,
            &mut dconv2_act,
        );
    }
    let mut dconv2_act_rev = vec![0.0; frames * arch.conv2_out];
    {
        let g = &mut grads.gru_bwd;
        let mut gg = GruGrads {
            w_update: &mut g.w_update,
            u_update: &mut g.u_update,
            b_update: &mut g.b_update,
            w_reset: &mut g.w_reset,
            u_reset: &mut g.u_reset,
            b_reset: &mut g.b_reset,
            w_cand: &mut g.w_cand,
            u_cand: &mut g.u_cand,
            b_cand: &mut g.b_cand,
        };
        gru_backward(
            &params.gru_bwd,
            &cache.conv2_act_rev,
            &cache.gru_bwd,
            &dh_bwd_rev,
            frames,
            &mut gg,
            &mut dconv2_act_rev,
        );
    }
    let dconv2_from_bwd = reversed_rows(&dconv2_act_rev, frames, arch.conv2_out);
    for (a, b) in dconv2_act.iter_mut().zip(&dconv2_from_bwd) {
        *a += b;
    }

    // ReLU after conv2 (activation is zero exactly where it was clipped).
    for (g, &a) in dconv2_act.iter_mut().zip(&cache.conv2_act) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    let mut dconv1_act = vec![0.0; frames * arch.conv1_out];
    params.conv2.backward(
        &cache.conv1_act,
        &dconv2_act,
        frames,
        &mut grads.conv2.weight,
        &mut grads.conv2.bias,
        Some(&mut dconv1_act),
    );

    for (g, &a) in dconv1_act.iter_mut().zip(&cache.conv1_act) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    params.conv1.backward(
        &features.data,
        &dconv1_act,
        frames,
        &mut grads.conv1.weight,
        &mut grads.conv1.bias,
        None,
    );

    Ok((loss, grads.flatten()))
}
