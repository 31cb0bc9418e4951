//! Embedding, stacked GRU, attention over hidden states and a fused output head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Step;
use crate::rng::{derive_seed, rng};
use crate::tensor::{Checkpoint, Tape, Tensor, Var};

mod pretrained;

pub use pretrained::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    None,
    #[default]
    Early,
    Late,
}

impl Fusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Fusion::None => "none",
            Fusion::Early => "early",
            Fusion::Late => "late",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    #[default]
    Linear,
    /// `W_e` comes from elsewhere and is not trained.
    Pretrained,
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Linear => "linear",
            EmbeddingMode::Pretrained => "pretrained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_gru_layers: usize,
    pub fusion: Fusion,
    pub mlp_hidden_dims: Vec<usize>,
    pub domain_dim: usize,
    pub embedding: EmbeddingMode,
    pub seed: u64,
}

impl ModelConfig {
    pub const HIDDEN_RANGE: (usize, usize) = (8, 128);
    pub const LAYER_RANGE: (usize, usize) = (1, 3);

    pub fn validate(&self) -> Result<()> {
        let (hmin, hmax) = Self::HIDDEN_RANGE;
        let (lmin, lmax) = Self::LAYER_RANGE;
        if self.input_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Config("input and embedding dimensions must be positive".into()));
        }
        if !(hmin..=hmax).contains(&self.hidden_dim) {
            return Err(Error::Config(format!("hidden_dim {} outside [{hmin}, {hmax}]", self.hidden_dim)));
        }
        if !(lmin..=lmax).contains(&self.n_gru_layers) {
            return Err(Error::Config(format!("n_gru_layers {} outside [{lmin}, {lmax}]", self.n_gru_layers)));
        }
        if self.mlp_hidden_dims.contains(&0) {
            return Err(Error::Config("MLP layer widths must be positive".into()));
        }
        if self.fusion != Fusion::None && self.domain_dim == 0 {
            return Err(Error::FusionWithoutDomain(self.fusion.as_str()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GruIdx {
    w_r: usize,
    w_z: usize,
    w_h: usize,
    u_r: usize,
    u_z: usize,
    u_h: usize,
    b_r: usize,
    b_z: usize,
    b_h: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    w_e: usize,
    b_e: usize,
    gru: Vec<GruIdx>,
    mlp: Vec<(usize, usize)>,
    w_o: usize,
    b_o: usize,
}

/// Parameters of the network as a flat named list, plus the config.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

/// Output of a forward pass for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logit: f64,
    pub probability: f64,
    pub attention: Vec<f64>,
}

/// Tape handles of one sequence's forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub logit: Var,
    pub attention: Var,
}

/// Model parameters registered on a tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: Vec<Var>,
    gru_w: Vec<Var>,
    gru_u_rz: Vec<Var>,
    gru_b: Vec<Var>,
}

/// `(name, rows, cols, fan_in)` per parameter, in storage order.
fn shapes(cfg: &ModelConfig) -> (Vec<(String, usize, usize, usize)>, Layout) {
    let mut list = Vec::new();
    let mut push = |name: String, r: usize, c: usize, fan_in: usize| {
        list.push((name, r, c, fan_in));
        list.len() - 1
    };
    let d = cfg.hidden_dim;
    let w_e = push("W_e".into(), cfg.input_dim, cfg.embed_dim, cfg.input_dim);
    let b_e = push("b_e".into(), 1, cfg.embed_dim, cfg.input_dim);
    let mut gru = Vec::new();
    for l in 0..cfg.n_gru_layers {
        let inp = if l == 0 { cfg.embed_dim } else { d };
        gru.push(GruIdx {
            w_r: push(format!("gru{l}.W_r"), inp, d, inp),
            w_z: push(format!("gru{l}.W_z"), inp, d, inp),
            w_h: push(format!("gru{l}.W_h"), inp, d, inp),
            u_r: push(format!("gru{l}.U_r"), d, d, d),
            u_z: push(format!("gru{l}.U_z"), d, d, d),
            u_h: push(format!("gru{l}.U_h"), d, d, d),
            b_r: push(format!("gru{l}.b_r"), 1, d, d),
            b_z: push(format!("gru{l}.b_z"), 1, d, d),
            b_h: push(format!("gru{l}.b_h"), 1, d, d),
        });
    }
    let mut mlp = Vec::new();
    let mut mlp_in = match cfg.fusion {
        Fusion::None => 0,
        Fusion::Early => d + cfg.domain_dim,
        Fusion::Late => cfg.domain_dim,
    };
    if cfg.fusion != Fusion::None {
        for (k, &width) in cfg.mlp_hidden_dims.iter().enumerate() {
            let w = push(format!("mlp{k}.W"), mlp_in, width, mlp_in);
            let b = push(format!("mlp{k}.b"), 1, width, mlp_in);
            mlp.push((w, b));
            mlp_in = width;
        }
    }
    let head_in = match cfg.fusion {
        Fusion::None => d,
        Fusion::Early => mlp_in,
        Fusion::Late => d + mlp_in,
    };
    let w_o = push("W_o".into(), head_in, 1, head_in);
    let b_o = push("b_o".into(), 1, 1, head_in);
    (list, Layout { w_e, b_e, gru, mlp, w_o, b_o })
}

impl Model {
    /// Fresh parameters, each tensor uniform in `±1/√fan_in` where `fan_in`
    /// is the input width of the layer the tensor belongs to.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (list, layout) = shapes(&config);
        let mut r = rng(derive_seed(config.seed, "model-init"));
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, rows, cols, fan_in) in list {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            names.push(name);
            params.push(Tensor::uniform(rows, cols, bound, &mut r));
        }
        Ok(Model { config, names, params, layout })
    }

    /// Fresh parameters with a fixed, untrained embedding matrix.
    pub fn with_pretrained_embedding(mut config: ModelConfig, w_e: Tensor) -> Result<Self> {
        config.embedding = EmbeddingMode::Pretrained;
        let mut m = Model::new(config)?;
        if w_e.shape() != m.params[m.layout.w_e].shape() {
            return Err(Error::Shape {
                op: "pretrained embedding",
                detail: format!(
                    "expected {:?}, got {:?}",
                    m.params[m.layout.w_e].shape(),
                    w_e.shape()
                ),
            });
        }
        let i = m.layout.w_e;
        m.params[i] = w_e;
        Ok(m)
    }

    /// Rebuild from named tensors, checking names and shapes.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let (list, layout) = shapes(&config);
        if list.len() != tensors.len() {
            return Err(Error::Shape {
                op: "load model",
                detail: format!("expected {} tensors, got {}", list.len(), tensors.len()),
            });
        }
        let mut names = Vec::new();
        let mut params = Vec::new();
        for ((name, r, c, _), (got_name, t)) in list.into_iter().zip(tensors) {
            if name != got_name || t.shape() != (r, c) {
                return Err(Error::Shape {
                    op: "load model",
                    detail: format!("expected {name} {r}x{c}, got {got_name} {:?}", t.shape()),
                });
            }
            names.push(name);
            params.push(t);
        }
        Ok(Model { config, names, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.params[i])
    }

    pub fn embedding(&self) -> &Tensor {
        &self.params[self.layout.w_e]
    }

    /// Whether parameter `i` is updated by training.
    pub fn is_trainable(&self, i: usize) -> bool {
        !(i == self.layout.w_e && self.config.embedding == EmbeddingMode::Pretrained)
    }

    pub fn n_weights(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.names.iter().cloned().zip(self.params.iter().cloned()).collect()
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Result<Checkpoint> {
        Ok(Checkpoint {
            config: serde_json::json!({ "model": self.config, "extra": extra }),
            tensors: self.named_tensors(),
        })
    }

    /// Inverse of [`Model::to_checkpoint`]; returns the `extra` block too.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, serde_json::Value)> {
        let config: ModelConfig = serde_json::from_value(ck.config["model"].clone())?;
        let model = Model::from_tensors(config, ck.tensors.clone())?;
        Ok((model, ck.config["extra"].clone()))
    }

    /// Register parameters on a tape. Frozen ones (and all of them when
    /// `trainable` is false) become constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<BoundParams> {
        let vars: Vec<Var> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| tape.leaf(p.clone(), trainable && self.is_trainable(i)))
            .collect();
        let mut gru_w = Vec::new();
        let mut gru_u_rz = Vec::new();
        let mut gru_b = Vec::new();
        for g in &self.layout.gru {
            gru_w.push(tape.concat_cols(&[vars[g.w_r], vars[g.w_z], vars[g.w_h]])?);
            gru_u_rz.push(tape.concat_cols(&[vars[g.u_r], vars[g.u_z]])?);
            gru_b.push(tape.concat_cols(&[vars[g.b_r], vars[g.b_z], vars[g.b_h]])?);
        }
        Ok(BoundParams { vars, gru_w, gru_u_rz, gru_b })
    }

    /// One GRU step on row vectors. `x_proj` is `e W + b` for all three
    /// gates side by side (1×3d).
    fn gru_step(&self, tape: &mut Tape, bp: &BoundParams, layer: usize, x_proj: Var, h: Option<Var>) -> Result<Var> {
        let d = self.config.hidden_dim;
        let g = self.layout.gru[layer];
        let xr = tape.slice_cols(x_proj, 0, d)?;
        let xz = tape.slice_cols(x_proj, d, d)?;
        let xh = tape.slice_cols(x_proj, 2 * d, d)?;
        let Some(h) = h else {
            // h = 0: r is irrelevant and h' = z ⊙ h̃.
            let z = tape.sigmoid(xz)?;
            let cand = tape.tanh(xh)?;
            return tape.hadamard(z, cand);
        };
        let rz = tape.matmul(h, bp.gru_u_rz[layer])?;
        let hr = tape.slice_cols(rz, 0, d)?;
        let hz = tape.slice_cols(rz, d, d)?;
        let r_pre = tape.add(xr, hr)?;
        let r = tape.sigmoid(r_pre)?;
        let z_pre = tape.add(xz, hz)?;
        let z = tape.sigmoid(z_pre)?;
        let rh = tape.hadamard(r, h)?;
        let uh = tape.matmul(rh, bp.vars[g.u_h])?;
        let cand_pre = tape.add(xh, uh)?;
        let cand = tape.tanh(cand_pre)?;
        let diff = tape.sub(cand, h)?;
        let step = tape.hadamard(z, diff)?;
        tape.add(h, step)
    }

    /// Run the recurrence over a `T×in` input for one layer; returns `T×d`.
    fn gru_layer(&self, tape: &mut Tape, bp: &BoundParams, layer: usize, proj: Var) -> Result<Var> {
        let t_len = tape.value(proj).rows();
        let mut h = None;
        let mut hs = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x = tape.slice_rows(proj, t, 1)?;
            let next = self.gru_step(tape, bp, layer, x, h)?;
            hs.push(next);
            h = Some(next);
        }
        tape.concat_rows(&hs)
    }

    /// Scaled dot-product attention with the last hidden state as query.
    /// Returns `(a, o)` with `a` 1×T and `o` 1×d.
    pub fn attend(&self, tape: &mut Tape, hidden: Var) -> Result<(Var, Var)> {
        let (t_len, d) = tape.value(hidden).shape();
        let last = tape.slice_rows(hidden, t_len - 1, 1)?;
        let keys = tape.transpose(hidden)?;
        let raw = tape.matmul(last, keys)?;
        let scores = tape.scale(raw, 1.0 / (d as f64).sqrt())?;
        let a = tape.softmax(scores)?;
        let o = tape.matmul(a, hidden)?;
        Ok((a, o))
    }

    fn mlp(&self, tape: &mut Tape, bp: &BoundParams, mut x: Var) -> Result<Var> {
        for &(w, b) in &self.layout.mlp {
            let lin = tape.matmul(x, bp.vars[w])?;
            let pre = tape.add_row(lin, bp.vars[b])?;
            x = tape.tanh(pre)?;
        }
        Ok(x)
    }

    /// Output logit from the attention summary `o` and domain row `z`.
    pub fn head(&self, tape: &mut Tape, bp: &BoundParams, o: Var, z: Option<Var>) -> Result<Var> {
        let u = match (self.config.fusion, z) {
            (Fusion::None, _) => o,
            (Fusion::Early, Some(z)) => {
                let joined = tape.concat_cols(&[o, z])?;
                self.mlp(tape, bp, joined)?
            }
            (Fusion::Late, Some(z)) => {
                let side = self.mlp(tape, bp, z)?;
                tape.concat_cols(&[o, side])?
            }
            (mode, None) => return Err(Error::FusionWithoutDomain(mode.as_str())),
        };
        let lin = tape.matmul(u, bp.vars[self.layout.w_o])?;
        tape.add(lin, bp.vars[self.layout.b_o])
    }

    /// Forward passes for a batch of sequences sharing one tape. `z` rows
    /// must already be standardized; they are ignored when fusion is off.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        bp: &BoundParams,
        batch: &[(&[Step], &[f64])],
    ) -> Result<Vec<ForwardVars>> {
        let mut all_steps: Vec<Vec<u32>> = Vec::new();
        for (steps, z) in batch {
            if steps.is_empty() {
                return Err(Error::EmptySequence("forward".into()));
            }
            if self.config.fusion != Fusion::None && z.len() != self.config.domain_dim {
                return Err(Error::Shape {
                    op: "forward",
                    detail: format!("z has {} entries, model expects {}", z.len(), self.config.domain_dim),
                });
            }
            all_steps.extend(steps.iter().map(|s| s.x.clone()));
        }
        let emb = tape.embed_sum(bp.vars[self.layout.w_e], &all_steps)?;
        let emb = tape.add_row(emb, bp.vars[self.layout.b_e])?;
        let proj0 = tape.matmul(emb, bp.gru_w[0])?;
        let proj0 = tape.add_row(proj0, bp.gru_b[0])?;

        let mut out = Vec::with_capacity(batch.len());
        let mut offset = 0;
        for (steps, z) in batch {
            let t_len = steps.len();
            let mut proj = tape.slice_rows(proj0, offset, t_len)?;
            offset += t_len;
            let mut hidden = self.gru_layer(tape, bp, 0, proj)?;
            for layer in 1..self.config.n_gru_layers {
                proj = tape.matmul(hidden, bp.gru_w[layer])?;
                proj = tape.add_row(proj, bp.gru_b[layer])?;
                hidden = self.gru_layer(tape, bp, layer, proj)?;
            }
            let (attention, o) = self.attend(tape, hidden)?;
            let zv = if self.config.fusion == Fusion::None {
                None
            } else {
                Some(tape.constant(Tensor::row(z.to_vec())))
            };
            let logit = self.head(tape, bp, o, zv)?;
            out.push(ForwardVars { logit, attention });
        }
        Ok(out)
    }

    /// Inference on a batch without recording gradients.
    pub fn predict_batch(&self, batch: &[(&[Step], &[f64])]) -> Result<Vec<Prediction>> {
        let mut tape = Tape::new();
        let bp = self.bind(&mut tape, false)?;
        let vars = self.forward_batch(&mut tape, &bp, batch)?;
        Ok(vars
            .into_iter()
            .map(|v| {
                let logit = tape.value(v.logit).data()[0];
                Prediction {
                    logit,
                    probability: sigmoid(logit),
                    attention: tape.value(v.attention).data().to_vec(),
                }
            })
            .collect())
    }

    pub fn predict(&self, steps: &[Step], z: &[f64]) -> Result<Prediction> {
        Ok(self.predict_batch(&[(steps, z)])?.remove(0))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests;
