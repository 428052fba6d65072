//! Small autoregressive softmax models over a flat parameter vector.
//!
//! `LinearSoftmax` is a bigram model, `logits_n = E[x_n] W + b`.
//! `TinyMlp` sees the previous and current token,
//! `logits_n = tanh([E[x_{n-1}], E[x_n]] W1 + b1) W2 + b2`, with a zero
//! vector standing in for the token before position 0.
//!
//! Gradients are exact reverse-mode; [`ToyModel::jvp`] is exact forward-mode.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::logits::{softmax_into, LogitsMatrix};
use crate::toy::corpus::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    LinearSoftmax,
    TinyMlp,
}

impl std::str::FromStr for Architecture {
    type Err = UdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "linearsoftmax" | "linear-softmax" => Ok(Self::LinearSoftmax),
            "mlp" | "tinymlp" | "tiny-mlp" => Ok(Self::TinyMlp),
            _ => Err(UdsError::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub vocab: usize,
    pub context: usize,
    pub embed_dim: usize,
    /// Hidden width of the MLP; unused by the linear model.
    pub hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            arch: Architecture::LinearSoftmax,
            vocab: 128,
            context: 64,
            embed_dim: 32,
            hidden: 64,
        }
    }
}

impl ModelSpec {
    pub fn param_count(&self) -> usize {
        let (v, h, hid) = (self.vocab, self.embed_dim, self.hidden);
        match self.arch {
            Architecture::LinearSoftmax => v * h + h * v + v,
            Architecture::TinyMlp => v * h + 2 * h * hid + hid + hid * v + v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.context == 0 || self.embed_dim == 0 {
            return Err(UdsError::Config(format!("degenerate model spec {self:?}")));
        }
        if self.arch == Architecture::TinyMlp && self.hidden == 0 {
            return Err(UdsError::Config("mlp hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    emb: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Layout {
    fn of(spec: &ModelSpec) -> Self {
        let (v, h, hid) = (spec.vocab, spec.embed_dim, spec.hidden);
        match spec.arch {
            // w1 is the output projection, b1 its bias; w2/b2 unused.
            Architecture::LinearSoftmax => Layout {
                emb: 0,
                w1: v * h,
                b1: v * h + h * v,
                w2: 0,
                b2: 0,
            },
            Architecture::TinyMlp => {
                let w1 = v * h;
                let b1 = w1 + 2 * h * hid;
                let w2 = b1 + hid;
                let b2 = w2 + hid * v;
                Layout { emb: 0, w1, b1, w2, b2 }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    spec: ModelSpec,
    params: Vec<f64>,
}

/// Per-position activations kept for the backward pass (MLP only).
struct Cache {
    inputs: Vec<f64>,
    hidden: Vec<f64>,
}

impl ToyModel {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let params = vec![0.0; spec.param_count()];
        Ok(Self { spec, params })
    }

    /// Uniform initialization: embeddings in `[-0.5, 0.5)`, weight matrices in
    /// `[-1, 1) / sqrt(fan_in)`, biases zero.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lay = Layout::of(&model.spec);
        let (v, h, hid) = (model.spec.vocab, model.spec.embed_dim, model.spec.hidden);
        let p = &mut model.params;
        for x in &mut p[lay.emb..lay.emb + v * h] {
            *x = rng.random_range(-0.5..0.5);
        }
        match model.spec.arch {
            Architecture::LinearSoftmax => {
                let s = 1.0 / (h as f64).sqrt();
                for x in &mut p[lay.w1..lay.b1] {
                    *x = s * rng.random_range(-1.0..1.0);
                }
            }
            Architecture::TinyMlp => {
                let s1 = 1.0 / ((2 * h) as f64).sqrt();
                for x in &mut p[lay.w1..lay.b1] {
                    *x = s1 * rng.random_range(-1.0..1.0);
                }
                let s2 = 1.0 / (hid as f64).sqrt();
                for x in &mut p[lay.w2..lay.b2] {
                    *x = s2 * rng.random_range(-1.0..1.0);
                }
            }
        }
        Ok(model)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(UdsError::Shape(format!(
                "{} parameters given, model needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn with_params(&self, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), self.params.len());
        Self {
            spec: self.spec.clone(),
            params,
        }
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        if tokens.is_empty() {
            return Err(UdsError::Shape("empty input sequence".into()));
        }
        if tokens.len() > self.spec.context {
            return Err(UdsError::Shape(format!(
                "{} input positions exceed context window {}",
                tokens.len(),
                self.spec.context
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= self.spec.vocab) {
            return Err(UdsError::TokenOutOfRange {
                token: t,
                vocab: self.spec.vocab,
            });
        }
        Ok(())
    }

    fn emb_row<'a>(&self, p: &'a [f64], tok: u32) -> &'a [f64] {
        let h = self.spec.embed_dim;
        let start = Layout::of(&self.spec).emb + tok as usize * h;
        &p[start..start + h]
    }

    /// Raw `N x V` logits (row-major) with the given parameter vector.
    fn forward_raw(&self, p: &[f64], tokens: &[u32]) -> (Vec<f64>, Option<Cache>) {
        let (v, h, hid) = (self.spec.vocab, self.spec.embed_dim, self.spec.hidden);
        let lay = Layout::of(&self.spec);
        let n = tokens.len();
        let mut logits = vec![0.0; n * v];
        match self.spec.arch {
            Architecture::LinearSoftmax => {
                let w = &p[lay.w1..lay.b1];
                let b = &p[lay.b1..lay.b1 + v];
                for (r, &tok) in tokens.iter().enumerate() {
                    let e = self.emb_row(p, tok);
                    let out = &mut logits[r * v..(r + 1) * v];
                    out.copy_from_slice(b);
                    for (k, &ek) in e.iter().enumerate() {
                        for (o, &wk) in out.iter_mut().zip(&w[k * v..(k + 1) * v]) {
                            *o += ek * wk;
                        }
                    }
                }
                (logits, None)
            }
            Architecture::TinyMlp => {
                let w1 = &p[lay.w1..lay.b1];
                let b1 = &p[lay.b1..lay.w2];
                let w2 = &p[lay.w2..lay.b2];
                let b2 = &p[lay.b2..lay.b2 + v];
                let mut inputs = vec![0.0; n * 2 * h];
                let mut hidden = vec![0.0; n * hid];
                for r in 0..n {
                    let a = &mut inputs[r * 2 * h..(r + 1) * 2 * h];
                    if r > 0 {
                        a[..h].copy_from_slice(self.emb_row(p, tokens[r - 1]));
                    }
                    a[h..].copy_from_slice(self.emb_row(p, tokens[r]));
                    let hr = &mut hidden[r * hid..(r + 1) * hid];
                    hr.copy_from_slice(b1);
                    for (i, &ai) in a.iter().enumerate() {
                        for (o, &wi) in hr.iter_mut().zip(&w1[i * hid..(i + 1) * hid]) {
                            *o += ai * wi;
                        }
                    }
                    for x in hr.iter_mut() {
                        *x = x.tanh();
                    }
                    let out = &mut logits[r * v..(r + 1) * v];
                    out.copy_from_slice(b2);
                    for (j, &hj) in hr.iter().enumerate() {
                        for (o, &wj) in out.iter_mut().zip(&w2[j * v..(j + 1) * v]) {
                            *o += hj * wj;
                        }
                    }
                }
                (logits, Some(Cache { inputs, hidden }))
            }
        }
    }

    /// `N x V` logits for `N` input positions.
    pub fn forward_logits(&self, tokens: &[u32]) -> Result<LogitsMatrix> {
        self.check_tokens(tokens)?;
        let (raw, _) = self.forward_raw(&self.params, tokens);
        LogitsMatrix::from_dense(tokens.len(), self.spec.vocab, raw)
    }

    /// Logits zero-padded to the context window.
    pub fn forward_padded(&self, tokens: &[u32]) -> Result<LogitsMatrix> {
        self.forward_logits(tokens)?.pad_to(self.spec.context)
    }

    /// Accumulates `d(sum_n <g_n, logits_n>)/d(theta)` into `grad`.
    fn backward(&self, tokens: &[u32], dlogits: &[f64], cache: Option<&Cache>, grad: &mut [f64]) {
        let (v, h, hid) = (self.spec.vocab, self.spec.embed_dim, self.spec.hidden);
        let lay = Layout::of(&self.spec);
        let p = &self.params;
        match self.spec.arch {
            Architecture::LinearSoftmax => {
                for (r, &tok) in tokens.iter().enumerate() {
                    let g = &dlogits[r * v..(r + 1) * v];
                    if g.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let e = self.emb_row(p, tok).to_vec();
                    let eoff = lay.emb + tok as usize * h;
                    for k in 0..h {
                        let wrow = &p[lay.w1 + k * v..lay.w1 + (k + 1) * v];
                        grad[eoff + k] += wrow.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                        let gw = &mut grad[lay.w1 + k * v..lay.w1 + (k + 1) * v];
                        for (o, &gv) in gw.iter_mut().zip(g) {
                            *o += e[k] * gv;
                        }
                    }
                    for (o, &gv) in grad[lay.b1..lay.b1 + v].iter_mut().zip(g) {
                        *o += gv;
                    }
                }
            }
            Architecture::TinyMlp => {
                let cache = cache.expect("mlp backward needs cached activations");
                let mut dhid = vec![0.0; hid];
                let mut da = vec![0.0; 2 * h];
                for r in 0..tokens.len() {
                    let g = &dlogits[r * v..(r + 1) * v];
                    if g.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let hr = &cache.hidden[r * hid..(r + 1) * hid];
                    let a = &cache.inputs[r * 2 * h..(r + 1) * 2 * h];
                    for j in 0..hid {
                        let wrow = &p[lay.w2 + j * v..lay.w2 + (j + 1) * v];
                        dhid[j] = wrow.iter().zip(g).map(|(x, y)| x * y).sum::<f64>() * (1.0 - hr[j] * hr[j]);
                        let gw = &mut grad[lay.w2 + j * v..lay.w2 + (j + 1) * v];
                        for (o, &gv) in gw.iter_mut().zip(g) {
                            *o += hr[j] * gv;
                        }
                    }
                    for (o, &gv) in grad[lay.b2..lay.b2 + v].iter_mut().zip(g) {
                        *o += gv;
                    }
                    for i in 0..2 * h {
                        let wrow = &p[lay.w1 + i * hid..lay.w1 + (i + 1) * hid];
                        da[i] = wrow.iter().zip(&dhid).map(|(x, y)| x * y).sum();
                        let gw = &mut grad[lay.w1 + i * hid..lay.w1 + (i + 1) * hid];
                        for (o, &d) in gw.iter_mut().zip(&dhid) {
                            *o += a[i] * d;
                        }
                    }
                    for (o, &d) in grad[lay.b1..lay.w2].iter_mut().zip(&dhid) {
                        *o += d;
                    }
                    if r > 0 {
                        let off = lay.emb + tokens[r - 1] as usize * h;
                        for k in 0..h {
                            grad[off + k] += da[k];
                        }
                    }
                    let off = lay.emb + tokens[r] as usize * h;
                    for k in 0..h {
                        grad[off + k] += da[h + k];
                    }
                }
            }
        }
    }

    /// Mean cross-entropy over the sample's target positions.
    pub fn loss(&self, sample: &Sample) -> Result<f64> {
        let targets = sample.target_positions();
        if targets.is_empty() {
            return Err(UdsError::EmptyTargets(sample.id.clone()));
        }
        let inputs = sample.inputs();
        self.check_tokens(inputs)?;
        let (raw, _) = self.forward_raw(&self.params, inputs);
        Ok(cross_entropy(&raw, self.spec.vocab, sample, &targets))
    }

    /// Mean cross-entropy over target positions and its exact gradient.
    pub fn loss_and_grad(&self, sample: &Sample) -> Result<(f64, Vec<f64>)> {
        let targets = sample.target_positions();
        if targets.is_empty() {
            return Err(UdsError::EmptyTargets(sample.id.clone()));
        }
        let inputs = sample.inputs();
        self.check_tokens(inputs)?;
        let v = self.spec.vocab;
        let (raw, cache) = self.forward_raw(&self.params, inputs);
        let loss = cross_entropy(&raw, v, sample, &targets);
        let mut dlogits = vec![0.0; raw.len()];
        let scale = 1.0 / targets.len() as f64;
        for &n in &targets {
            let g = &mut dlogits[n * v..(n + 1) * v];
            softmax_into(&raw[n * v..(n + 1) * v], g);
            g[sample.tokens[n + 1] as usize] -= 1.0;
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
        let mut grad = vec![0.0; self.params.len()];
        self.backward(inputs, &dlogits, cache.as_ref(), &mut grad);
        Ok((loss, grad))
    }

    /// Exact directional derivative of the `N x V` logits along `dtheta`.
    pub fn jvp(&self, tokens: &[u32], dtheta: &[f64]) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        if dtheta.len() != self.params.len() {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{} parameters", self.params.len()),
                actual: format!("{}", dtheta.len()),
            });
        }
        let (v, h, hid) = (self.spec.vocab, self.spec.embed_dim, self.spec.hidden);
        let lay = Layout::of(&self.spec);
        let p = &self.params;
        let n = tokens.len();
        let mut out = vec![0.0; n * v];
        match self.spec.arch {
            Architecture::LinearSoftmax => {
                let w = &p[lay.w1..lay.b1];
                let dw = &dtheta[lay.w1..lay.b1];
                let db = &dtheta[lay.b1..lay.b1 + v];
                for (r, &tok) in tokens.iter().enumerate() {
                    let e = self.emb_row(p, tok);
                    let de = self.emb_row(dtheta, tok);
                    let o = &mut out[r * v..(r + 1) * v];
                    o.copy_from_slice(db);
                    for k in 0..h {
                        let (ek, dek) = (e[k], de[k]);
                        for ((x, &wk), &dwk) in o.iter_mut().zip(&w[k * v..(k + 1) * v]).zip(&dw[k * v..(k + 1) * v]) {
                            *x += dek * wk + ek * dwk;
                        }
                    }
                }
            }
            Architecture::TinyMlp => {
                let (_, cache) = self.forward_raw(p, tokens);
                let cache = cache.expect("mlp forward returns a cache");
                let w1 = &p[lay.w1..lay.b1];
                let dw1 = &dtheta[lay.w1..lay.b1];
                let db1 = &dtheta[lay.b1..lay.w2];
                let w2 = &p[lay.w2..lay.b2];
                let dw2 = &dtheta[lay.w2..lay.b2];
                let db2 = &dtheta[lay.b2..lay.b2 + v];
                let mut da = vec![0.0; 2 * h];
                let mut dhid = vec![0.0; hid];
                for r in 0..n {
                    da.iter_mut().for_each(|x| *x = 0.0);
                    if r > 0 {
                        da[..h].copy_from_slice(self.emb_row(dtheta, tokens[r - 1]));
                    }
                    da[h..].copy_from_slice(self.emb_row(dtheta, tokens[r]));
                    let a = &cache.inputs[r * 2 * h..(r + 1) * 2 * h];
                    let hr = &cache.hidden[r * hid..(r + 1) * hid];
                    dhid.copy_from_slice(db1);
                    for i in 0..2 * h {
                        let (ai, dai) = (a[i], da[i]);
                        for ((x, &wi), &dwi) in dhid.iter_mut().zip(&w1[i * hid..(i + 1) * hid]).zip(&dw1[i * hid..(i + 1) * hid]) {
                            *x += dai * wi + ai * dwi;
                        }
                    }
                    for (x, &hj) in dhid.iter_mut().zip(hr) {
                        *x *= 1.0 - hj * hj;
                    }
                    let o = &mut out[r * v..(r + 1) * v];
                    o.copy_from_slice(db2);
                    for j in 0..hid {
                        let (hj, dhj) = (hr[j], dhid[j]);
                        for ((x, &wj), &dwj) in o.iter_mut().zip(&w2[j * v..(j + 1) * v]).zip(&dw2[j * v..(j + 1) * v]) {
                            *x += dhj * wj + hj * dwj;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Writes the versioned binary checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
        let arch: u8 = match self.spec.arch {
            Architecture::LinearSoftmax => 0,
            Architecture::TinyMlp => 1,
        };
        w.write_all(&[arch])?;
        for d in [
            self.spec.vocab,
            self.spec.context,
            self.spec.embed_dim,
            self.spec.hidden,
            self.params.len(),
        ] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in &self.params {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(UdsError::Format("not a model checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != MODEL_FORMAT_VERSION {
            return Err(UdsError::Format(format!("unsupported model format version {version}")));
        }
        let mut arch = [0u8; 1];
        r.read_exact(&mut arch)?;
        let arch = match arch[0] {
            0 => Architecture::LinearSoftmax,
            1 => Architecture::TinyMlp,
            other => return Err(UdsError::Format(format!("unknown architecture tag {other}"))),
        };
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = read_u64(r)? as usize;
        }
        let spec = ModelSpec {
            arch,
            vocab: dims[0],
            context: dims[1],
            embed_dim: dims[2],
            hidden: dims[3],
        };
        spec.validate()?;
        if dims[4] != spec.param_count() {
            return Err(UdsError::Format("parameter count does not match spec".into()));
        }
        let mut params = Vec::with_capacity(dims[4]);
        let mut buf = [0u8; 8];
        for _ in 0..dims[4] {
            r.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        Self::from_params(spec, params)
    }
}

const MODEL_MAGIC: &[u8; 4] = b"UDSM";
const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn cross_entropy(raw: &[f64], v: usize, sample: &Sample, targets: &[usize]) -> f64 {
    let total: f64 = targets
        .iter()
        .map(|&n| {
            let row = &raw[n * v..(n + 1) * v];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            lse - row[sample.tokens[n + 1] as usize]
        })
        .sum();
    total / targets.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(arch: Architecture) -> ModelSpec {
        ModelSpec {
            arch,
            vocab: 11,
            context: 8,
            embed_dim: 4,
            hidden: 5,
        }
    }

    fn sample() -> Sample {
        Sample {
            id: "t".into(),
            tokens: vec![1, 4, 2, 9, 9, 0, 3],
            prompt_len: 2,
            cluster: None,
        }
    }

    #[test]
    fn zero_model_gives_uniform_loss() {
        let m = ToyModel::zeros(ModelSpec::default()).unwrap();
        let l = m.forward_logits(&[1, 2, 3]).unwrap();
        assert!(l.data().iter().all(|&x| x == 0.0));
        let s = Sample {
            id: "u".into(),
            tokens: vec![5, 6, 7, 8],
            prompt_len: 1,
            cluster: None,
        };
        let loss = m.loss(&s).unwrap();
        assert!((loss - 128f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_logits_give_vanishing_loss() {
        let sp = spec(Architecture::LinearSoftmax);
        let mut m = ToyModel::zeros(sp.clone()).unwrap();
        let b = Layout::of(&sp).b1;
        m.params_mut()[b + 7] = 60.0;
        let s = Sample {
            id: "s".into(),
            tokens: vec![7; 6],
            prompt_len: 1,
            cluster: None,
        };
        let loss = m.loss(&s).unwrap();
        assert!((0.0..1e-20).contains(&loss), "{loss}");
    }

    proptest::proptest! {
        #[test]
        fn loss_is_bounded(seed in 0u64..500, arch_mlp: bool, toks in proptest::collection::vec(0u32..11, 2..9)) {
            let arch = if arch_mlp { Architecture::TinyMlp } else { Architecture::LinearSoftmax };
            let m = ToyModel::init(spec(arch), seed).unwrap();
            let s = Sample { id: "p".into(), tokens: toks, prompt_len: 1, cluster: None };
            let logits = m.forward_logits(s.inputs()).unwrap();
            let spread = logits.data().iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let loss = m.loss(&s).unwrap();
            proptest::prop_assert!(loss >= 0.0);
            proptest::prop_assert!(loss <= 11f64.ln() + 2.0 * spread + 1e-12);
        }
    }

    #[test]
    fn param_count_within_budget() {
        for arch in [Architecture::LinearSoftmax, Architecture::TinyMlp] {
            let s = ModelSpec { arch, ..ModelSpec::default() };
            assert!(s.param_count() <= 100_000, "{arch:?}: {}", s.param_count());
        }
    }

    #[test]
    fn rejects_bad_tokens() {
        let m = ToyModel::init(spec(Architecture::LinearSoftmax), 0).unwrap();
        assert!(matches!(m.forward_logits(&[11]), Err(UdsError::TokenOutOfRange { .. })));
        assert!(m.forward_logits(&[0; 9]).is_err());
        let empty = Sample {
            id: "e".into(),
            tokens: vec![1, 2],
            prompt_len: 2,
            cluster: None,
        };
        assert!(matches!(m.loss_and_grad(&empty), Err(UdsError::EmptyTargets(_))));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = ToyModel::init(spec(Architecture::TinyMlp), 3).unwrap();
        let a = m.forward_logits(&[1, 2, 3]).unwrap();
        let b = m.forward_logits(&[1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (3, 11));
    }

    #[test]
    fn gradients_match_central_differences() {
        for arch in [Architecture::LinearSoftmax, Architecture::TinyMlp] {
            let m = ToyModel::init(spec(arch), 4).unwrap();
            let s = sample();
            let (_, g) = m.loss_and_grad(&s).unwrap();
            let h = 1e-5;
            for i in (0..m.param_count()).step_by(7) {
                let mut p = m.params().to_vec();
                p[i] += h;
                let up = m.with_params(p.clone()).loss(&s).unwrap();
                p[i] -= 2.0 * h;
                let down = m.with_params(p).loss(&s).unwrap();
                let fd = (up - down) / (2.0 * h);
                let denom = fd.abs().max(g[i].abs()).max(1e-6);
                assert!((fd - g[i]).abs() / denom < 1e-4, "{arch:?} coord {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn jvp_matches_finite_difference() {
        for arch in [Architecture::LinearSoftmax, Architecture::TinyMlp] {
            let m = ToyModel::init(spec(arch), 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let dir: Vec<f64> = (0..m.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let toks = [3u32, 1, 4, 1, 5];
            let j = m.jvp(&toks, &dir).unwrap();
            let h = 1e-6;
            let plus: Vec<f64> = m.params().iter().zip(&dir).map(|(p, d)| p + h * d).collect();
            let minus: Vec<f64> = m.params().iter().zip(&dir).map(|(p, d)| p - h * d).collect();
            let lp = m.with_params(plus).forward_logits(&toks).unwrap();
            let lm = m.with_params(minus).forward_logits(&toks).unwrap();
            for (k, jk) in j.iter().enumerate() {
                let fd = (lp.data()[k] - lm.data()[k]) / (2.0 * h);
                assert!((fd - jk).abs() < 1e-6, "{arch:?} {k}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ToyModel::init(spec(Architecture::TinyMlp), 6).unwrap();
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        let back = ToyModel::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        bytes[0] = b'X';
        assert!(ToyModel::read_from(&mut bytes.as_slice()).is_err());
    }
}
