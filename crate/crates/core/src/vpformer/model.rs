use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, Quaternion, UnitQuaternion};
use crate::nn::{read_params, relu_backward, relu_inplace, write_params, Layout, Linear};
use crate::rng;
use crate::scene::GridDims;
use crate::score::{view_features, FeatureSpec, VIEW_FEATURES};
use crate::sensor::Viewpoint;

const KIND: &str = "vpformer";

/// Architecture of the sequence model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VpConfig {
    /// Embedding widths of the coverage, grid and viewpoint parts of a
    /// token; the model width is their sum.
    pub c_dim: usize,
    pub s_dim: usize,
    pub v_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub features: FeatureSpec,
}

impl Default for VpConfig {
    fn default() -> Self {
        VpConfig {
            c_dim: 32,
            s_dim: 128,
            v_dim: 96,
            heads: 8,
            layers: 2,
            ffn: 512,
            max_len: 8,
            features: FeatureSpec::default(),
        }
    }
}

impl VpConfig {
    pub fn width(&self) -> usize {
        self.c_dim + self.s_dim + self.v_dim
    }

    pub fn head_dim(&self) -> usize {
        self.width() / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.width() % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "model width {} is not divisible by {} heads",
                self.width(),
                self.heads
            )));
        }
        if self.layers == 0 || self.ffn == 0 || self.max_len == 0 || self.c_dim == 0 || self.s_dim == 0 || self.v_dim == 0 {
            return Err(Error::InvalidConfig("model sizes must be positive".into()));
        }
        Ok(())
    }
}

/// One step of a viewpoint sequence: coverage and pooled belief after
/// observing from `viewpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub coverage: f64,
    pub features: Vec<f64>,
    pub viewpoint: Viewpoint,
}

/// Tokens of one episode plus the scene frame used to read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub dims: GridDims,
    /// Box the predicted positions are squashed into.
    pub bounds: Aabb,
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn check(&self, cfg: &VpConfig) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        if self.tokens.len() > cfg.max_len {
            return Err(Error::SequenceTooLong {
                len: self.tokens.len(),
                max: cfg.max_len,
            });
        }
        if let Some(t) = self.tokens.iter().find(|t| t.features.len() != cfg.features.len()) {
            return Err(Error::ShapeMismatch(format!(
                "token has {} grid features, model expects {}",
                t.features.len(),
                cfg.features.len()
            )));
        }
        if self.tokens.windows(2).any(|w| w[1].coverage < w[0].coverage) {
            return Err(Error::Format("token coverage decreases".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    f1: Linear,
    f2: Linear,
}

/// Causal multi-head attention encoder mapping a token prefix to the next
/// viewpoint. There is no layer normalization; each block is
/// `x + Attn(x)` followed by `x + FFN(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VpFormer {
    pub cfg: VpConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
    emb_c: Linear,
    emb_s: Linear,
    emb_v: Linear,
    time: usize,
    blocks: Vec<Block>,
    head: Linear,
}

struct BlockCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Per head, `len x len` row-major attention weights.
    p: Vec<f64>,
    o: Vec<f64>,
    x1: Vec<f64>,
    r: Vec<f64>,
}

/// Forward activations kept for backpropagation.
pub struct Trace {
    len: usize,
    c: Vec<f64>,
    s: Vec<f64>,
    v: Vec<f64>,
    blocks: Vec<BlockCache>,
    out: Vec<f64>,
    z: Vec<f64>,
    /// Predicted 7-vectors per position.
    pub y: Vec<[f64; 7]>,
}

impl VpFormer {
    fn with_layout(cfg: VpConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.width();
        let mut layout = Layout::default();
        let emb_c = Linear::declare(&mut layout, "embed_c", 1, cfg.c_dim);
        let emb_s = Linear::declare(&mut layout, "embed_s", cfg.features.len(), cfg.s_dim);
        let emb_v = Linear::declare(&mut layout, "embed_v", VIEW_FEATURES, cfg.v_dim);
        let time = layout.add("time", cfg.max_len, d);
        let blocks = (0..cfg.layers)
            .map(|l| Block {
                q: Linear::declare(&mut layout, &format!("block{l}.q"), d, d),
                k: Linear::declare(&mut layout, &format!("block{l}.k"), d, d),
                v: Linear::declare(&mut layout, &format!("block{l}.v"), d, d),
                o: Linear::declare(&mut layout, &format!("block{l}.o"), d, d),
                f1: Linear::declare(&mut layout, &format!("block{l}.ffn1"), d, cfg.ffn),
                f2: Linear::declare(&mut layout, &format!("block{l}.ffn2"), cfg.ffn, d),
            })
            .collect();
        let head = Linear::declare(&mut layout, "head", d, 7);
        let params = vec![0.0; layout.len];
        Ok(VpFormer {
            cfg,
            layout,
            params,
            emb_c,
            emb_s,
            emb_v,
            time,
            blocks,
            head,
        })
    }

    pub fn new(cfg: VpConfig, seed: u64) -> Result<Self> {
        let mut m = Self::with_layout(cfg)?;
        let mut r = rng::stream(seed, 0x7F0E);
        let mut linears = vec![m.emb_c, m.emb_s, m.emb_v];
        for b in &m.blocks {
            linears.extend([b.q, b.k, b.v, b.o, b.f1, b.f2]);
        }
        linears.push(m.head);
        for l in linears {
            l.init(&mut m.params, &mut r);
        }
        let n = m.cfg.max_len * m.cfg.width();
        for x in &mut m.params[m.time..m.time + n] {
            *x = r.random_range(-0.1..0.1);
        }
        Ok(m)
    }

    /// Every parameter tensor name, for per-layer checks.
    pub fn tensor_names(&self) -> Vec<String> {
        self.layout.tensors.iter().map(|t| t.name.clone()).collect()
    }

    /// Runs the encoder on `seq` and keeps the activations.
    pub fn forward_trace(&self, seq: &TokenSequence) -> Result<Trace> {
        seq.check(&self.cfg)?;
        let cfg = &self.cfg;
        let (d, len, nh, dk) = (cfg.width(), seq.len(), cfg.heads, cfg.head_dim());
        let p = &self.params;
        let nf = cfg.features.len();
        let mut c = Vec::with_capacity(len);
        let mut s = Vec::with_capacity(len * nf);
        let mut v = Vec::with_capacity(len * VIEW_FEATURES);
        for t in &seq.tokens {
            c.push(t.coverage);
            s.extend_from_slice(&t.features);
            v.extend_from_slice(&view_features(&seq.dims, &t.viewpoint));
        }
        let mut x = vec![0.0; len * d];
        for i in 0..len {
            let row = &mut x[i * d..(i + 1) * d];
            let (rc, rest) = row.split_at_mut(cfg.c_dim);
            let (rs, rv) = rest.split_at_mut(cfg.s_dim);
            self.emb_c.forward(p, &c[i..i + 1], rc);
            self.emb_s.forward(p, &s[i * nf..(i + 1) * nf], rs);
            self.emb_v.forward(p, &v[i * VIEW_FEATURES..(i + 1) * VIEW_FEATURES], rv);
            for (xj, tj) in row.iter_mut().zip(&p[self.time + i * d..self.time + (i + 1) * d]) {
                *xj += tj;
            }
        }
        let scale = 1.0 / (dk as f64).sqrt();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut q = vec![0.0; len * d];
            let mut k = vec![0.0; len * d];
            let mut vv = vec![0.0; len * d];
            for i in 0..len {
                let xi = &x[i * d..(i + 1) * d];
                b.q.forward(p, xi, &mut q[i * d..(i + 1) * d]);
                b.k.forward(p, xi, &mut k[i * d..(i + 1) * d]);
                b.v.forward(p, xi, &mut vv[i * d..(i + 1) * d]);
            }
            let mut pr = vec![0.0; nh * len * len];
            let mut o = vec![0.0; len * d];
            for h in 0..nh {
                let off = h * dk;
                for i in 0..len {
                    let qi = &q[i * d + off..i * d + off + dk];
                    let prow = &mut pr[(h * len + i) * len..(h * len + i + 1) * len];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..=i {
                        let kj = &k[j * d + off..j * d + off + dk];
                        let sc = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                        prow[j] = sc;
                        max = max.max(sc);
                    }
                    let mut sum = 0.0;
                    for pj in &mut prow[..=i] {
                        *pj = (*pj - max).exp();
                        sum += *pj;
                    }
                    for pj in &mut prow[..=i] {
                        *pj /= sum;
                    }
                    let oi = &mut o[i * d + off..i * d + off + dk];
                    for j in 0..=i {
                        let w = prow[j];
                        for (oe, ve) in oi.iter_mut().zip(&vv[j * d + off..j * d + off + dk]) {
                            *oe += w * ve;
                        }
                    }
                }
            }
            let mut x1 = x.clone();
            let mut a = vec![0.0; d];
            for i in 0..len {
                b.o.forward(p, &o[i * d..(i + 1) * d], &mut a);
                for (xe, ae) in x1[i * d..(i + 1) * d].iter_mut().zip(&a) {
                    *xe += ae;
                }
            }
            let f = cfg.ffn;
            let mut r = vec![0.0; len * f];
            let mut x2 = x1.clone();
            for i in 0..len {
                let ri = &mut r[i * f..(i + 1) * f];
                b.f1.forward(p, &x1[i * d..(i + 1) * d], ri);
                relu_inplace(ri);
                b.f2.forward(p, ri, &mut a);
                for (xe, ae) in x2[i * d..(i + 1) * d].iter_mut().zip(&a) {
                    *xe += ae;
                }
            }
            caches.push(BlockCache {
                x,
                q,
                k,
                v: vv,
                p: pr,
                o,
                x1,
                r,
            });
            x = x2;
        }
        let lo = seq.bounds.min;
        let ext = seq.bounds.extent();
        let mut z = vec![0.0; len * 7];
        let mut y = Vec::with_capacity(len);
        for i in 0..len {
            let zi = &mut z[i * 7..(i + 1) * 7];
            self.head.forward(p, &x[i * d..(i + 1) * d], zi);
            let mut out = [0.0; 7];
            for a in 0..3 {
                out[a] = lo[a] + ext[a] * 0.5 * (1.0 + zi[a].tanh());
            }
            let n = zi[3..].iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-12);
            for a in 3..7 {
                out[a] = zi[a] / n;
            }
            y.push(out);
        }
        Ok(Trace {
            len,
            c,
            s,
            v,
            blocks: caches,
            out: x,
            z,
            y,
        })
    }

    /// Predicted 7-vectors for every prefix of `seq`.
    pub fn forward_all(&self, seq: &TokenSequence) -> Result<Vec<[f64; 7]>> {
        Ok(self.forward_trace(seq)?.y)
    }

    /// The viewpoint following the last token of `seq`.
    pub fn forward_next_viewpoint(&self, seq: &TokenSequence) -> Result<Viewpoint> {
        let y = *self.forward_all(seq)?.last().expect("sequence is nonempty");
        Ok(Viewpoint::new(
            Point3::new(y[0], y[1], y[2]),
            UnitQuaternion::new_unchecked(Quaternion::new(y[3], y[4], y[5], y[6])),
        ))
    }

    /// Accumulates into `grad` the gradient of `sum_i dy[i] . y[i]` for the
    /// outputs of a trace.
    pub fn backward(&self, tr: &Trace, bounds: &Aabb, dy: &[[f64; 7]], grad: &mut [f64]) {
        let cfg = &self.cfg;
        let (d, len, nh, dk, f) = (cfg.width(), tr.len, cfg.heads, cfg.head_dim(), cfg.ffn);
        let p = &self.params;
        let ext = bounds.extent();
        let mut dx = vec![0.0; len * d];
        for i in 0..len {
            let zi = &tr.z[i * 7..(i + 1) * 7];
            let mut dz = [0.0; 7];
            for a in 0..3 {
                let t = zi[a].tanh();
                dz[a] = dy[i][a] * ext[a] * 0.5 * (1.0 - t * t);
            }
            let n = zi[3..].iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-12);
            let q = &tr.y[i][3..];
            let dot: f64 = (0..4).map(|a| q[a] * dy[i][3 + a]).sum();
            for a in 0..4 {
                dz[3 + a] = (dy[i][3 + a] - q[a] * dot) / n;
            }
            self.head.backward(p, &tr.out[i * d..(i + 1) * d], &dz, grad, Some(&mut dx[i * d..(i + 1) * d]));
        }
        let scale = 1.0 / (dk as f64).sqrt();
        let mut tmp = vec![0.0; d];
        let mut dr = vec![0.0; f];
        for (b, c) in self.blocks.iter().zip(&tr.blocks).rev() {
            // dx holds the gradient w.r.t. the block output x2 = x1 + FFN(x1).
            let mut dx1 = dx.clone();
            for i in 0..len {
                b.f2.backward(p, &c.r[i * f..(i + 1) * f], &dx[i * d..(i + 1) * d], grad, Some(&mut dr));
                relu_backward(&c.r[i * f..(i + 1) * f], &mut dr);
                b.f1.backward(p, &c.x1[i * d..(i + 1) * d], &dr, grad, Some(&mut tmp));
                for (a, t) in dx1[i * d..(i + 1) * d].iter_mut().zip(&tmp) {
                    *a += t;
                }
            }
            // x1 = x + O(attn) Wo
            let mut dxin = dx1.clone();
            let mut d_o = vec![0.0; len * d];
            for i in 0..len {
                b.o.backward(p, &c.o[i * d..(i + 1) * d], &dx1[i * d..(i + 1) * d], grad, Some(&mut d_o[i * d..(i + 1) * d]));
            }
            let mut dq = vec![0.0; len * d];
            let mut dk_ = vec![0.0; len * d];
            let mut dv = vec![0.0; len * d];
            let mut dp = vec![0.0; len];
            for h in 0..nh {
                let off = h * dk;
                for i in 0..len {
                    let prow = &c.p[(h * len + i) * len..(h * len + i + 1) * len];
                    let doi = &d_o[i * d + off..i * d + off + dk];
                    let mut acc = 0.0;
                    for j in 0..=i {
                        let vj = &c.v[j * d + off..j * d + off + dk];
                        dp[j] = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                        acc += prow[j] * dp[j];
                        for (dve, de) in dv[j * d + off..j * d + off + dk].iter_mut().zip(doi) {
                            *dve += prow[j] * de;
                        }
                    }
                    for j in 0..=i {
                        let ds = prow[j] * (dp[j] - acc) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for e in 0..dk {
                            dq[i * d + off + e] += ds * c.k[j * d + off + e];
                            dk_[j * d + off + e] += ds * c.q[i * d + off + e];
                        }
                    }
                }
            }
            for i in 0..len {
                let xi = &c.x[i * d..(i + 1) * d];
                for (lin, g) in [(&b.q, &dq), (&b.k, &dk_), (&b.v, &dv)] {
                    lin.backward(p, xi, &g[i * d..(i + 1) * d], grad, Some(&mut tmp));
                    for (a, t) in dxin[i * d..(i + 1) * d].iter_mut().zip(&tmp) {
                        *a += t;
                    }
                }
            }
            dx = dxin;
        }
        let nf = cfg.features.len();
        for i in 0..len {
            let row = &dx[i * d..(i + 1) * d];
            for (g, e) in grad[self.time + i * d..self.time + (i + 1) * d].iter_mut().zip(row) {
                *g += e;
            }
            let (gc, rest) = row.split_at(cfg.c_dim);
            let (gs, gv) = rest.split_at(cfg.s_dim);
            self.emb_c.backward(p, &tr.c[i..i + 1], gc, grad, None);
            self.emb_s.backward(p, &tr.s[i * nf..(i + 1) * nf], gs, grad, None);
            self.emb_v.backward(p, &tr.v[i * VIEW_FEATURES..(i + 1) * VIEW_FEATURES], gv, grad, None);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        let meta = serde_json::to_value(self.cfg).expect("config serializes");
        write_params(&mut buf, KIND, &meta, &self.layout, &self.params).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let f = read_params(&mut &bytes[..])?;
        if f.kind != KIND {
            return Err(Error::Format(format!("expected {KIND} parameters, found {}", f.kind)));
        }
        let cfg: VpConfig = serde_json::from_value(f.meta.clone())?;
        let mut m = Self::with_layout(cfg)?;
        f.check_layout(&m.layout)?;
        m.params = f.values;
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::nn::relative_error;

    pub(crate) fn tiny_config() -> VpConfig {
        VpConfig {
            c_dim: 2,
            s_dim: 4,
            v_dim: 2,
            heads: 2,
            layers: 2,
            ffn: 8,
            max_len: 4,
            features: FeatureSpec { blocks: [2, 2, 2] },
        }
    }

    pub(crate) fn random_sequence(cfg: &VpConfig, len: usize, seed: u64) -> TokenSequence {
        let dims = GridDims::new(6, 5, 4, 0.1, Point3::origin()).unwrap();
        let mut r = rng::from_seed(seed);
        let mut coverage = 0.0;
        let tokens = (0..len)
            .map(|_| {
                coverage += r.random_range(0.0..0.2);
                let pos = Point3::new(r.random_range(-0.3..0.9), r.random_range(-0.3..0.8), r.random_range(-0.5..0.0));
                Token {
                    coverage,
                    features: (0..cfg.features.len()).map(|_| r.random::<f64>()).collect(),
                    viewpoint: Viewpoint::look_at(pos, dims.center()),
                }
            })
            .collect();
        TokenSequence {
            dims,
            bounds: Aabb::new(Point3::new(-0.4, -0.4, -0.6), Point3::new(1.0, 0.9, 0.0)),
            tokens,
        }
    }

    fn weighted_output(m: &VpFormer, seq: &TokenSequence, dy: &[[f64; 7]]) -> f64 {
        let y = m.forward_all(seq).unwrap();
        y.iter().zip(dy).map(|(a, b)| (0..7).map(|e| a[e] * b[e]).sum::<f64>()).sum()
    }

    #[test]
    fn gradients_match_central_differences_per_tensor() {
        let cfg = tiny_config();
        let model = VpFormer::new(cfg, 3).unwrap();
        let seq = random_sequence(&cfg, 4, 9);
        let mut r = rng::from_seed(21);
        let dy: Vec<[f64; 7]> = (0..4).map(|_| std::array::from_fn(|_| r.random_range(-1.0..1.0))).collect();
        let tr = model.forward_trace(&seq).unwrap();
        let mut grad = vec![0.0; model.params.len()];
        model.backward(&tr, &seq.bounds, &dy, &mut grad);
        let h = 1e-6;
        for name in model.tensor_names() {
            let t = model.layout.tensor(&name).unwrap().clone();
            for _ in 0..6 {
                let i = t.offset + r.random_range(0..t.len());
                let mut m = model.clone();
                m.params[i] += h;
                let up = weighted_output(&m, &seq, &dy);
                m.params[i] -= 2.0 * h;
                let down = weighted_output(&m, &seq, &dy);
                let num = (up - down) / (2.0 * h);
                let err = relative_error(grad[i], num, 1e-7);
                assert!(err < 1e-3, "{name}[{i}]: analytic {} numeric {num}", grad[i]);
            }
        }
    }

    #[test]
    fn later_tokens_do_not_affect_earlier_outputs() {
        let cfg = tiny_config();
        let model = VpFormer::new(cfg, 4).unwrap();
        let seq = random_sequence(&cfg, 4, 2);
        let base = model.forward_all(&seq).unwrap();
        for j in 1..4 {
            let mut other = seq.clone();
            other.tokens[j].features.iter_mut().for_each(|f| *f = 1.0 - *f);
            other.tokens[j].viewpoint = Viewpoint::look_at(Point3::new(0.1, 0.2, -0.3), Point3::new(0.5, 0.5, 0.5));
            for t in &mut other.tokens[j..] {
                t.coverage += 0.3;
            }
            let y = model.forward_all(&other).unwrap();
            for i in 0..j {
                assert_eq!(y[i], base[i], "output {i} changed when token {j} did");
            }
            assert_ne!(y[j], base[j]);
        }
    }

    #[test]
    fn attention_rows_are_distributions() {
        let cfg = tiny_config();
        let model = VpFormer::new(cfg, 5).unwrap();
        let seq = random_sequence(&cfg, 3, 1);
        let tr = model.forward_trace(&seq).unwrap();
        let len = 3;
        for c in &tr.blocks {
            for h in 0..cfg.heads {
                for i in 0..len {
                    let row = &c.p[(h * len + i) * len..(h * len + i + 1) * len];
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(row[i + 1..].iter().all(|&w| w == 0.0));
                }
            }
        }
    }

    #[test]
    fn outputs_are_poses_inside_the_bounds() {
        let cfg = tiny_config();
        let seq = random_sequence(&cfg, 4, 8);
        for seed in 0..5 {
            let mut model = VpFormer::new(cfg, seed).unwrap();
            // Saturate the position outputs.
            model.params.iter_mut().for_each(|p| *p *= 20.0);
            for y in model.forward_all(&seq).unwrap() {
                let p = Point3::new(y[0], y[1], y[2]);
                assert!(seq.bounds.inflate(1e-12).contains(&p), "{p:?}");
                let n: f64 = y[3..].iter().map(|e| e * e).sum();
                assert!((n - 1.0).abs() < 1e-9);
            }
            assert!(model.forward_next_viewpoint(&seq).unwrap().is_valid());
        }
    }

    #[test]
    fn rejects_malformed_sequences() {
        let cfg = tiny_config();
        let model = VpFormer::new(cfg, 0).unwrap();
        let seq = random_sequence(&cfg, 5, 0);
        assert!(matches!(model.forward_all(&seq), Err(Error::SequenceTooLong { len: 5, max: 4 })));
        let mut empty = seq.clone();
        empty.tokens.clear();
        assert!(matches!(model.forward_all(&empty), Err(Error::EmptyInput(_))));
        let mut short = random_sequence(&cfg, 2, 0);
        short.tokens[1].features.pop();
        assert!(matches!(model.forward_all(&short), Err(Error::ShapeMismatch(_))));
        let mut dec = random_sequence(&cfg, 2, 0);
        dec.tokens[1].coverage = dec.tokens[0].coverage - 0.1;
        assert!(model.forward_all(&dec).is_err());
        let bad = VpConfig { heads: 3, ..cfg };
        assert!(VpFormer::new(bad, 0).is_err());
    }

    #[test]
    fn params_round_trip() {
        let cfg = tiny_config();
        let m = VpFormer::new(cfg, 6).unwrap();
        let back = VpFormer::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(m, back);
        let seq = random_sequence(&cfg, 3, 3);
        assert_eq!(m.forward_all(&seq).unwrap(), back.forward_all(&seq).unwrap());
        let default = VpFormer::new(VpConfig::default(), 0).unwrap();
        assert_eq!(default.cfg.width(), 256);
        assert_eq!(default.cfg.head_dim(), 32);
    }
}
