//! Minimal dense-network building blocks shared by the learned models.
//!
//! Parameters of a model live in one flat `Vec<f64>` described by a
//! [`Layout`]; layers hold offsets into it. Gradients use the same layout,
//! which keeps the optimizer, finite-difference checks and serialization
//! model-agnostic. All loops run in a fixed order so results are bitwise
//! reproducible.

use std::io::{Read, Write};

use rand::Rng as _;

use crate::error::{Error, Result};

/// One named matrix (or vector, with `cols == 1`) inside a flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    pub tensors: Vec<Tensor>,
    pub len: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        let offset = self.len;
        self.tensors.push(Tensor {
            name: name.into(),
            rows,
            cols,
            offset,
        });
        self.len += rows * cols;
        offset
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Fully connected layer `y = W x + b` with `W` stored row-major (`out x in`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn declare(layout: &mut Layout, name: &str, inp: usize, out: usize) -> Self {
        let w = layout.add(format!("{name}.weight"), out, inp);
        let b = layout.add(format!("{name}.bias"), out, 1);
        Linear { inp, out, w, b }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init(&self, p: &mut [f64], rng: &mut crate::rng::Rng) {
        let a = 1.0 / (self.inp as f64).sqrt();
        for v in &mut p[self.w..self.w + self.inp * self.out] {
            *v = rng.random_range(-a..a);
        }
        for v in &mut p[self.b..self.b + self.out] {
            *v = rng.random_range(-a..a);
        }
    }

    #[inline]
    pub fn forward(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inp);
        debug_assert_eq!(y.len(), self.out);
        let w = &p[self.w..self.w + self.inp * self.out];
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &w[o * self.inp..(o + 1) * self.inp];
            let mut s = p[self.b + o];
            for (wi, xi) in row.iter().zip(x) {
                s += wi * xi;
            }
            *yo = s;
        }
    }

    /// Accumulates parameter gradients into `g` and, when requested, writes
    /// (not accumulates) the input gradient into `dx`.
    #[inline]
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64], dx: Option<&mut [f64]>) {
        for (o, &d) in dy.iter().enumerate() {
            g[self.b + o] += d;
            if d == 0.0 {
                continue;
            }
            let gw = &mut g[self.w + o * self.inp..self.w + (o + 1) * self.inp];
            for (gi, xi) in gw.iter_mut().zip(x) {
                *gi += d * xi;
            }
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|v| *v = 0.0);
            let w = &p[self.w..self.w + self.inp * self.out];
            for (o, &d) in dy.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (dxi, wi) in dx.iter_mut().zip(&w[o * self.inp..(o + 1) * self.inp]) {
                    *dxi += d * wi;
                }
            }
        }
    }
}

#[inline]
pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `dy` where the activation output was clipped.
#[inline]
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    for (d, v) in dy.iter_mut().zip(y) {
        if *v <= 0.0 {
            *d = 0.0;
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Adam optimizer over a flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

const MAGIC: &[u8; 4] = b"NBVP";
const VERSION: u16 = 1;

/// Writes parameters as: magic, version, kind, JSON metadata, shape table,
/// then every value as a little-endian `f64` in layout order.
pub fn write_params(w: &mut impl Write, kind: &str, meta: &serde_json::Value, layout: &Layout, params: &[f64]) -> std::io::Result<()> {
    assert_eq!(layout.len, params.len());
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_str(w, kind)?;
    write_str(w, &meta.to_string())?;
    w.write_all(&(layout.tensors.len() as u32).to_le_bytes())?;
    for t in &layout.tensors {
        write_str(w, &t.name)?;
        w.write_all(&(t.rows as u32).to_le_bytes())?;
        w.write_all(&(t.cols as u32).to_le_bytes())?;
    }
    for v in params {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parsed parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub kind: String,
    pub meta: serde_json::Value,
    /// `(name, rows, cols)` in storage order.
    pub shapes: Vec<(String, usize, usize)>,
    pub values: Vec<f64>,
}

impl ParamFile {
    /// Checks the shape table against the layout a model expects.
    pub fn check_layout(&self, layout: &Layout) -> Result<()> {
        let expected: Vec<_> = layout.tensors.iter().map(|t| (t.name.clone(), t.rows, t.cols)).collect();
        if expected != self.shapes {
            return Err(Error::ShapeMismatch(format!(
                "parameter file has {} tensors that do not match the model's {}",
                self.shapes.len(),
                expected.len()
            )));
        }
        Ok(())
    }
}

pub fn read_params(r: &mut impl Read) -> Result<ParamFile> {
    let fmt = |m: &str| Error::Format(m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
    if &magic != MAGIC {
        return Err(fmt("not a parameter file"));
    }
    let version = read_u16(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported parameter format version {version}")));
    }
    let kind = read_str(r)?;
    let meta: serde_json::Value = serde_json::from_str(&read_str(r)?)?;
    let n = read_u32(r)? as usize;
    let mut shapes = Vec::with_capacity(n);
    let mut total = 0usize;
    for _ in 0..n {
        let name = read_str(r)?;
        let rows = read_u32(r)? as usize;
        let cols = read_u32(r)? as usize;
        total = total.checked_add(rows * cols).ok_or_else(|| fmt("shape overflow"))?;
        shapes.push((name, rows, cols));
    }
    let mut values = Vec::with_capacity(total);
    let mut buf = [0u8; 8];
    for _ in 0..total {
        r.read_exact(&mut buf).map_err(|_| fmt("truncated parameter data"))?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(ParamFile {
        kind,
        meta,
        shapes,
        values,
    })
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let n = read_u32(r)? as usize;
    if n > 1 << 24 {
        return Err(Error::Format("string field too long".into()));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated string".into()))?;
    String::from_utf8(b).map_err(|_| Error::Format("string field is not UTF-8".into()))
}

/// Relative error used by gradient checks: `|a - n| / max(|a| + |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}
