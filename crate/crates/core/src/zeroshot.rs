//! Stream fusion, projection into the class-embedding space, cosine
//! nearest-neighbour classification and the training objective.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::param::{Module, Parameter};
use crate::rng::SplitMix64;
use crate::tensor::{dot, Activation, Tensor};

pub const EMBED_DIM: usize = 1024;
pub const DEFAULT_TAU: f64 = 10.0;

/// Ordered class names with their embeddings. Raw values are kept for
/// lossless serialization; unit-normalized copies are used for scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassEmbeddingTable {
    names: Vec<String>,
    raw: Vec<Vec<f64>>,
    unit: Vec<Vec<f64>>,
    dim: usize,
}

impl ClassEmbeddingTable {
    /// Builds a table of [`EMBED_DIM`]-dimensional embeddings.
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        Self::with_dim(entries, EMBED_DIM)
    }

    pub fn with_dim(entries: Vec<(String, Vec<f64>)>, dim: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut names = Vec::with_capacity(entries.len());
        let mut raw = Vec::with_capacity(entries.len());
        let mut unit = Vec::with_capacity(entries.len());
        for (name, v) in entries {
            if v.len() != dim {
                return Err(Error::format(
                    "embedding",
                    format!("class {name:?} has {} values, expected {dim}", v.len()),
                ));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::format("embedding", format!("duplicate class name {name:?}")));
            }
            let n = dot(&v, &v).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::DegenerateEmbedding(format!("class {name:?} has zero or non-finite norm")));
            }
            unit.push(v.iter().map(|x| x / n).collect());
            raw.push(v);
            names.push(name);
        }
        Ok(ClassEmbeddingTable { names, raw, unit, dim })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Unit-normalized embedding of class `i`.
    pub fn unit(&self, i: usize) -> &[f64] {
        &self.unit[i]
    }

    pub fn raw(&self, i: usize) -> &[f64] {
        &self.raw[i]
    }

    /// Sub-table of the named classes, in the given order.
    pub fn restrict(&self, names: &[String]) -> Result<Self> {
        let mut out = ClassEmbeddingTable {
            names: Vec::new(),
            raw: Vec::new(),
            unit: Vec::new(),
            dim: self.dim,
        };
        for name in names {
            let i = self
                .index_of(name)
                .ok_or_else(|| Error::Config(format!("class {name:?} has no embedding")))?;
            out.names.push(name.clone());
            out.raw.push(self.raw[i].clone());
            out.unit.push(self.unit[i].clone());
        }
        Ok(out)
    }

    /// One line per class: `name<TAB>v1 v2 ... vD`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, v) in self.names.iter().zip(&self.raw) {
            s.push_str(name);
            s.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                write!(s, "{x:?}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::format("embedding", format!("line {}: missing TAB", lineno + 1)))?;
            let v = values
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::format("embedding", format!("line {}: bad number {t:?}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push((name.to_string(), v));
        }
        Self::new(entries)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Concatenation of the RGB and depth clip features, RGB first.
pub fn fuse(rgb: &Tensor, depth: &Tensor) -> Result<Tensor> {
    if rgb.len() != depth.len() {
        return Err(Error::Config(format!(
            "stream features differ in length: {} vs {}",
            rgb.len(),
            depth.len()
        )));
    }
    Ok(crate::tensor::concat(rgb, depth))
}

/// Cosine similarity of two non-zero vectors.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            op: "similarity",
            lhs: vec![a.len()],
            rhs: vec![b.len()],
        });
    }
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateEmbedding("zero-norm vector in cosine similarity".into()));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Index of the class whose embedding has the highest cosine similarity with
/// `z`; ties go to the lowest index.
pub fn classify(z: &[f64], table: &ClassEmbeddingTable) -> Result<usize> {
    if table.is_empty() {
        return Err(Error::Protocol("empty candidate class set".into()));
    }
    let nz = dot(z, z).sqrt();
    if nz == 0.0 || !nz.is_finite() {
        return Err(Error::DegenerateEmbedding("predicted embedding has zero norm".into()));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..table.len() {
        // table embeddings are unit length, so cosine ordering is dot ordering
        let s = dot(z, table.unit(i));
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// Cross-entropy over `tau · cos(z, e_c)` for all seen classes.
    SoftmaxCosine { tau: f64 },
    /// `1 - cos(z, e_true)`.
    CosineRegression,
}

impl Default for Objective {
    fn default() -> Self {
        Objective::SoftmaxCosine { tau: DEFAULT_TAU }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `dL/dz`.
    pub grad: Vec<f64>,
    /// Cosine similarity with each seen class.
    pub cosines: Vec<f64>,
}

impl LossOutput {
    /// Seen-class prediction (argmax cosine, lowest index on ties).
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.cosines.iter().enumerate() {
            if c > self.cosines[best] {
                best = i;
            }
        }
        best
    }
}

/// Loss of one predicted embedding against the seen-class table.
pub fn loss(z: &[f64], true_class: usize, seen: &ClassEmbeddingTable, objective: Objective) -> Result<LossOutput> {
    if true_class >= seen.len() {
        return Err(Error::Protocol(format!(
            "class index {true_class} outside seen table of {}",
            seen.len()
        )));
    }
    if z.len() != seen.dim() {
        return Err(Error::Dimension {
            op: "loss",
            lhs: vec![z.len()],
            rhs: vec![seen.dim()],
        });
    }
    let nz = dot(z, z).sqrt();
    if nz == 0.0 || !nz.is_finite() {
        return Err(Error::DegenerateEmbedding("predicted embedding has zero norm".into()));
    }
    let u: Vec<f64> = z.iter().map(|v| v / nz).collect();
    let cosines: Vec<f64> = (0..seen.len()).map(|c| dot(&u, seen.unit(c))).collect();
    let (loss, dcos) = match objective {
        Objective::SoftmaxCosine { tau } => {
            if tau <= 0.0 {
                return Err(Error::Config(format!("tau must be positive, got {tau}")));
            }
            let mut p: Vec<f64> = cosines.iter().map(|c| tau * c).collect();
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + p.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            let loss = lse - tau * cosines[true_class];
            crate::tensor::softmax_in_place(&mut p);
            let dcos: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(c, &pc)| tau * (pc - if c == true_class { 1.0 } else { 0.0 }))
                .collect();
            (loss, dcos)
        }
        Objective::CosineRegression => {
            let mut dcos = vec![0.0; seen.len()];
            dcos[true_class] = -1.0;
            (1.0 - cosines[true_class], dcos)
        }
    };
    // dL/du = Σ_c dcos_c e_c, then project out the radial part of u.
    let mut du = vec![0.0; z.len()];
    for (c, &g) in dcos.iter().enumerate() {
        if g != 0.0 {
            for (acc, &e) in du.iter_mut().zip(seen.unit(c)) {
                *acc += g * e;
            }
        }
    }
    let radial = dot(&du, &u);
    let grad = du.iter().zip(&u).map(|(d, uu)| (d - radial * uu) / nz).collect();
    Ok(LossOutput { loss, grad, cosines })
}

/// Projection from the fused `2N` feature into the class-embedding space:
/// one linear layer, or two with a ReLU in between.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticHead {
    pub fc1: Linear,
    pub fc2: Option<Linear>,
}

#[derive(Clone, Debug)]
pub struct HeadCache {
    x: Tensor,
    pre: Option<Tensor>,
    act: Option<Tensor>,
}

impl SemanticHead {
    pub fn new(input_dim: usize, fc_count: usize, rng: &mut SplitMix64) -> Result<Self> {
        Self::with_output(input_dim, fc_count, EMBED_DIM, rng)
    }

    pub fn with_output(input_dim: usize, fc_count: usize, output: usize, rng: &mut SplitMix64) -> Result<Self> {
        match fc_count {
            1 => Ok(SemanticHead {
                fc1: Linear::new("head.fc1", input_dim, output, rng),
                fc2: None,
            }),
            2 => Ok(SemanticHead {
                fc1: Linear::new("head.fc1", input_dim, output, rng),
                fc2: Some(Linear::new("head.fc2", output, output, rng)),
            }),
            n => Err(Error::Config(format!("fc_count must be 1 or 2, got {n}"))),
        }
    }

    pub fn fc_count(&self) -> usize {
        1 + self.fc2.is_some() as usize
    }

    pub fn output_dim(&self) -> usize {
        self.fc2.as_ref().unwrap_or(&self.fc1).output_dim()
    }

    /// `x: [B, 2N]` to `z: [B, output]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, HeadCache)> {
        let h = self.fc1.forward(x)?;
        match &self.fc2 {
            None => Ok((
                h,
                HeadCache {
                    x: x.clone(),
                    pre: None,
                    act: None,
                },
            )),
            Some(fc2) => {
                let act = Activation::Relu.forward(&h);
                let z = fc2.forward(&act)?;
                Ok((
                    z,
                    HeadCache {
                        x: x.clone(),
                        pre: Some(h),
                        act: Some(act),
                    },
                ))
            }
        }
    }

    /// Single-vector projection.
    pub fn project(&self, fused: &Tensor) -> Result<Tensor> {
        let x = fused.clone().reshape(&[1, fused.len()])?;
        let (z, _) = self.forward(&x)?;
        Ok(Tensor::vector(z.into_data()))
    }

    pub fn backward(&mut self, cache: &HeadCache, dz: &Tensor) -> Tensor {
        let dh = match (&mut self.fc2, &cache.pre, &cache.act) {
            (Some(fc2), Some(pre), Some(act)) => {
                let dact = fc2.backward(act, dz, true).expect("input grad");
                Activation::Relu.backward(pre, &dact).expect("shape")
            }
            _ => dz.clone(),
        };
        self.fc1.backward(&cache.x, &dh, true).expect("input grad")
    }
}

impl Module for SemanticHead {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.fc1.visit(f);
        if let Some(fc2) = &self.fc2 {
            fc2.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.fc1.visit_mut(f);
        if let Some(fc2) = &mut self.fc2 {
            fc2.visit_mut(f);
        }
    }
}
