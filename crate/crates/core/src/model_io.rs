//! Versioned binary container for trained models.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` header length, a JSON
//! [`ModelHeader`], then the arrays listed in the header, little-endian and
//! back to back. Bayes models store their raw counts and rebuild the derived
//! log-ratio tables on load; network models store `f32` parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agents::{AgentCatalog, BayesCounts, BayesModel, NNetModel};
use crate::card::CardSet;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Dense, HiddenLayer, Matrix, Network};

pub const MAGIC: &[u8; 8] = b"DLMODEL\0";
pub const FORMAT_VERSION: u32 = 1;
/// File extension picked up by [`load_model_dir`].
pub const MODEL_EXTENSION: &str = "model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bayes,
    Nnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    U64,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub dtype: DType,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub kind: ModelKind,
    pub set_code: String,
    pub set_size: usize,
    pub hyperparameters: serde_json::Value,
    pub arrays: Vec<ArraySpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Bayes(BayesModel),
    NNet(NNetModel),
}

impl Model {
    pub fn set_code(&self) -> &str {
        match self {
            Model::Bayes(m) => &m.set_code,
            Model::NNet(m) => &m.set_code,
        }
    }

    pub fn set_size(&self) -> usize {
        match self {
            Model::Bayes(m) => m.set_size(),
            Model::NNet(m) => m.set_size(),
        }
    }

    pub fn check_set(&self, set: &CardSet) -> Result<()> {
        if self.set_code() != set.code || self.set_size() != set.len() {
            return Err(Error::SetMismatch {
                expected: set.code.clone(),
                found: self.set_code().to_string(),
            });
        }
        Ok(())
    }
}

enum Array<'a> {
    F32(&'a [f32]),
    U64(&'a [u64]),
}

fn write_container<W: Write>(mut w: W, header: &ModelHeader, arrays: &[Array<'_>]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for a in arrays {
        match a {
            Array::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
            Array::U64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
        }
    }
    w.flush()?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

struct RawArrays {
    header: ModelHeader,
    f32s: Vec<Vec<f32>>,
    u64s: Vec<Vec<u64>>,
    order: Vec<(DType, usize)>,
}

impl RawArrays {
    fn take_f32(&mut self, at: usize, expected: &str, len: usize) -> Result<Vec<f32>> {
        self.check(at, expected, DType::F32, len)?;
        Ok(std::mem::take(&mut self.f32s[self.order[at].1]))
    }

    fn take_u64(&mut self, at: usize, expected: &str, len: usize) -> Result<Vec<u64>> {
        self.check(at, expected, DType::U64, len)?;
        Ok(std::mem::take(&mut self.u64s[self.order[at].1]))
    }

    fn check(&self, at: usize, expected: &str, dtype: DType, len: usize) -> Result<()> {
        let spec = self
            .header
            .arrays
            .get(at)
            .ok_or_else(|| corrupt(format!("missing array {expected}")))?;
        if spec.name != expected || spec.dtype != dtype || spec.len != len {
            return Err(corrupt(format!(
                "array {at} is {} ({:?}, {}), expected {expected} ({dtype:?}, {len})",
                spec.name, spec.dtype, spec.len
            )));
        }
        Ok(())
    }
}

fn read_container<R: Read>(mut r: R) -> Result<RawArrays> {
    let mut magic = [0u8; 8];
    read_exact_or_corrupt(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(corrupt("not a model file"));
    }
    let mut word = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::ModelVersion(version));
    }
    read_exact_or_corrupt(&mut r, &mut word, "header length")?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    read_exact_or_corrupt(&mut r, &mut json, "header")?;
    let header: ModelHeader =
        serde_json::from_slice(&json).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let mut out = RawArrays {
        f32s: Vec::new(),
        u64s: Vec::new(),
        order: Vec::new(),
        header,
    };
    for spec in &out.header.arrays {
        let mut bytes = vec![0u8; spec.len * spec.dtype.width()];
        read_exact_or_corrupt(&mut r, &mut bytes, &format!("array {}", spec.name))?;
        match spec.dtype {
            DType::F32 => {
                out.order.push((DType::F32, out.f32s.len()));
                out.f32s.push(
                    bytes
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                );
            }
            DType::U64 => {
                out.order.push((DType::U64, out.u64s.len()));
                out.u64s.push(
                    bytes
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                );
            }
        }
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(corrupt("trailing bytes after last array"));
    }
    Ok(out)
}

const BAYES_ARRAYS: [&str; 4] = ["m_pair", "m_win", "n_pair", "n_pick"];

pub fn write_bayes<W: Write>(w: W, model: &BayesModel) -> Result<()> {
    let c = &model.counts;
    let s = c.size;
    let header = ModelHeader {
        kind: ModelKind::Bayes,
        set_code: model.set_code.clone(),
        set_size: s,
        hyperparameters: json!({ "prior_hits": 1, "prior_trials": 2 }),
        arrays: BAYES_ARRAYS
            .iter()
            .map(|n| ArraySpec {
                name: n.to_string(),
                dtype: DType::U64,
                len: s * s,
            })
            .collect(),
    };
    let arrays = [&c.m_pair, &c.m_win, &c.n_pair, &c.n_pick].map(|v| Array::U64(v));
    write_container(w, &header, &arrays)
}

fn nnet_layout(net: &Network<f32>) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (i, l) in net.hidden.iter().enumerate() {
        let f = l.norm.features();
        out.push((format!("hidden{i}.weight"), l.dense.weight.data.len()));
        out.push((format!("hidden{i}.bias"), l.dense.bias.len()));
        out.push((format!("hidden{i}.scale"), f));
        out.push((format!("hidden{i}.shift"), f));
        out.push((format!("hidden{i}.running_mean"), f));
        out.push((format!("hidden{i}.running_var"), f));
    }
    out.push(("output.weight".into(), net.output.weight.data.len()));
    out.push(("output.bias".into(), net.output.bias.len()));
    out
}

pub fn write_nnet<W: Write>(w: W, model: &NNetModel) -> Result<()> {
    let net = &model.network;
    if !net.is_finite() {
        return Err(Error::NonFinite("refusing to save a non-finite network".into()));
    }
    let first = net.hidden.first();
    let header = ModelHeader {
        kind: ModelKind::Nnet,
        set_code: model.set_code.clone(),
        set_size: model.set_size(),
        hyperparameters: json!({
            "inputs": net.inputs(),
            "outputs": net.outputs(),
            "layers": net.hidden.len(),
            "width": first.map_or(0, |l| l.dense.outputs()),
            "leak": net.leak,
            "dropout": net.dropout,
            "bn_eps": first.map_or(1e-5, |l| l.norm.eps),
            "bn_momentum": first.map_or(0.1, |l| l.norm.momentum),
        }),
        arrays: nnet_layout(net)
            .into_iter()
            .map(|(name, len)| ArraySpec {
                name,
                dtype: DType::F32,
                len,
            })
            .collect(),
    };
    let mut arrays = Vec::new();
    for l in &net.hidden {
        arrays.push(Array::F32(&l.dense.weight.data));
        arrays.push(Array::F32(&l.dense.bias));
        arrays.push(Array::F32(&l.norm.scale));
        arrays.push(Array::F32(&l.norm.shift));
        arrays.push(Array::F32(&l.norm.running_mean));
        arrays.push(Array::F32(&l.norm.running_var));
    }
    arrays.push(Array::F32(&net.output.weight.data));
    arrays.push(Array::F32(&net.output.bias));
    write_container(w, &header, &arrays)
}

fn hyper<T: serde::de::DeserializeOwned>(h: &serde_json::Value, key: &str) -> Result<T> {
    let v = h
        .get(key)
        .ok_or_else(|| corrupt(format!("missing hyperparameter {key}")))?;
    serde_json::from_value(v.clone()).map_err(|e| corrupt(format!("hyperparameter {key}: {e}")))
}

fn decode_bayes(mut raw: RawArrays) -> Result<BayesModel> {
    let s = raw.header.set_size;
    let mut counts = BayesCounts::new(s);
    counts.m_pair = raw.take_u64(0, BAYES_ARRAYS[0], s * s)?;
    counts.m_win = raw.take_u64(1, BAYES_ARRAYS[1], s * s)?;
    counts.n_pair = raw.take_u64(2, BAYES_ARRAYS[2], s * s)?;
    counts.n_pick = raw.take_u64(3, BAYES_ARRAYS[3], s * s)?;
    Ok(BayesModel::from_counts(raw.header.set_code.clone(), counts))
}

fn decode_nnet(mut raw: RawArrays) -> Result<NNetModel> {
    let h = raw.header.hyperparameters.clone();
    let inputs: usize = hyper(&h, "inputs")?;
    let outputs: usize = hyper(&h, "outputs")?;
    let layers: usize = hyper(&h, "layers")?;
    let width: usize = hyper(&h, "width")?;
    let leak: f32 = hyper(&h, "leak")?;
    let dropout: f64 = hyper(&h, "dropout")?;
    let eps: f32 = hyper(&h, "bn_eps")?;
    let momentum: f32 = hyper(&h, "bn_momentum")?;
    if inputs != raw.header.set_size || outputs != raw.header.set_size {
        return Err(corrupt("network shape does not match set size"));
    }
    let mut at = 0;
    let mut hidden = Vec::with_capacity(layers);
    let mut fan_in = inputs;
    for i in 0..layers {
        let mut next = |suffix: &str, len: usize| {
            let v = raw.take_f32(at, &format!("hidden{i}.{suffix}"), len);
            at += 1;
            v
        };
        let weight = next("weight", width * fan_in)?;
        let bias = next("bias", width)?;
        let scale = next("scale", width)?;
        let shift = next("shift", width)?;
        let running_mean = next("running_mean", width)?;
        let running_var = next("running_var", width)?;
        hidden.push(HiddenLayer {
            dense: Dense {
                weight: Matrix::from_vec(width, fan_in, weight),
                bias,
            },
            norm: BatchNorm {
                scale,
                shift,
                running_mean,
                running_var,
                eps,
                momentum,
            },
        });
        fan_in = width;
    }
    let weight = raw.take_f32(at, "output.weight", outputs * fan_in)?;
    let bias = raw.take_f32(at + 1, "output.bias", outputs)?;
    if raw.header.arrays.len() != at + 2 {
        return Err(corrupt("unexpected extra arrays"));
    }
    let network = Network {
        hidden,
        output: Dense {
            weight: Matrix::from_vec(outputs, fan_in, weight),
            bias,
        },
        leak,
        dropout,
    };
    if !network.is_finite() {
        return Err(corrupt("non-finite parameters"));
    }
    Ok(NNetModel::new(raw.header.set_code.clone(), network))
}

pub fn read_model<R: Read>(r: R) -> Result<Model> {
    let raw = read_container(r)?;
    match raw.header.kind {
        ModelKind::Bayes => decode_bayes(raw).map(Model::Bayes),
        ModelKind::Nnet => decode_nnet(raw).map(Model::NNet),
    }
}

pub fn write_model<W: Write>(w: W, model: &Model) -> Result<()> {
    match model {
        Model::Bayes(m) => write_bayes(w, m),
        Model::NNet(m) => write_nnet(w, m),
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let file = File::create(path)?;
    write_model(BufWriter::new(file), model)
}

/// Loads a model and checks it was trained on `set`.
pub fn load_model(path: impl AsRef<Path>, set: &CardSet) -> Result<Model> {
    let model = read_model(BufReader::new(File::open(path)?))?;
    model.check_set(set)?;
    Ok(model)
}

pub fn load_bayes(path: impl AsRef<Path>, set: &CardSet) -> Result<BayesModel> {
    match load_model(path, set)? {
        Model::Bayes(m) => Ok(m),
        Model::NNet(_) => Err(Error::Invalid("expected a bayes model, found nnet".into())),
    }
}

pub fn load_nnet(path: impl AsRef<Path>, set: &CardSet) -> Result<NNetModel> {
    match load_model(path, set)? {
        Model::NNet(m) => Ok(m),
        Model::Bayes(_) => Err(Error::Invalid("expected an nnet model, found bayes".into())),
    }
}

/// Registers every `*.model` file in `dir` under its file stem. Returns the
/// names that were added, sorted.
pub fn load_model_dir(dir: impl AsRef<Path>, catalog: &mut AgentCatalog) -> Result<Vec<String>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == MODEL_EXTENSION))
        .collect();
    paths.sort();
    let mut names = Vec::new();
    for p in paths {
        let name = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Invalid(format!("bad model file name {}", p.display())))?
            .to_string();
        match load_model(&p, catalog.set())? {
            Model::Bayes(m) => catalog.add_bayes(name.clone(), Arc::new(m))?,
            Model::NNet(m) => catalog.add_nnet(name.clone(), Arc::new(m))?,
        }
        names.push(name);
    }
    Ok(names)
}
