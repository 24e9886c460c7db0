//! Self-describing JSON checkpoints.
//!
//! Floats are written with shortest round-trip formatting, so a reload
//! reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{GeoNet, GeoNetConfig, Layout};
use crate::domain::ClassVocabulary;
use crate::encode::FeatureConvention;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Parameters {
    input_weight: Matrix,
    input_bias: Vec<f64>,
    blocks: Vec<Block>,
    output_weight: Matrix,
    output_bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u64,
    config: GeoNetConfig,
    vocabulary: Vec<String>,
    feature_convention: String,
    parameters: Parameters,
}

fn matrix(params: &[f64], range: std::ops::Range<usize>, rows: usize, cols: usize) -> Matrix {
    Matrix { rows, cols, data: params[range].to_vec() }
}

/// Serialize to the checkpoint text format.
pub fn write_checkpoint(net: &GeoNet) -> String {
    let l = net.layout();
    let p = net.params();
    let h = net.config.hidden_width;
    let c = net.config.classes;
    let parameters = Parameters {
        input_weight: matrix(p, l.input_weight(), h, net.config.input_dim),
        input_bias: p[l.input_bias()].to_vec(),
        blocks: (0..net.config.residual_blocks)
            .map(|b| Block {
                w1: matrix(p, l.block_w1(b), h, h),
                b1: p[l.block_b1(b)].to_vec(),
                w2: matrix(p, l.block_w2(b), h, h),
                b2: p[l.block_b2(b)].to_vec(),
            })
            .collect(),
        output_weight: matrix(p, l.output_weight(), c, h),
        output_bias: p[l.output_bias()].to_vec(),
    };
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        config: net.config,
        vocabulary: net.vocabulary.labels().to_vec(),
        feature_convention: net.convention.id().to_string(),
        parameters,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    s.push('\n');
    s
}

/// Parse the checkpoint text format.
pub fn read_checkpoint(text: &str) -> Result<GeoNet> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::CorruptFile(format!("checkpoint: {e}")))?;
    let version =
        value.get("format_version").ok_or_else(|| Error::CorruptFile("checkpoint has no format_version".into()))?;
    let version_ok = match version {
        Value::Number(n) => n.as_u64() == Some(CHECKPOINT_VERSION),
        Value::String(s) => s.trim() == CHECKPOINT_VERSION.to_string(),
        _ => false,
    };
    if !version_ok {
        let shown = match version {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return Err(Error::UnsupportedVersion(shown));
    }
    let mut value = value;
    value["format_version"] = Value::from(CHECKPOINT_VERSION);
    let file: CheckpointFile =
        serde_json::from_value(value).map_err(|e| Error::CorruptFile(format!("checkpoint: {e}")))?;

    let convention = FeatureConvention::from_id(&file.feature_convention)
        .ok_or_else(|| Error::CorruptFile(format!("unknown feature convention {:?}", file.feature_convention)))?;
    let vocabulary = ClassVocabulary::from_ordered(file.vocabulary).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let cfg = file.config;
    cfg.validate().map_err(|e| Error::CorruptFile(e.to_string()))?;
    let (h, c) = (cfg.hidden_width, cfg.classes);
    let layout = Layout::new(h, c, cfg.residual_blocks);
    let p = file.parameters;
    if p.blocks.len() != cfg.residual_blocks {
        return Err(Error::CorruptFile(format!("expected {} blocks, found {}", cfg.residual_blocks, p.blocks.len())));
    }

    let mut params = Vec::with_capacity(layout.total());
    let mut take = |name: &str, m: &Matrix, rows: usize, cols: usize| -> Result<()> {
        if m.rows != rows || m.cols != cols || m.data.len() != rows * cols {
            return Err(Error::CorruptFile(format!(
                "{name}: expected {rows}x{cols}, found {}x{} with {} values",
                m.rows,
                m.cols,
                m.data.len()
            )));
        }
        params.extend_from_slice(&m.data);
        Ok(())
    };
    take("input_weight", &p.input_weight, h, cfg.input_dim)?;
    take("input_bias", &Matrix { rows: h, cols: 1, data: p.input_bias }, h, 1)?;
    for (i, b) in p.blocks.into_iter().enumerate() {
        take(&format!("blocks[{i}].w1"), &b.w1, h, h)?;
        take(&format!("blocks[{i}].b1"), &Matrix { rows: h, cols: 1, data: b.b1 }, h, 1)?;
        take(&format!("blocks[{i}].w2"), &b.w2, h, h)?;
        take(&format!("blocks[{i}].b2"), &Matrix { rows: h, cols: 1, data: b.b2 }, h, 1)?;
    }
    take("output_weight", &p.output_weight, c, h)?;
    take("output_bias", &Matrix { rows: c, cols: 1, data: p.output_bias }, c, 1)?;

    GeoNet::from_parts(cfg, params, vocabulary, convention)
}

pub fn save_checkpoint(net: &GeoNet, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_text(path.as_ref(), &write_checkpoint(net))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GeoNet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| crate::io::with_path(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::CorruptFile("checkpoint is not UTF-8".into()))?;
    read_checkpoint(&text)
}
