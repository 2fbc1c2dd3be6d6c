//! Versioned plain-text checkpoints: every parameter array with a shape
//! header, written with shortest-round-trip float formatting so a dump is
//! lossless and byte-stable across runs on identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::heads::{HeadLayout, Squash};
use super::net::{Activation, DenseLayer, DenseNet};
use super::{LearnerError, Policy};

const MAGIC: &str = "saradc-checkpoint v1";

fn activation_tag(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Linear => "linear",
    }
}

fn parse_activation(tag: &str) -> Result<Activation, LearnerError> {
    match tag {
        "tanh" => Ok(Activation::Tanh),
        "linear" => Ok(Activation::Linear),
        other => Err(LearnerError::Checkpoint(format!(
            "unknown activation tag {other:?}"
        ))),
    }
}

fn write_net(out: &mut String, name: &str, net: &DenseNet) {
    writeln!(out, "net {} {}", name, net.layers.len()).unwrap();
    for layer in &net.layers {
        writeln!(
            out,
            "layer {} {} {}",
            layer.weights.nrows(),
            layer.weights.ncols(),
            activation_tag(layer.activation)
        )
        .unwrap();
        let weights: Vec<String> = layer.weights.iter().map(|v| v.to_string()).collect();
        writeln!(out, "weights {}", weights.join(" ")).unwrap();
        let bias: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
        writeln!(out, "bias {}", bias.join(" ")).unwrap();
    }
}

/// Serializes a policy to the checkpoint text format.
pub fn to_string(policy: &Policy) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "layout {} {}", policy.layout.n_pairs, policy.layout.n_u).unwrap();
    writeln!(out, "squash_p {} {}", policy.p_squash.lo, policy.p_squash.hi).unwrap();
    writeln!(out, "squash_o1 {} {}", policy.o1_squash.lo, policy.o1_squash.hi).unwrap();
    write_net(&mut out, "actor", &policy.actor);
    write_net(&mut out, "critic", &policy.critic);
    out
}

pub fn save(policy: &Policy, path: &Path) -> Result<(), LearnerError> {
    std::fs::write(path, to_string(policy))
        .map_err(|e| LearnerError::Checkpoint(format!("write {}: {e}", path.display())))
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<&'a str, LearnerError> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| LearnerError::Checkpoint(format!("truncated at line {}", self.line_no)))
    }
}

fn parse_values(line: &str, tag: &str, expected: usize) -> Result<Vec<f64>, LearnerError> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| LearnerError::Checkpoint(format!("expected {tag:?} line")))?;
    let values: Vec<f64> = rest
        .split_whitespace()
        .map(|v| v.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| LearnerError::Checkpoint(format!("bad float in {tag}: {e}")))?;
    if values.len() != expected {
        return Err(LearnerError::Checkpoint(format!(
            "{tag}: expected {expected} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn read_net(reader: &mut LineReader, name: &str) -> Result<DenseNet, LearnerError> {
    let header = reader.next()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("net") || parts.next() != Some(name) {
        return Err(LearnerError::Checkpoint(format!(
            "expected net {name} header, got {header:?}"
        )));
    }
    let n_layers: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| LearnerError::Checkpoint("bad layer count".into()))?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let layer_header = reader.next()?;
        let mut parts = layer_header.split_whitespace();
        if parts.next() != Some("layer") {
            return Err(LearnerError::Checkpoint(format!(
                "expected layer header, got {layer_header:?}"
            )));
        }
        let rows: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| LearnerError::Checkpoint("bad layer rows".into()))?;
        let cols: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| LearnerError::Checkpoint("bad layer cols".into()))?;
        let activation = parse_activation(
            parts
                .next()
                .ok_or_else(|| LearnerError::Checkpoint("missing activation".into()))?,
        )?;
        let weights = parse_values(reader.next()?, "weights", rows * cols)?;
        let bias = parse_values(reader.next()?, "bias", rows)?;
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((rows, cols), weights)
                .map_err(|e| LearnerError::Checkpoint(e.to_string()))?,
            bias: Array1::from(bias),
            activation,
        });
    }
    Ok(DenseNet { layers })
}

/// Parses a checkpoint back into a policy.
pub fn from_string(text: &str) -> Result<Policy, LearnerError> {
    let mut reader = LineReader {
        lines: text.lines(),
        line_no: 0,
    };
    let magic = reader.next()?;
    if magic != MAGIC {
        return Err(LearnerError::Checkpoint(format!(
            "unrecognized header {magic:?}"
        )));
    }
    let layout_line = reader.next()?;
    let layout_vals = parse_values(layout_line, "layout", 2)?;
    let layout = HeadLayout {
        n_pairs: layout_vals[0] as usize,
        n_u: layout_vals[1] as usize,
    };
    let p_vals = parse_values(reader.next()?, "squash_p", 2)?;
    let o1_vals = parse_values(reader.next()?, "squash_o1", 2)?;
    let actor = read_net(&mut reader, "actor")?;
    let critic = read_net(&mut reader, "critic")?;
    if actor.output_dim() != layout.output_dim() {
        return Err(LearnerError::Checkpoint(format!(
            "actor output dim {} does not match layout {}",
            actor.output_dim(),
            layout.output_dim()
        )));
    }
    Ok(Policy {
        actor,
        critic,
        layout,
        p_squash: Squash::new(p_vals[0], p_vals[1]),
        o1_squash: Squash::new(o1_vals[0], o1_vals[1]),
    })
}

pub fn load(path: &Path) -> Result<Policy, LearnerError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LearnerError::Checkpoint(format!("read {}: {e}", path.display())))?;
    from_string(&text)
}
