//! Versioned decimal-text checkpoints.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! checkpoint back reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use super::{Agent, AgentHyperparams, BranchingHead, Layer, LearnError, Mlp, SacAgent, StateBinning, TabularSoftQ};
use crate::scalar::NetScalar;

const MAGIC: &str = "urllc-hrl-checkpoint v1";

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Sac64(SacAgent<f64>),
    Sac32(SacAgent<f32>),
    Tabular(TabularSoftQ),
}

impl Checkpoint {
    pub fn into_agent(self) -> Box<dyn Agent> {
        match self {
            Self::Sac64(a) => Box::new(a),
            Self::Sac32(a) => Box::new(a),
            Self::Tabular(a) => Box::new(a),
        }
    }
}

fn join<T: std::fmt::Display>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_heads(out: &mut String, heads: &BranchingHead) {
    let _ = writeln!(out, "heads {}", heads.dims());
    for l in heads.all_levels() {
        let _ = writeln!(out, "levels {}", join(l));
    }
}

fn write_net<F: NetScalar>(out: &mut String, name: &str, net: &Mlp<F>) {
    let _ = writeln!(out, "net {name} {}", net.layers().len());
    for l in net.layers() {
        let _ = writeln!(out, "layer {} {}", l.w.nrows(), l.w.ncols());
        let _ = writeln!(out, "w {}", join(l.w.iter()));
        let _ = writeln!(out, "b {}", join(l.b.iter()));
    }
}

fn scalar_name<F: 'static>() -> &'static str {
    if std::any::TypeId::of::<F>() == std::any::TypeId::of::<f32>() {
        "f32"
    } else {
        "f64"
    }
}

pub(crate) fn write_sac<F: NetScalar>(agent: &SacAgent<F>) -> String {
    let mut out = format!("{MAGIC}\nagent sac {}\n", scalar_name::<F>());
    let hp = agent.hyperparams();
    let _ = writeln!(
        out,
        "hyper {} {} {} {} {} {} {} [{}]",
        hp.discount,
        hp.learning_rate,
        hp.batch_size,
        hp.temperature,
        hp.target_update_rate,
        hp.replay_capacity,
        hp.updates_per_step,
        join(&hp.hidden)
    );
    write_heads(&mut out, agent.heads_ref());
    for (name, net) in ["actor", "critic", "target"].iter().zip(agent.nets()) {
        write_net(&mut out, name, net);
    }
    out
}

pub(crate) fn write_tabular(agent: &TabularSoftQ) -> String {
    let mut out = format!("{MAGIC}\nagent tabular\n");
    let p = agent.params();
    let _ = writeln!(out, "params {} {} {}", p[0], p[1], p[2]);
    match agent.binning() {
        StateBinning::Argmax { n } => {
            let _ = writeln!(out, "binning argmax {n}");
        }
        StateBinning::Grid { dims, bins, lo, hi } => {
            let _ = writeln!(out, "binning grid {dims} {bins} {lo} {hi}");
        }
    }
    write_heads(&mut out, agent.heads());
    let _ = writeln!(out, "table {}", join(agent.table()));
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, tag: &str) -> Result<Vec<&'a str>, LearnError> {
        let (no, line) = self.it.next().ok_or_else(|| LearnError::Checkpoint(format!("missing `{tag}` line")))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(t) if t == tag => Ok(parts.collect()),
            _ => Err(LearnError::Checkpoint(format!("line {}: expected `{tag}`", no + 1))),
        }
    }
}

fn parse<T: FromStr>(s: &str) -> Result<T, LearnError> {
    s.parse().map_err(|_| LearnError::Checkpoint(format!("bad number {s:?}")))
}

fn parse_all<T: FromStr>(v: &[&str]) -> Result<Vec<T>, LearnError> {
    v.iter().map(|s| parse(s)).collect()
}

fn field<'a>(v: &[&'a str], i: usize) -> Result<&'a str, LearnError> {
    v.get(i).copied().ok_or_else(|| LearnError::Checkpoint("truncated line".into()))
}

fn read_heads(lines: &mut Lines) -> Result<BranchingHead, LearnError> {
    let n: usize = parse(field(&lines.next("heads")?, 0)?)?;
    let levels = (0..n).map(|_| parse_all(&lines.next("levels")?)).collect::<Result<Vec<Vec<f64>>, _>>()?;
    BranchingHead::new(levels)
}

fn read_net<F: NetScalar>(lines: &mut Lines, name: &str) -> Result<Mlp<F>, LearnError> {
    let head = lines.next("net")?;
    if field(&head, 0)? != name {
        return Err(LearnError::Checkpoint(format!("expected network {name}")));
    }
    let n: usize = parse(field(&head, 1)?)?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let dims = lines.next("layer")?;
        let (rows, cols): (usize, usize) = (parse(field(&dims, 0)?)?, parse(field(&dims, 1)?)?);
        let w = Array2::from_shape_vec((rows, cols), parse_all(&lines.next("w")?)?)
            .map_err(|e| LearnError::Checkpoint(format!("{name}: {e}")))?;
        let b = Array1::from_vec(parse_all(&lines.next("b")?)?);
        layers.push(Layer { w, b });
    }
    Mlp::from_layers(layers)
}

fn read_sac<F: NetScalar>(lines: &mut Lines) -> Result<SacAgent<F>, LearnError> {
    let h = lines.next("hyper")?;
    let hidden = h[7..].join(" ");
    let hidden = hidden.trim_start_matches('[').trim_end_matches(']');
    let hp = AgentHyperparams {
        discount: parse(field(&h, 0)?)?,
        learning_rate: parse(field(&h, 1)?)?,
        batch_size: parse(field(&h, 2)?)?,
        temperature: parse(field(&h, 3)?)?,
        target_update_rate: parse(field(&h, 4)?)?,
        replay_capacity: parse(field(&h, 5)?)?,
        updates_per_step: parse(field(&h, 6)?)?,
        hidden: parse_all(&hidden.split_whitespace().collect::<Vec<_>>())?,
    };
    let heads = read_heads(lines)?;
    let nets = [read_net(lines, "actor")?, read_net(lines, "critic")?, read_net(lines, "target")?];
    SacAgent::from_parts(heads, hp, nets, 0)
}

fn read_tabular(lines: &mut Lines) -> Result<TabularSoftQ, LearnError> {
    let p: Vec<f64> = parse_all(&lines.next("params")?)?;
    if p.len() != 3 {
        return Err(LearnError::Checkpoint("params needs 3 values".into()));
    }
    let b = lines.next("binning")?;
    let binning = match field(&b, 0)? {
        "argmax" => StateBinning::Argmax { n: parse(field(&b, 1)?)? },
        "grid" => StateBinning::Grid {
            dims: parse(field(&b, 1)?)?,
            bins: parse(field(&b, 2)?)?,
            lo: parse(field(&b, 3)?)?,
            hi: parse(field(&b, 4)?)?,
        },
        other => return Err(LearnError::Checkpoint(format!("unknown binning {other}"))),
    };
    let heads = read_heads(lines)?;
    let table = parse_all(&lines.next("table")?)?;
    TabularSoftQ::from_parts(heads, binning, [p[0], p[1], p[2]], table)
}

pub fn load_checkpoint(text: &str) -> Result<Checkpoint, LearnError> {
    let mut it = text.lines().enumerate();
    match it.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(LearnError::Checkpoint("unrecognized header".into())),
    }
    let mut lines = Lines { it };
    let kind = lines.next("agent")?;
    match (field(&kind, 0)?, kind.get(1).copied()) {
        ("sac", Some("f64")) => Ok(Checkpoint::Sac64(read_sac(&mut lines)?)),
        ("sac", Some("f32")) => Ok(Checkpoint::Sac32(read_sac(&mut lines)?)),
        ("tabular", _) => Ok(Checkpoint::Tabular(read_tabular(&mut lines)?)),
        (other, _) => Err(LearnError::Checkpoint(format!("unknown agent kind {other}"))),
    }
}
