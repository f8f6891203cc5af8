//! Slab checkpoints.
//!
//! A checkpoint starts with a plain-text header terminated by a line `end`:
//!
//! ```text
//! biot-checkpoint 1
//! k 2
//! l 1
//! level 0
//! tau 0.1
//! slab 3
//! t_start 0.30000000000000004
//! nodes 3
//! end
//! ```
//!
//! followed by one binary block per (field, node) in the order u, v, w, p and
//! node 0..=k: a field byte (0..=3), the node index as `u32`, the coefficient
//! count as `u64`, then the coefficients as `f64`. All binary values are
//! little-endian.

use std::io::{BufRead, Write};

use super::{NodeState, SlabState};
use crate::error::{Error, Result};
use crate::mms::Field;

const MAGIC: &str = "biot-checkpoint 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointHeader {
    pub k: usize,
    pub l: usize,
    pub level: usize,
    pub tau: f64,
    pub slab: usize,
    pub t_start: f64,
}

fn field_code(f: Field) -> u8 {
    match f {
        Field::U => 0,
        Field::V => 1,
        Field::W => 2,
        Field::P => 3,
    }
}

pub fn write_checkpoint(mut out: impl Write, header: &CheckpointHeader, slab: &SlabState) -> Result<()> {
    if slab.nodes.len() != header.k + 1 {
        return Err(Error::Checkpoint(format!(
            "slab has {} nodes, header says k = {}",
            slab.nodes.len(),
            header.k
        )));
    }
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "k {}", header.k)?;
    writeln!(out, "l {}", header.l)?;
    writeln!(out, "level {}", header.level)?;
    writeln!(out, "tau {}", header.tau)?;
    writeln!(out, "slab {}", header.slab)?;
    writeln!(out, "t_start {}", header.t_start)?;
    writeln!(out, "nodes {}", slab.nodes.len())?;
    writeln!(out, "end")?;
    for f in Field::ALL {
        for (j, node) in slab.nodes.iter().enumerate() {
            let data = node.field(f);
            out.write_all(&[field_code(f)])?;
            out.write_all(&(j as u32).to_le_bytes())?;
            out.write_all(&(data.len() as u64).to_le_bytes())?;
            for v in data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, value: Option<&str>) -> Result<T> {
    value
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad value for '{key}'")))
}

pub fn read_checkpoint(mut input: impl BufRead) -> Result<(CheckpointHeader, SlabState)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let (mut k, mut l, mut level, mut tau, mut slab, mut t_start, mut nodes) = (None, None, None, None, None, None, None);
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Checkpoint("header not terminated".into()));
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        let value = parts.next();
        match key {
            "end" => break,
            "k" => k = Some(parse(key, value)?),
            "l" => l = Some(parse(key, value)?),
            "level" => level = Some(parse(key, value)?),
            "tau" => tau = Some(parse(key, value)?),
            "slab" => slab = Some(parse(key, value)?),
            "t_start" => t_start = Some(parse(key, value)?),
            "nodes" => nodes = Some(parse::<usize>(key, value)?),
            other => return Err(Error::Checkpoint(format!("unknown header key '{other}'"))),
        }
    }
    let missing = |name: &str| Error::Checkpoint(format!("header lacks '{name}'"));
    let header = CheckpointHeader {
        k: k.ok_or_else(|| missing("k"))?,
        l: l.ok_or_else(|| missing("l"))?,
        level: level.ok_or_else(|| missing("level"))?,
        tau: tau.ok_or_else(|| missing("tau"))?,
        slab: slab.ok_or_else(|| missing("slab"))?,
        t_start: t_start.ok_or_else(|| missing("t_start"))?,
    };
    let num_nodes = nodes.ok_or_else(|| missing("nodes"))?;
    if num_nodes != header.k + 1 {
        return Err(Error::Checkpoint(format!("{num_nodes} nodes for k = {}", header.k)));
    }
    let mut states = vec![NodeState::default(); num_nodes];
    for f in Field::ALL {
        for (j, state) in states.iter_mut().enumerate() {
            let mut tag = [0u8; 13];
            input.read_exact(&mut tag)?;
            let node = u32::from_le_bytes(tag[1..5].try_into().unwrap()) as usize;
            let len = u64::from_le_bytes(tag[5..13].try_into().unwrap()) as usize;
            if tag[0] != field_code(f) || node != j {
                return Err(Error::Checkpoint(format!("unexpected block ({}, {node})", tag[0])));
            }
            let mut bytes = vec![0u8; len * 8];
            input.read_exact(&mut bytes)?;
            *state.field_mut(f) = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
        }
    }
    let slab = SlabState {
        index: header.slab,
        t_start: header.t_start,
        tau: header.tau,
        nodes: states,
    };
    Ok((header, slab))
}
