//! JSON-lines dataset format.
//!
//! Line 1 is a header object
//! `{"version":1,"n":N,"d_s":..,"d_a":..,"action_kind":"continuous"|"discrete","metadata":{..}}`.
//! Each following line is `[state[], action[] | action_id, reward, next_state[], terminal]`.
//! Reals are written as shortest round-trip decimals, so a save/load cycle is
//! bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Action, ActionKind, Dataset, Transition};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    n: usize,
    d_s: usize,
    d_a: usize,
    action_kind: ActionKind,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    dataset.validate()?;
    let header = Header {
        version: FORMAT_VERSION,
        n: dataset.len(),
        d_s: dataset.d_s,
        d_a: dataset.d_a,
        action_kind: dataset.action_kind,
        metadata: dataset.metadata.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in &dataset.transitions {
        let action = match &t.action {
            Action::Continuous(v) => serde_json::to_value(v)?,
            Action::Discrete(id) => Value::from(*id),
        };
        let row = serde_json::json!([t.state, action, t.reward, t.next_state, t.terminal]);
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_dataset(dataset, BufWriter::new(file))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), &path.display().to_string())
}

pub fn read_dataset<R: Read>(input: R, source_name: &str) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        msg,
    };
    let mut lines = BufReader::new(input).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| err(1, "missing header".into()))??;
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| err(1, format!("malformed header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(err(1, format!("unsupported version {}", header.version)));
    }
    let mut dataset = Dataset::new(header.d_s, header.d_a, header.action_kind)
        .map_err(|e| err(1, e.to_string()))?;
    dataset.metadata = header.metadata;
    dataset.transitions.reserve(header.n);

    let mut line_no = 1;
    for line in lines {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if dataset.len() == header.n {
            return Err(err(line_no, format!("more rows than header n={}", header.n)));
        }
        let t = parse_row(&line, header.action_kind).map_err(|m| err(line_no, m))?;
        let row = dataset.len();
        dataset
            .check(&t, row)
            .map_err(|e| err(line_no, e.to_string()))?;
        dataset.transitions.push(t);
    }
    if dataset.len() != header.n {
        return Err(err(
            line_no,
            format!("header declares n={} but found {} rows", header.n, dataset.len()),
        ));
    }
    Ok(dataset)
}

fn parse_row(line: &str, kind: ActionKind) -> std::result::Result<Transition, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed row: {e}"))?;
    let fields = value.as_array().ok_or("row is not an array")?;
    if fields.len() != 5 {
        return Err(format!("row has {} fields, expected 5", fields.len()));
    }
    let state = real_vec(&fields[0], "state")?;
    let action = match kind {
        ActionKind::Continuous => Action::Continuous(real_vec(&fields[1], "action")?),
        ActionKind::Discrete => Action::Discrete(
            fields[1]
                .as_u64()
                .ok_or("discrete action must be a non-negative integer")? as usize,
        ),
    };
    let reward = real(&fields[2], "reward")?;
    let next_state = real_vec(&fields[3], "next_state")?;
    let terminal = fields[4].as_bool().ok_or("terminal must be a boolean")?;
    Ok(Transition {
        state,
        action,
        reward,
        next_state,
        terminal,
    })
}

fn real(v: &Value, field: &str) -> std::result::Result<f64, String> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("{field}: expected a finite real, got {v}"))
}

fn real_vec(v: &Value, field: &str) -> std::result::Result<Vec<f64>, String> {
    v.as_array()
        .ok_or_else(|| format!("{field}: expected an array"))?
        .iter()
        .map(|x| real(x, field))
        .collect()
}
