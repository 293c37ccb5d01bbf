//! Network files: a JSON header line with the widths, then for each layer its
//! weight rows (`fan_in` lines of `fan_out` reals) followed by one bias line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Layer, Mlp, PolicyHead, PolicyKind};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    version: u32,
    widths: Vec<usize>,
    activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy_kind: Option<PolicyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_std: Option<Vec<f64>>,
}

fn write_network(path: &Path, mlp: &Mlp, header: NetworkHeader) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for layer in mlp.layers() {
        for row in layer.weight.rows() {
            serde_json::to_writer(&mut out, &row.to_vec())?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &layer.bias.to_vec())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_network(path: &Path) -> Result<(Mlp, NetworkHeader)> {
    let name = path.display().to_string();
    let err = |line: usize, msg: String| Error::Parse {
        source_name: name.clone(),
        line,
        msg,
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header: NetworkHeader = serde_json::from_str(
        &lines.next().ok_or_else(|| err(1, "missing header".into()))??,
    )
    .map_err(|e| err(1, format!("malformed header: {e}")))?;
    if header.widths.len() < 2 || header.widths.contains(&0) {
        return Err(err(1, format!("invalid widths {:?}", header.widths)));
    }
    let mut line_no = 1;
    let mut next_row = |width: usize| -> Result<Vec<f64>> {
        line_no += 1;
        let text = lines
            .next()
            .ok_or_else(|| err(line_no, "unexpected end of file".into()))??;
        let row: Vec<f64> =
            serde_json::from_str(&text).map_err(|e| err(line_no, format!("malformed row: {e}")))?;
        if row.len() != width {
            return Err(err(line_no, format!("expected {width} values, got {}", row.len())));
        }
        Ok(row)
    };
    let mut layers = Vec::new();
    for w in header.widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let mut flat = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in {
            flat.extend(next_row(fan_out)?);
        }
        let weight = Array2::from_shape_vec((fan_in, fan_out), flat).expect("shape checked");
        let bias = Array1::from(next_row(fan_out)?);
        layers.push(Layer { weight, bias });
    }
    Ok((Mlp::from_layers(layers)?, header))
}

pub fn save_mlp(mlp: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    write_network(
        path.as_ref(),
        mlp,
        NetworkHeader {
            version: 1,
            widths: mlp.widths().to_vec(),
            activation: "relu".into(),
            policy_kind: None,
            log_std: None,
        },
    )
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<Mlp> {
    Ok(read_network(path.as_ref())?.0)
}

pub fn save_policy(policy: &PolicyHead, path: impl AsRef<Path>) -> Result<()> {
    write_network(
        path.as_ref(),
        policy.backbone(),
        NetworkHeader {
            version: 1,
            widths: policy.backbone().widths().to_vec(),
            activation: "relu".into(),
            policy_kind: Some(policy.kind()),
            log_std: Some(policy.log_std().to_vec()),
        },
    )
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicyHead> {
    let (mlp, header) = read_network(path.as_ref())?;
    let kind = header.policy_kind.unwrap_or(PolicyKind::Deterministic);
    PolicyHead::from_parts(kind, mlp, header.log_std.unwrap_or_default())
}
