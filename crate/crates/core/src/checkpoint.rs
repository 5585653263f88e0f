//! Versioned text container for trained parameters.
//!
//! The format is line-oriented and self-describing:
//!
//! ```text
//! probtsf-checkpoint v1
//! meta p 96
//! meta horizon 96
//! meta normalize 1
//! meta arch dense
//! meta pretrain_snapshot 1
//! array mean.a_raw 32
//! <32 space-separated values>
//! array mean.readout_w 96 32
//! <96 lines of 32 values>
//! ...
//! end
//! ```
//!
//! Mean-forecaster arrays are `mean.{a_raw, b, c, delta_raw, readout_w,
//! readout_b}`; the uncertainty head stores `sigma.layer<l>.{w, b}` per layer
//! (dense) or `sigma.{a_raw, ...}` (state-space variant); an optional
//! pretrain snapshot repeats the mean arrays under `det.`. Values use the
//! shortest decimal form that parses back to the identical bits, so
//! `load(save(x)) == x` exactly. The trailing `end` line makes truncation
//! detectable.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ssm::SsmParams;
use crate::variance::{DenseParams, VarianceParams};

const HEADER: &str = "probtsf-checkpoint v1";

/// A trained model plus the metadata needed to validate a dataset against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Lookback length the model was trained with.
    pub p: usize,
    pub mean: SsmParams,
    pub sigma: VarianceParams,
    /// The mean forecaster as it stood after the point-wise phase.
    pub mean_pretrained: Option<SsmParams>,
}

/// Parse failure with the 1-based line it was detected on.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointError {
    pub line: usize,
    pub msg: String,
}

impl core::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "checkpoint line {}: {}", self.line, self.msg)
    }
}

impl core::error::Error for CheckpointError {}

fn push_array(out: &mut String, name: &str, rows: usize, cols: usize, values: &[f64]) {
    debug_assert_eq!(values.len(), rows * cols);
    if rows == 1 {
        out.push_str(&format!("array {name} {cols}\n"));
    } else {
        out.push_str(&format!("array {name} {rows} {cols}\n"));
    }
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
            first = false;
        }
        out.push('\n');
    }
}

fn push_ssm(out: &mut String, prefix: &str, p: &SsmParams) {
    let d = p.latent_dim;
    push_array(out, &format!("{prefix}.a_raw"), 1, d, &p.a_raw);
    push_array(out, &format!("{prefix}.b"), 1, d, &p.b);
    push_array(out, &format!("{prefix}.c"), 1, d, &p.c);
    push_array(out, &format!("{prefix}.delta_raw"), 1, 1, &[p.delta_raw]);
    push_array(out, &format!("{prefix}.readout_w"), p.horizon, d, &p.readout_w);
    push_array(out, &format!("{prefix}.readout_b"), 1, p.horizon, &p.readout_b);
}

/// Serializes a checkpoint to its text form.
pub fn encode(ck: &Checkpoint) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("meta p {}\n", ck.p));
    out.push_str(&format!("meta horizon {}\n", ck.mean.horizon));
    out.push_str(&format!("meta normalize {}\n", u8::from(ck.mean.normalize)));
    let arch = match &ck.sigma {
        VarianceParams::Dense(_) => "dense",
        VarianceParams::SsmBacked(_) => "ssm",
    };
    out.push_str(&format!("meta arch {arch}\n"));
    out.push_str(&format!(
        "meta pretrain_snapshot {}\n",
        u8::from(ck.mean_pretrained.is_some())
    ));

    push_ssm(&mut out, "mean", &ck.mean);
    match &ck.sigma {
        VarianceParams::Dense(p) => {
            for (l, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
                push_array(&mut out, &format!("sigma.layer{l}.w"), p.dims[l + 1], p.dims[l], w);
                push_array(&mut out, &format!("sigma.layer{l}.b"), 1, p.dims[l + 1], b);
            }
        }
        VarianceParams::SsmBacked(p) => push_ssm(&mut out, "sigma", p),
    }
    if let Some(det) = &ck.mean_pretrained {
        push_ssm(&mut out, "det", det);
    }
    out.push_str("end\n");
    out
}

struct RawArray {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

struct Parser<'a> {
    lines: core::iter::Enumerate<core::str::Lines<'a>>,
}

impl<'a> Parser<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str), CheckpointError> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or(CheckpointError { line: 0, msg: String::from("file ends before the end marker") })
    }
}

fn err(line: usize, msg: impl core::fmt::Display) -> CheckpointError {
    CheckpointError { line, msg: msg.to_string() }
}

/// Parses the text form back into a checkpoint; rejects unknown versions,
/// truncation, malformed values, and missing or misshapen arrays.
pub fn decode(text: &str) -> Result<Checkpoint, CheckpointError> {
    let mut parser = Parser { lines: text.lines().enumerate() };

    let (ln, header) = parser.next_line()?;
    if header != HEADER {
        return Err(err(ln, format!("unsupported header {header:?}, expected {HEADER:?}")));
    }

    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut arrays: BTreeMap<String, RawArray> = BTreeMap::new();
    let mut saw_end = false;
    while let Ok((ln, line)) = parser.next_line() {
        if line == "end" {
            saw_end = true;
            break;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("meta") => {
                let key = fields.next().ok_or_else(|| err(ln, "meta without a key"))?;
                let value = fields.next().ok_or_else(|| err(ln, "meta without a value"))?;
                meta.insert(key.to_string(), value.to_string());
            }
            Some("array") => {
                let name = fields.next().ok_or_else(|| err(ln, "array without a name"))?;
                let dims: Vec<usize> = fields
                    .map(|f| f.parse().map_err(|_| err(ln, format!("bad dimension {f:?}"))))
                    .collect::<Result<_, _>>()?;
                let (rows, cols) = match dims.as_slice() {
                    [c] => (1, *c),
                    [r, c] => (*r, *c),
                    _ => return Err(err(ln, "array needs 1 or 2 dimensions")),
                };
                let mut values = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (vln, vline) = parser.next_line().map_err(|_| {
                        err(ln, format!("array {name} is truncated"))
                    })?;
                    for field in vline.split_whitespace() {
                        let v: f64 = field
                            .parse()
                            .map_err(|_| err(vln, format!("bad value {field:?}")))?;
                        values.push(v);
                    }
                }
                if values.len() != rows * cols {
                    return Err(err(
                        ln,
                        format!("array {name}: expected {} values, got {}", rows * cols, values.len()),
                    ));
                }
                arrays.insert(name.to_string(), RawArray { rows, cols, values });
            }
            Some(other) => return Err(err(ln, format!("unknown directive {other:?}"))),
            None => {} // blank line
        }
    }
    if !saw_end {
        return Err(err(0, "missing end marker (file truncated?)"));
    }

    let meta_usize = |key: &str| -> Result<usize, CheckpointError> {
        meta.get(key)
            .ok_or_else(|| err(0, format!("missing meta {key}")))?
            .parse()
            .map_err(|_| err(0, format!("bad meta {key}")))
    };
    let p = meta_usize("p")?;
    let horizon = meta_usize("horizon")?;
    let normalize = meta_usize("normalize")? != 0;
    let has_snapshot = meta_usize("pretrain_snapshot")? != 0;
    let arch = meta
        .get("arch")
        .ok_or_else(|| err(0, "missing meta arch"))?
        .clone();

    let take_ssm = |arrays: &mut BTreeMap<String, RawArray>,
                    prefix: &str|
     -> Result<SsmParams, CheckpointError> {
        let mut take = |suffix: &str| -> Result<RawArray, CheckpointError> {
            arrays
                .remove(&format!("{prefix}.{suffix}"))
                .ok_or_else(|| err(0, format!("missing array {prefix}.{suffix}")))
        };
        let a_raw = take("a_raw")?;
        let d = a_raw.cols;
        let readout_w = take("readout_w")?;
        if readout_w.rows != horizon || readout_w.cols != d {
            return Err(err(
                0,
                format!("{prefix}.readout_w has shape {}x{}, expected {horizon}x{d}",
                        readout_w.rows, readout_w.cols),
            ));
        }
        Ok(SsmParams {
            latent_dim: d,
            horizon,
            a_raw: a_raw.values,
            b: take("b")?.values,
            c: take("c")?.values,
            delta_raw: take("delta_raw")?.values[0],
            readout_w: readout_w.values,
            readout_b: take("readout_b")?.values,
            normalize,
        })
    };

    let mean = take_ssm(&mut arrays, "mean")?;
    let sigma = match arch.as_str() {
        "dense" => {
            let mut dims = Vec::new();
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for l in 0.. {
                let Some(w) = arrays.remove(&format!("sigma.layer{l}.w")) else { break };
                let b = arrays
                    .remove(&format!("sigma.layer{l}.b"))
                    .ok_or_else(|| err(0, format!("missing array sigma.layer{l}.b")))?;
                if dims.is_empty() {
                    dims.push(w.cols);
                }
                dims.push(w.rows);
                weights.push(w.values);
                biases.push(b.values);
            }
            if weights.is_empty() {
                return Err(err(0, "dense head has no layers"));
            }
            VarianceParams::Dense(DenseParams { dims, weights, biases, normalize })
        }
        "ssm" => VarianceParams::SsmBacked(take_ssm(&mut arrays, "sigma")?),
        other => return Err(err(0, format!("unknown arch {other:?}"))),
    };
    let mean_pretrained = if has_snapshot { Some(take_ssm(&mut arrays, "det")?) } else { None };

    if let Some(name) = arrays.keys().next() {
        return Err(err(0, format!("unexpected array {name}")));
    }

    Ok(Checkpoint { p, mean, sigma, mean_pretrained })
}

/// Writes the checkpoint to a file.
#[cfg(feature = "std")]
pub fn save_checkpoint(path: &std::path::Path, ck: &Checkpoint) -> std::io::Result<()> {
    std::fs::write(path, encode(ck))
}

/// Reads a checkpoint back from a file.
#[cfg(feature = "std")]
pub fn load_checkpoint(path: &std::path::Path) -> std::io::Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    decode(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::variance::DenseParams;
    use rand::RngExt;

    fn random_checkpoint(seed: u64, dense: bool, snapshot: bool) -> Checkpoint {
        let mut rng = stream_rng(seed, 940);
        let mut mean = SsmParams::init(5, 7, &mut rng);
        for v in mean.readout_b.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let sigma = if dense {
            VarianceParams::Dense(DenseParams::with_default_shape(9, 6, 7, &mut rng))
        } else {
            VarianceParams::init_ssm_backed(4, 7, &mut rng)
        };
        let mean_pretrained = snapshot.then(|| {
            let mut det = mean.clone();
            det.delta_raw += 0.25;
            det
        });
        Checkpoint { p: 9, mean, sigma, mean_pretrained }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for (seed, dense, snapshot) in
            [(1, true, true), (2, true, false), (3, false, true), (4, false, false)]
        {
            let ck = random_checkpoint(seed, dense, snapshot);
            let decoded = decode(&encode(&ck)).unwrap();
            assert_eq!(ck, decoded);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let ck = random_checkpoint(5, true, true);
        assert_eq!(encode(&ck), encode(&ck));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = encode(&random_checkpoint(6, true, false));
        let cut = &text[..text.len() * 2 / 3];
        assert!(decode(cut).is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = encode(&random_checkpoint(7, true, false));
        let bumped = text.replace("checkpoint v1", "checkpoint v2");
        let e = decode(&bumped).unwrap_err();
        assert!(e.msg.contains("unsupported header"), "{e}");
    }

    #[test]
    fn corrupt_value_is_rejected_with_line() {
        let text = encode(&random_checkpoint(8, true, false));
        let mut lines: Vec<&str> = text.lines().collect();
        // line after "array mean.a_raw 5" holds the values
        let at = lines.iter().position(|l| l.starts_with("array mean.a_raw")).unwrap() + 1;
        lines[at] = "0.5 0.5 not-a-number 0.5 0.5";
        let rebuilt = lines.join("\n");
        let e = decode(&rebuilt).unwrap_err();
        assert_eq!(e.line, at + 1, "error should name the corrupted line: {e}");
    }

    #[cfg(feature = "std")]
    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("probtsf-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ck.txt");
        let ck = random_checkpoint(9, false, true);
        save_checkpoint(&path, &ck).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(ck, loaded);
        std::fs::remove_file(&path).unwrap();
    }
}
