use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::tensor::Param;
use crate::{Error, Result};

const MAGIC: &str = "cmidckpt";
const VERSION: u32 = 1;

/// Writes parameters as a versioned textual key->array map.
///
/// Format: a `cmidckpt <version>` header, then per tensor one
/// `tensor <name> <rows> <cols>` line followed by one line of values per
/// row. Values use Rust's shortest round-trip float formatting, so a
/// save/load cycle is bit-exact.
pub fn save_checkpoint(path: &Path, entries: &[(String, Param)]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    for (name, param) in entries {
        if name.contains(char::is_whitespace) {
            return Err(Error::Checkpoint(format!("tensor name contains whitespace: {name:?}")));
        }
        let v = param.value();
        writeln!(out, "tensor {name} {} {}", v.nrows(), v.ncols()).unwrap();
        for row in v.outer_iter() {
            let mut line = String::new();
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                write!(line, "{x}").unwrap();
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a checkpoint back into name -> array form.
pub fn load_checkpoint(path: &Path) -> Result<BTreeMap<String, Array2<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Checkpoint("bad magic string".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint("missing version".into()))?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }

    let mut out = BTreeMap::new();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(Error::Checkpoint(format!("expected tensor header, got {line:?}")));
        }
        let name = parts
            .next()
            .ok_or_else(|| Error::Checkpoint("tensor header missing name".into()))?
            .to_string();
        let rows: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint(format!("bad rows for {name}")))?;
        let cols: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint(format!("bad cols for {name}")))?;
        let mut data = Array2::zeros((rows, cols));
        for r in 0..rows {
            let row_line = lines
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("{name}: missing row {r}")))?;
            let mut k = 0;
            for tok in row_line.split_whitespace() {
                if k >= cols {
                    return Err(Error::Checkpoint(format!("{name}: row {r} too long")));
                }
                data[[r, k]] = tok
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("{name}: bad value {tok:?}")))?;
                k += 1;
            }
            if k != cols {
                return Err(Error::Checkpoint(format!("{name}: row {r} has {k} of {cols} values")));
            }
        }
        if out.insert(name.clone(), data).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    Ok(out)
}

/// Assigns loaded arrays into named parameters, requiring exact coverage
/// and matching shapes.
pub fn restore_params(
    loaded: &BTreeMap<String, Array2<f64>>,
    entries: &[(String, Param)],
) -> Result<()> {
    for (name, param) in entries {
        let data = loaded
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("checkpoint missing tensor {name}")))?;
        if data.dim() != param.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: checkpoint shape {:?} vs net shape {:?}",
                data.dim(),
                param.shape()
            )));
        }
        param.set_value(data.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let a = Param::from_array(arr2(&[[0.1, -1.0 / 3.0], [f64::MIN_POSITIVE, 1e300]]));
        let b = Param::from_array(arr2(&[[2.0_f64.sqrt()]]));
        let entries = vec![("net.w0".to_string(), a.clone()), ("net.b0".to_string(), b.clone())];
        save_checkpoint(&path, &entries).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded["net.w0"], a.value());
        assert_eq!(loaded["net.b0"], b.value());
    }

    #[test]
    fn restore_rejects_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let a = Param::from_array(arr2(&[[1.0, 2.0]]));
        save_checkpoint(&path, &[("w".into(), a)]).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let wrong = Param::from_array(arr2(&[[1.0], [2.0]]));
        assert!(restore_params(&loaded, &[("w".into(), wrong)]).is_err());
        let missing = Param::from_array(arr2(&[[1.0, 2.0]]));
        assert!(restore_params(&loaded, &[("nope".into(), missing)]).is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "notckpt 1\n").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
