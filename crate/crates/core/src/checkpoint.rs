//! `.bgkchk` snapshots: `key=value` header lines, a terminator line, then
//! the field values as little-endian `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{BgkError, Result};
use crate::params::{fmt_f64, Exponent, ModelParams};
use crate::phase_space::{DistributionField, DomainMode, PhaseGrid};

pub const CHECKPOINT_EXTENSION: &str = "bgkchk";
pub const CHECKPOINT_VERSION: &str = "1";
const END_OF_HEADER: &str = "end_header";

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes `f` together with the model parameters.
pub fn encode(f: &DistributionField, params: &ModelParams) -> Vec<u8> {
    let g = f.grid();
    let mut head = vec![("format".to_string(), format!("bgkchk/{CHECKPOINT_VERSION}"))];
    head.extend(params.header_pairs());
    head.extend([
        ("domain_mode".to_string(), g.mode().as_str().to_string()),
        ("x_min".to_string(), join(g.x_min())),
        ("x_max".to_string(), join(g.x_max())),
        ("nx".to_string(), join_usize(g.nx())),
        ("v_min".to_string(), join(g.v_min())),
        ("v_max".to_string(), join(g.v_max())),
        ("nv".to_string(), join_usize(g.nv())),
        ("time".to_string(), fmt_f64(f.time())),
        ("values".to_string(), f.values().len().to_string()),
    ]);
    let mut out = Vec::with_capacity(f.values().len() * 8 + 512);
    for (k, v) in head {
        writeln!(out, "{k}={v}").expect("write to vec");
    }
    writeln!(out, "{END_OF_HEADER}").expect("write to vec");
    for x in f.values() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parses bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<(DistributionField, ModelParams)> {
    let bad = |m: String| BgkError::Checkpoint(m);
    let mut header = BTreeMap::new();
    let mut pos = 0;
    loop {
        let end =
            bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("header is not terminated".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8".into()))?;
        pos += end + 1;
        if line == END_OF_HEADER {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| header.get(k).cloned().ok_or_else(|| bad(format!("missing key '{k}'")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse::<f64>().map_err(|_| bad(format!("bad number for '{k}'"))) };
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?.split(',').map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad list for '{k}'")))).collect()
    };
    let counts = |k: &str| -> Result<Vec<usize>> {
        get(k)?.split(',').map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad list for '{k}'")))).collect()
    };
    if get("format")? != format!("bgkchk/{CHECKPOINT_VERSION}") {
        return Err(bad("unsupported format version".into()));
    }
    let n: usize = get("n")?.parse().map_err(|_| bad("bad n".into()))?;
    let gamma: Exponent = get("gamma")?.parse()?;
    let params = ModelParams::new(n, gamma, num("kappa")?, num("tau")?, num("epsilon")?)?;
    let mode = match get("domain_mode")?.as_str() {
        "periodic" => DomainMode::Periodic,
        "free_truncated" => DomainMode::FreeTruncated,
        other => return Err(bad(format!("unknown domain mode '{other}'"))),
    };
    let grid = PhaseGrid::new(
        n,
        &floats("x_min")?,
        &floats("x_max")?,
        &counts("nx")?,
        &floats("v_min")?,
        &floats("v_max")?,
        &counts("nv")?,
        mode,
    )?;
    let len: usize = get("values")?.parse().map_err(|_| bad("bad value count".into()))?;
    let body = &bytes[pos..];
    if body.len() != len * 8 {
        return Err(bad(format!("expected {} payload bytes, found {}", len * 8, body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let field = DistributionField::from_values(Arc::new(grid), values, num("time")?)?;
    Ok((field, params))
}

pub fn write_checkpoint(path: &Path, f: &DistributionField, params: &ModelParams) -> Result<()> {
    fs::write(path, encode(f, params)).map_err(|e| BgkError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint(path: &Path) -> Result<(DistributionField, ModelParams)> {
    let bytes = fs::read(path).map_err(|e| BgkError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let params = ModelParams::new(2, "3/2".parse::<Exponent>().unwrap(), 0.7, 0.1, 0.05).unwrap();
        let grid = Arc::new(
            PhaseGrid::new(
                2,
                &[0.0, -1.0],
                &[1.0, 1.0],
                &[3, 2],
                &[-2.0, -3.0],
                &[2.0, 3.0],
                &[4, 5],
                DomainMode::FreeTruncated,
            )
            .unwrap(),
        );
        let mut f = DistributionField::from_fn(grid, |x, v| (x[0] + 0.1 * v[1]).sin().abs() / 3.0);
        f.set_time(0.1 + 0.2);
        let (back, p) = decode(&encode(&f, &params)).unwrap();
        assert_eq!(p, params);
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.time().to_bits(), f.time().to_bits());
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut cut = encode(&f, &params);
        cut.pop();
        assert!(matches!(decode(&cut), Err(BgkError::Checkpoint(_))));
    }
}
