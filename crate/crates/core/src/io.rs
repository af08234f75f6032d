//! File formats for snapshot histories and fitted models.
//!
//! Binary snapshots: a 32-byte header (`b"SCLROM01"`, then `n`, `m`, `flags`
//! as little-endian `u64`) followed by the entries in column-major order, each
//! as two little-endian binary64 values (real, imaginary). With flag bit 0 set
//! the data is purely real and each entry is a single binary64.
//!
//! CSV snapshots: a first line `n,m`, then one line per state row with entries
//! rendered as `a`, `a+bi` or `a-bi` using shortest round-trip decimals.
//!
//! Models: a UTF-8 manifest of `key: value` lines in fixed order, terminated
//! by a line `end`, followed by the binary blocks of `V`, `Vhat` and the
//! coefficient array. `K`, `T` and the CSF are recomputed on load.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::ohf::{OhfFactorization, SnapshotHistory};
use crate::rom::SclRomModel;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SCLROM01";
const HEADER_LEN: usize = 32;
const FLAG_REAL: u64 = 1;

pub const MODEL_MAGIC: &str = "SCLROM-MODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Binary,
    Csv,
}

pub fn encode_matrix(data: &CMat) -> Vec<u8> {
    let real = data.iter().all(|z| z.im.to_bits() == 0);
    let width = if real { 8 } else { 16 };
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * width);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(data.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(data.ncols() as u64).to_le_bytes());
    out.extend_from_slice(&(if real { FLAG_REAL } else { 0 }).to_le_bytes());
    // nalgebra storage is column-major
    for z in data.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        if !real {
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_bits(read_u64(bytes, at))
}

/// Decodes one binary block from the front of `bytes`, returning the matrix
/// and the number of bytes consumed.
pub fn decode_matrix(bytes: &[u8]) -> Result<(CMat, usize)> {
    if bytes.len() < SNAPSHOT_MAGIC.len() || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::DimensionMismatch(format!(
            "header needs {HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    let n = read_u64(bytes, 8);
    let m = read_u64(bytes, 16);
    let flags = read_u64(bytes, 24);
    if flags & !FLAG_REAL != 0 {
        return Err(Error::InvariantViolation(format!("unknown header flags {flags:#x}")));
    }
    let width: u64 = if flags & FLAG_REAL != 0 { 8 } else { 16 };
    let expected = n
        .checked_mul(m)
        .and_then(|e| e.checked_mul(width))
        .filter(|&e| e <= usize::MAX as u64)
        .ok_or_else(|| Error::DimensionMismatch(format!("declared size {n}x{m} overflows")))?
        as usize;
    let found = bytes.len() - HEADER_LEN;
    if found < expected {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{m} payload needs {expected} bytes, found {found}"
        )));
    }
    let (n, m) = (n as usize, m as usize);
    let payload = &bytes[HEADER_LEN..HEADER_LEN + expected];
    let entries = payload.chunks_exact(width as usize).map(|chunk| {
        let re = read_f64(chunk, 0);
        let im = if width == 16 { read_f64(chunk, 8) } else { 0.0 };
        Complex64::new(re, im)
    });
    Ok((CMat::from_iterator(n, m, entries), HEADER_LEN + expected))
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn format_complex(z: Complex64) -> String {
    if z.im.to_bits() == 0 {
        format_f64(z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", format_f64(z.re), format_f64(-z.im))
    } else {
        format!("{}+{}i", format_f64(z.re), format_f64(z.im))
    }
}

/// Parses `a`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re: f64 = body[..split].parse().ok()?;
    let magnitude = &body[split + 1..];
    if magnitude.starts_with(['+', '-']) {
        return None;
    }
    let im: f64 = magnitude.parse().ok()?;
    Some(Complex64::new(re, if bytes[split] == b'-' { -im } else { im }))
}

pub fn encode_csv(data: &CMat) -> String {
    let mut out = format!("{},{}\n", data.nrows(), data.ncols());
    for row in data.row_iter() {
        let line: Vec<String> = row.iter().map(|z| format_complex(*z)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<CMat> {
    let parse_err = |line: usize, column: usize, msg: String| Error::Parse { line, column, msg };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, 1, "empty file".into()))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(parse_err(1, 1, format!("expected `n,m`, found `{header}`")));
    }
    let n: usize = dims[0]
        .trim()
        .parse()
        .map_err(|_| parse_err(1, 1, format!("bad row count `{}`", dims[0])))?;
    let m: usize = dims[1]
        .trim()
        .parse()
        .map_err(|_| parse_err(1, 2, format!("bad column count `{}`", dims[1])))?;
    let mut data = CMat::zeros(n, m);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        if rows == n {
            return Err(Error::DimensionMismatch(format!("declared {n} rows, found more")));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "line {line_no}: declared {m} columns, found {}",
                fields.len()
            )));
        }
        for (j, field) in fields.iter().enumerate() {
            data[(rows, j)] = parse_complex(field)
                .ok_or_else(|| parse_err(line_no, j + 1, format!("invalid entry `{field}`")))?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch(format!("declared {n} rows, found {rows}")));
    }
    Ok(data)
}

pub fn write_snapshots(h: &SnapshotHistory, path: impl AsRef<Path>, format: SnapshotFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        SnapshotFormat::Binary => encode_matrix(h.data()),
        SnapshotFormat::Csv => encode_csv(h.data()).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads either format, detected by the magic bytes.
pub fn read_snapshots(path: impl AsRef<Path>) -> Result<SnapshotHistory> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshots(&bytes)
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<SnapshotHistory> {
    let data = if bytes.starts_with(SNAPSHOT_MAGIC) {
        let (data, used) = decode_matrix(bytes)?;
        if used != bytes.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {used} bytes, found {}",
                bytes.len()
            )));
        }
        data
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            msg: format!("not UTF-8 and no binary magic: {e}"),
        })?;
        decode_csv(text)?
    };
    SnapshotHistory::new(data)
}

const MANIFEST_KEYS: [&str; 9] = [
    "version",
    "n",
    "m",
    "period",
    "kappa",
    "rho",
    "epsilon_achieved",
    "epsilon_target",
    "payload",
];

pub fn encode_model(model: &SclRomModel) -> Vec<u8> {
    let ohf = model.ohf();
    let pair = |z: Complex64| format!("{:e} {:e}", z.re, z.im);
    let values = [
        MODEL_VERSION.to_string(),
        model.n().to_string(),
        model.m().to_string(),
        model.period().to_string(),
        pair(ohf.kappa()),
        pair(ohf.rho()),
        format!("{:e}", model.epsilon_achieved()),
        format!("{:e}", model.epsilon_target()),
        "V Vhat coeffs".to_string(),
    ];
    let mut out = format!("{MODEL_MAGIC}\n");
    for (k, v) in MANIFEST_KEYS.iter().zip(values) {
        out.push_str(&format!("{k}: {v}\n"));
    }
    out.push_str("end\n");
    let mut bytes = out.into_bytes();
    for block in [ohf.v(), ohf.vhat(), model.coeffs()] {
        bytes.extend(encode_matrix(block));
    }
    bytes
}

struct Manifest {
    n: usize,
    m: usize,
    period: usize,
    kappa: Complex64,
    rho: Complex64,
    epsilon_achieved: f64,
    epsilon_target: f64,
}

fn parse_manifest(text: &str) -> Result<Manifest> {
    let err = |line: usize, msg: String| Error::Parse { line, column: 1, msg };
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&MODEL_MAGIC) {
        return Err(Error::BadMagic);
    }
    let mut values = Vec::with_capacity(MANIFEST_KEYS.len());
    for (i, key) in MANIFEST_KEYS.iter().enumerate() {
        let line_no = i + 2;
        let line = lines.get(i + 1).ok_or_else(|| err(line_no, format!("missing `{key}`")))?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(": "))
            .ok_or_else(|| err(line_no, format!("expected `{key}: ...`, found `{line}`")))?;
        if *key == "version" && value != MODEL_VERSION.to_string() {
            return Err(Error::VersionUnsupported(value.to_string()));
        }
        values.push((line_no, value));
    }
    let int = |(line, v): (usize, &str)| v.parse::<usize>().map_err(|_| err(line, format!("bad integer `{v}`")));
    let real = |(line, v): (usize, &str)| v.parse::<f64>().map_err(|_| err(line, format!("bad number `{v}`")));
    let complex = |(line, v): (usize, &str)| -> Result<Complex64> {
        let (re, im) = v
            .split_once(' ')
            .ok_or_else(|| err(line, format!("expected `re im`, found `{v}`")))?;
        Ok(Complex64::new(real((line, re))?, real((line, im))?))
    };
    if values[8].1 != "V Vhat coeffs" {
        return Err(err(values[8].0, format!("unexpected payload list `{}`", values[8].1)));
    }
    Ok(Manifest {
        n: int(values[1])?,
        m: int(values[2])?,
        period: int(values[3])?,
        kappa: complex(values[4])?,
        rho: complex(values[5])?,
        epsilon_achieved: real(values[6])?,
        epsilon_target: real(values[7])?,
    })
}

/// Parses a model, recomputes the derived projections and re-validates every
/// factorization invariant.
pub fn decode_model(bytes: &[u8]) -> Result<SclRomModel> {
    const TERMINATOR: &[u8] = b"\nend\n";
    let end = bytes
        .windows(TERMINATOR.len())
        .position(|w| w == TERMINATOR)
        .map(|p| p + TERMINATOR.len())
        .ok_or_else(|| {
            if bytes.starts_with(MODEL_MAGIC.as_bytes()) {
                Error::Parse {
                    line: 1,
                    column: 1,
                    msg: "manifest is not terminated by `end`".into(),
                }
            } else {
                Error::BadMagic
            }
        })?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        msg: format!("manifest is not UTF-8: {e}"),
    })?;
    let manifest = parse_manifest(text)?;

    let mut offset = end;
    let mut blocks = Vec::with_capacity(3);
    for (name, rows, cols) in [
        ("V", manifest.n, manifest.m),
        ("Vhat", manifest.n, manifest.m),
        ("coeffs", manifest.m, manifest.period),
    ] {
        let (block, used) = decode_matrix(&bytes[offset..])?;
        if block.shape() != (rows, cols) {
            return Err(Error::InvariantViolation(format!(
                "{name} block is {}x{}, manifest declares {rows}x{cols}",
                block.nrows(),
                block.ncols()
            )));
        }
        offset += used;
        blocks.push(block);
    }
    if offset != bytes.len() {
        return Err(Error::InvariantViolation(format!(
            "{} trailing bytes after the payload",
            bytes.len() - offset
        )));
    }
    let coeffs = blocks.pop().expect("three blocks");
    let vhat = blocks.pop().expect("three blocks");
    let v = blocks.pop().expect("three blocks");
    let ohf = OhfFactorization::from_parts(v, vhat, manifest.kappa, manifest.rho)?;
    SclRomModel::from_parts(ohf, coeffs, manifest.epsilon_achieved, manifest.epsilon_target)
}

pub fn write_model(model: &SclRomModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SclRomModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
