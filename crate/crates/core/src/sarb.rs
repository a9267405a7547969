//! SARB: a small binary container for named n-dimensional arrays.
//!
//! ```text
//! "SARB1\n" | u64 LE header length | JSON header | payloads
//! ```
//!
//! The header is `{"arrays":[{"name","dtype","shape","byte_offset"}, …]}`
//! with `dtype` one of `f64`, `c128`, `i64`. Offsets count from the first
//! payload byte. Payloads are little-endian and packed in header order;
//! `c128` stores interleaved `(re, im)` pairs.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"SARB1\n";
const PREFIX: u64 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C128,
    I64,
}

impl Dtype {
    pub fn item_size(self) -> u64 {
        match self {
            Dtype::F64 | Dtype::I64 => 8,
            Dtype::C128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(ArrayD<f64>),
    C128(ArrayD<Complex64>),
    I64(ArrayD<i64>),
}

impl ArrayData {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::F64(_) => Dtype::F64,
            ArrayData::C128(_) => Dtype::C128,
            ArrayData::I64(_) => Dtype::I64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            ArrayData::F64(a) => a.shape(),
            ArrayData::C128(a) => a.shape(),
            ArrayData::I64(a) => a.shape(),
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            ArrayData::F64(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            ArrayData::I64(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            ArrayData::C128(a) => a.iter().for_each(|v| {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }),
        }
    }

    pub fn as_f64(&self) -> Option<&ArrayD<f64>> {
        match self {
            ArrayData::F64(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_c128(&self) -> Option<&ArrayD<Complex64>> {
        match self {
            ArrayData::C128(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&ArrayD<i64>> {
        match self {
            ArrayData::I64(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub data: ArrayData,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, data: ArrayData) -> Self {
        NamedArray {
            name: name.into(),
            data,
        }
    }
}

/// One header entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub byte_offset: u64,
}

impl Entry {
    fn byte_len(&self) -> Option<u64> {
        self.shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))?
            .checked_mul(self.dtype.item_size())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    arrays: Vec<Entry>,
}

/// Serializes arrays into container bytes.
pub fn to_bytes(arrays: &[NamedArray]) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(arrays.len());
    let mut offset = 0u64;
    for (i, a) in arrays.iter().enumerate() {
        if arrays[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::invalid("arrays", format!("duplicate array name `{}`", a.name)));
        }
        let e = Entry {
            name: a.name.clone(),
            dtype: a.data.dtype(),
            shape: a.data.shape().to_vec(),
            byte_offset: offset,
        };
        offset += e.byte_len().ok_or_else(|| Error::Shape(format!("`{}` is too large", a.name)))?;
        entries.push(e);
    }
    let header = serde_json::to_vec(&Header { arrays: entries })?;
    let mut out = Vec::with_capacity(PREFIX as usize + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for a in arrays {
        a.data.write_le(&mut out);
    }
    Ok(out)
}

pub fn write_sarb(path: &Path, arrays: &[NamedArray]) -> Result<()> {
    let bytes = to_bytes(arrays)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Validates the prefix and header. Returns entries and the payload start.
fn parse_header(prefix: &[u8], header: impl FnOnce(u64) -> Result<Vec<u8>>, total: u64) -> Result<(Vec<Entry>, u64)> {
    if prefix.len() < MAGIC.len() || &prefix[..MAGIC.len()] != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("bad magic: expected bytes {:?}", std::str::from_utf8(MAGIC).unwrap()),
        });
    }
    if prefix.len() < PREFIX as usize {
        return Err(Error::Parse {
            offset: MAGIC.len() as u64,
            msg: "truncated header length".into(),
        });
    }
    let hlen = u64::from_le_bytes(prefix[6..14].try_into().expect("8 bytes"));
    let payload_start = PREFIX
        .checked_add(hlen)
        .filter(|&e| e <= total)
        .ok_or_else(|| Error::Parse {
            offset: PREFIX,
            msg: format!("header length {hlen} exceeds file size {total}"),
        })?;
    let raw = header(hlen)?;
    let h: Header = serde_json::from_slice(&raw).map_err(|e| Error::Parse {
        offset: PREFIX,
        msg: format!("malformed header JSON: {e}"),
    })?;
    let payload_len = total - payload_start;
    let mut expected = 0u64;
    for (i, e) in h.arrays.iter().enumerate() {
        if h.arrays[..i].iter().any(|f| f.name == e.name) {
            return Err(Error::Parse {
                offset: PREFIX,
                msg: format!("duplicate array name `{}`", e.name),
            });
        }
        let len = e.byte_len().ok_or_else(|| Error::Parse {
            offset: PREFIX,
            msg: format!("`{}` shape overflows", e.name),
        })?;
        if e.byte_offset != expected {
            return Err(Error::Parse {
                offset: payload_start + e.byte_offset,
                msg: format!(
                    "`{}` starts at payload byte {}, expected {expected} (overlap or gap)",
                    e.name, e.byte_offset
                ),
            });
        }
        expected += len;
        if expected > payload_len {
            return Err(Error::Parse {
                offset: total,
                msg: format!(
                    "truncated payload: `{}` {:?} needs bytes up to {}, file ends at {total}",
                    e.name,
                    e.shape,
                    payload_start + expected
                ),
            });
        }
    }
    if expected != payload_len {
        return Err(Error::Parse {
            offset: payload_start + expected,
            msg: format!("{} trailing bytes after the last array", payload_len - expected),
        });
    }
    Ok((h.arrays, payload_start))
}

fn decode(e: &Entry, bytes: &[u8]) -> Result<ArrayData> {
    let shape = IxDyn(&e.shape);
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let shape_err = |err: ndarray::ShapeError| Error::Shape(format!("`{}`: {err}", e.name));
    Ok(match e.dtype {
        Dtype::F64 => ArrayData::F64(ArrayD::from_shape_vec(shape, bytes.chunks_exact(8).map(f).collect()).map_err(shape_err)?),
        Dtype::I64 => ArrayData::I64(
            ArrayD::from_shape_vec(
                shape,
                bytes
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            )
            .map_err(shape_err)?,
        ),
        Dtype::C128 => ArrayData::C128(
            ArrayD::from_shape_vec(
                shape,
                bytes
                    .chunks_exact(16)
                    .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
                    .collect(),
            )
            .map_err(shape_err)?,
        ),
    })
}

/// Parses container bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<Vec<NamedArray>> {
    let total = bytes.len() as u64;
    let (entries, start) = parse_header(
        &bytes[..bytes.len().min(PREFIX as usize)],
        |hlen| Ok(bytes[PREFIX as usize..(PREFIX + hlen) as usize].to_vec()),
        total,
    )?;
    entries
        .iter()
        .map(|e| {
            let a = (start + e.byte_offset) as usize;
            let b = a + e.byte_len().expect("checked") as usize;
            Ok(NamedArray::new(e.name.clone(), decode(e, &bytes[a..b])?))
        })
        .collect()
}

pub fn read_sarb(path: &Path) -> Result<Vec<NamedArray>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Reads the index eagerly and array payloads on demand.
#[derive(Debug)]
pub struct SarbReader {
    path: PathBuf,
    file: File,
    entries: Vec<Entry>,
    payload_start: u64,
}

impl SarbReader {
    pub fn open(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let mut file = File::open(path).map_err(io)?;
        let total = file.metadata().map_err(io)?.len();
        let mut prefix = Vec::with_capacity(PREFIX as usize);
        (&mut file).take(PREFIX).read_to_end(&mut prefix).map_err(io)?;
        let (entries, payload_start) = parse_header(
            &prefix,
            |hlen| {
                let mut h = vec![0u8; hlen as usize];
                file.read_exact(&mut h).map_err(io)?;
                Ok(h)
            },
            total,
        )?;
        Ok(SarbReader {
            path: path.to_path_buf(),
            file,
            entries,
            payload_start,
        })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn read(&mut self, name: &str) -> Result<ArrayData> {
        let e = self
            .entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::invalid("name", format!("no array `{name}` in {}", self.path.display())))?
            .clone();
        let mut buf = vec![0u8; e.byte_len().expect("checked") as usize];
        let io = |err| Error::io(&self.path, err);
        self.file
            .seek(SeekFrom::Start(self.payload_start + e.byte_offset))
            .map_err(io)?;
        self.file.read_exact(&mut buf).map_err(io)?;
        decode(&e, &buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<NamedArray> {
        vec![
            NamedArray::new("a", ArrayData::F64(ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![1.0, -0.0, f64::NAN, 1e-300]).unwrap())),
            NamedArray::new("empty", ArrayData::I64(ArrayD::zeros(IxDyn(&[0, 3])))),
            NamedArray::new(
                "z",
                ArrayData::C128(ArrayD::from_shape_fn(IxDyn(&[2, 1, 3]), |i| Complex64::new(i[0] as f64, -(i[2] as f64)))),
            ),
        ]
    }

    #[test]
    fn layout_is_as_documented() {
        let b = to_bytes(&sample()).unwrap();
        assert_eq!(&b[..6], MAGIC);
        let hlen = u64::from_le_bytes(b[6..14].try_into().unwrap()) as usize;
        let h: serde_json::Value = serde_json::from_slice(&b[14..14 + hlen]).unwrap();
        assert_eq!(h["arrays"][2]["byte_offset"], 32);
        assert_eq!(h["arrays"][2]["dtype"], "c128");
        assert_eq!(b.len(), 14 + hlen + 32 + 6 * 16);
    }

    #[test]
    fn empty_list_and_duplicates() {
        let b = to_bytes(&[]).unwrap();
        assert!(from_bytes(&b).unwrap().is_empty());
        let mut s = sample();
        s[1].name = "a".into();
        assert!(to_bytes(&s).is_err());
    }

    #[test]
    fn lazy_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.sarb");
        write_sarb(&p, &sample()).unwrap();
        let mut r = SarbReader::open(&p).unwrap();
        assert_eq!(r.entries().len(), 3);
        assert_eq!(r.read("z").unwrap(), sample()[2].data);
        assert!(r.read("nope").is_err());
    }
}
