//! Binary checkpoint format.
//!
//! ```text
//! "MBRT"                      magic
//! u32 LE                      format version (1)
//! u32 LE + UTF-8              config text, key=value lines
//! u32 LE                      tensor count
//! per tensor, sorted by name:
//!   u32 LE + UTF-8            name
//!   u32 LE                    rank
//!   u64 LE × rank             dims
//!   f32 LE × product(dims)    row-major payload
//! ```
//!
//! The config text carries the encoder config, then `vocab_fingerprint=` and
//! `meta.<key>=` lines when present.

use std::collections::BTreeMap;
use std::io::{ErrorKind, Read, Write};

use super::config::{parse_pairs, EncoderConfig};
use super::params::encoder_layout;
use super::store::{WeightStore, HEAD_PREFIX};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MBRT";
pub const FORMAT_VERSION: u32 = 1;

const MAX_NAME_BYTES: u32 = 4096;
const MAX_HEAD_ELEMENTS: u64 = 1 << 28;

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn header_text(store: &WeightStore) -> String {
    let mut text = store.config.to_text();
    if let Some(fp) = &store.vocab_fingerprint {
        text.push_str(&format!("vocab_fingerprint={fp}\n"));
    }
    for (k, v) in &store.metadata {
        text.push_str(&format!(
            "meta.{}={}\n",
            escape(k).replace('=', "\\="),
            escape(v)
        ));
    }
    text
}

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Counting<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes)?;
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Serialize `store`; returns the number of bytes written.
pub fn save_checkpoint<W: Write>(store: &WeightStore, sink: W) -> Result<u64> {
    store.validate()?;
    let mut out = Counting {
        inner: sink,
        written: 0,
    };
    out.put(MAGIC)?;
    out.put(&FORMAT_VERSION.to_le_bytes())?;
    let text = header_text(store);
    out.put(&(text.len() as u32).to_le_bytes())?;
    out.put(text.as_bytes())?;
    out.put(&(store.tensors.len() as u32).to_le_bytes())?;
    let mut buf = Vec::new();
    for (name, tensor) in &store.tensors {
        out.put(&(name.len() as u32).to_le_bytes())?;
        out.put(name.as_bytes())?;
        out.put(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            out.put(&(dim as u64).to_le_bytes())?;
        }
        buf.clear();
        buf.reserve(tensor.len() * 4);
        for v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.put(&buf)?;
    }
    out.inner.flush()?;
    Ok(out.written)
}

fn read_exact<R: Read>(src: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Corruption(format!("stream truncated in {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(src: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(src, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(src: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(src, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string<R: Read>(src: &mut R, len: usize, what: &str) -> Result<String> {
    let mut b = vec![0u8; len];
    read_exact(src, &mut b, what)?;
    String::from_utf8(b).map_err(|_| Error::Corruption(format!("{what} is not UTF-8")))
}

fn split_meta_key(rest: &str) -> Option<(String, String)> {
    let mut key = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => {
                if let Some((_, n)) = chars.next() {
                    key.push('\\');
                    key.push(n);
                }
            }
            '=' => return Some((unescape(&key), unescape(&rest[i + 1..]))),
            _ => key.push(c),
        }
    }
    None
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint<R: Read>(mut source: R) -> Result<WeightStore> {
    let src = &mut source;
    let mut magic = [0u8; 4];
    src.read_exact(&mut magic)
        .map_err(|_| Error::format("stream too short for checkpoint magic"))?;
    if &magic != MAGIC {
        return Err(Error::format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = read_u32(src, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let text_len = read_u32(src, "config length")?;
    if text_len > 1 << 20 {
        return Err(Error::Corruption(format!(
            "config length {text_len} is implausible"
        )));
    }
    let text = read_string(src, text_len as usize, "config text")?;

    let mut fingerprint = None;
    let mut metadata = BTreeMap::new();
    let mut config_lines = String::new();
    for line in text.lines() {
        if let Some(fp) = line.strip_prefix("vocab_fingerprint=") {
            fingerprint = Some(fp.to_string());
        } else if let Some(rest) = line.strip_prefix("meta.") {
            let (k, v) = split_meta_key(rest)
                .ok_or_else(|| Error::Corruption(format!("bad metadata line {line:?}")))?;
            metadata.insert(k, v);
        } else {
            config_lines.push_str(line);
            config_lines.push('\n');
        }
    }
    let config = EncoderConfig::from_pairs(&parse_pairs(&config_lines)?)
        .map_err(|e| Error::Corruption(format!("embedded config: {e}")))?;
    config
        .validate()
        .map_err(|e| Error::Corruption(format!("embedded config: {e}")))?;
    let layout: BTreeMap<String, Vec<usize>> = encoder_layout(&config).into_iter().collect();

    let count = read_u32(src, "tensor count")?;
    let mut tensors = BTreeMap::new();
    for i in 0..count {
        let what = format!("tensor #{i} name");
        let name_len = read_u32(src, &what)?;
        if name_len == 0 || name_len > MAX_NAME_BYTES {
            return Err(Error::Corruption(format!("{what} has length {name_len}")));
        }
        let name = read_string(src, name_len as usize, &what)?;
        let rank = read_u32(src, &format!("rank of {name}"))?;
        if rank == 0 || rank > 4 {
            return Err(Error::Corruption(format!("{name} has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(read_u64(src, &format!("dims of {name}"))?);
        }
        let elements = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
        match layout.get(&name) {
            Some(expected) => {
                if expected.iter().map(|&d| d as u64).ne(dims.iter().copied()) {
                    return Err(Error::Corruption(format!(
                        "{name} has shape {dims:?} but the config requires {expected:?}"
                    )));
                }
            }
            None if name.starts_with(HEAD_PREFIX) => {
                if !matches!(elements, Some(e) if e <= MAX_HEAD_ELEMENTS) {
                    return Err(Error::Corruption(format!(
                        "{name} has implausible shape {dims:?}"
                    )));
                }
            }
            None => {
                return Err(Error::Corruption(format!(
                    "{name} is not part of the configured encoder"
                )))
            }
        }
        let elements = elements.unwrap() as usize;
        let mut raw = vec![0u8; elements * 4];
        read_exact(src, &mut raw, &format!("payload of {name}"))?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let shape: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
        if tensors
            .insert(name.clone(), Tensor::from_vec(&shape, data)?)
            .is_some()
        {
            return Err(Error::Corruption(format!("{name} appears twice")));
        }
    }
    let mut trailing = [0u8; 1];
    if src.read(&mut trailing)? != 0 {
        return Err(Error::Corruption(
            "trailing bytes after the last tensor".into(),
        ));
    }
    let store = WeightStore {
        config,
        vocab_fingerprint: fingerprint,
        metadata,
        tensors,
    };
    store.validate()?;
    Ok(store)
}

pub fn save_checkpoint_path(store: &WeightStore, path: impl AsRef<std::path::Path>) -> Result<u64> {
    let file = std::fs::File::create(path)?;
    save_checkpoint(store, std::io::BufWriter::new(file))
}

pub fn load_checkpoint_path(path: impl AsRef<std::path::Path>) -> Result<WeightStore> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::config(format!(
            "cannot open checkpoint {}: {e}",
            path.as_ref().display()
        ))
    })?;
    load_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> WeightStore {
        let cfg = EncoderConfig {
            vocab_size: 12,
            hidden: 4,
            layers: 1,
            heads: 2,
            ff_dim: 8,
            max_positions: 8,
            seed: 3,
            ..Default::default()
        };
        let mut s = WeightStore::init(&cfg)
            .unwrap()
            .with_vocab_fingerprint("abc123");
        s.metadata
            .insert("ner.tags".into(), "O,B-Gene\nsecond=line".into());
        s.tensors.insert(
            "head.ner.weight".into(),
            Tensor::from_vec(
                &[4, 2],
                vec![0.5, -0.0, 1.0, f32::MIN_POSITIVE, 2.0, 3.0, 4.0, 5.0],
            )
            .unwrap(),
        );
        s
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let s = store();
        let mut buf = Vec::new();
        let n = save_checkpoint(&s, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let back = load_checkpoint(buf.as_slice()).unwrap();
        assert!(s.bit_eq(&back));
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        save_checkpoint(&store(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MBRT");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        let text_len = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let text = std::str::from_utf8(&buf[12..12 + text_len]).unwrap();
        assert!(text.starts_with("vocab_size=12\nhidden=4\n"));
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let mut buf = Vec::new();
        save_checkpoint(&store(), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            load_checkpoint(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn wrong_version_is_format_error() {
        let mut buf = Vec::new();
        save_checkpoint(&store(), &mut buf).unwrap();
        buf[4] = 9;
        assert!(matches!(
            load_checkpoint(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncation_names_tensor() {
        let mut buf = Vec::new();
        save_checkpoint(&store(), &mut buf).unwrap();
        buf.truncate(buf.len() - 10);
        match load_checkpoint(buf.as_slice()) {
            Err(Error::Corruption(msg)) => assert!(msg.contains("payload of"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut buf = Vec::new();
        save_checkpoint(&store(), &mut buf).unwrap();
        buf.push(0);
        assert!(matches!(
            load_checkpoint(buf.as_slice()),
            Err(Error::Corruption(_))
        ));
    }
}
