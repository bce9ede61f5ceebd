use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Model, NetworkConfig};
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"FQFM1";
pub const DTYPE_F32: u8 = 1;
pub const DTYPE_F64: u8 = 2;
pub const DTYPE_U8: u8 = 3;
/// Entries under this prefix carry metadata rather than parameters.
pub const META_PREFIX: &str = "meta.";
pub const META_CONFIG: &str = "meta.config";

#[derive(Clone, Debug, PartialEq)]
pub enum EntryData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    Bytes(Vec<u8>),
}

impl EntryData {
    fn tag(&self) -> u8 {
        match self {
            EntryData::F32(_) => DTYPE_F32,
            EntryData::F64(_) => DTYPE_F64,
            EntryData::Bytes(_) => DTYPE_U8,
        }
    }

    fn len(&self) -> usize {
        match self {
            EntryData::F32(v) => v.len(),
            EntryData::F64(v) => v.len(),
            EntryData::Bytes(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: EntryData,
}

/// In-memory form of the `FQFM1` container.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<Entry>,
}

fn fail(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        format: "checkpoint",
        offset: offset as u64,
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(fail(
                self.bytes.len(),
                format!("truncated while reading {what}"),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

impl Checkpoint {
    pub fn push_tensor<T: Scalar>(&mut self, name: &str, t: &Tensor<T>) {
        let data = match T::DTYPE_TAG {
            DTYPE_F32 => EntryData::F32(t.data().iter().map(|v| v.as_f64() as f32).collect()),
            _ => EntryData::F64(t.data().iter().map(|v| v.as_f64()).collect()),
        };
        self.entries.push(Entry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data,
        });
    }

    pub fn push_bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.entries.push(Entry {
            name: name.to_string(),
            shape: vec![bytes.len()],
            data: EntryData::Bytes(bytes),
        });
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn from_store<T: Scalar>(store: &ParameterStore<T>) -> Self {
        let mut ck = Checkpoint::default();
        for (name, t) in store.iter() {
            ck.push_tensor(name, t);
        }
        ck
    }

    /// Parameter entries as a store of `T`; entries of another dtype are rejected.
    pub fn to_store<T: Scalar>(&self) -> Result<ParameterStore<T>> {
        let mut store = ParameterStore::new();
        for e in self
            .entries
            .iter()
            .filter(|e| !e.name.starts_with(META_PREFIX))
        {
            let data: Vec<T> = match (&e.data, T::DTYPE_TAG) {
                (EntryData::F32(v), DTYPE_F32) => {
                    v.iter().map(|&x| T::from_f64(f64::from(x))).collect()
                }
                (EntryData::F64(v), DTYPE_F64) => v.iter().map(|&x| T::from_f64(x)).collect(),
                (d, _) => {
                    return Err(Error::arg(
                        "load_checkpoint",
                        format!(
                            "entry `{}` has dtype tag {}, expected {} ({})",
                            e.name,
                            d.tag(),
                            T::DTYPE_TAG,
                            T::NAME
                        ),
                    ))
                }
            };
            store.insert(e.name.clone(), Tensor::from_vec(&e.shape, data)?)?;
        }
        Ok(store)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = MAGIC.to_vec();
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::arg("checkpoint", "too many entries"))?;
        out.extend(count.to_le_bytes());
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::arg(
                    "checkpoint",
                    format!("duplicate entry `{}`", e.name),
                ));
            }
            if e.shape.iter().product::<usize>() != e.data.len() || e.shape.len() > u8::MAX as usize
            {
                return Err(Error::invalid_shape(
                    "checkpoint",
                    &e.shape,
                    "extents disagree with payload",
                ));
            }
            out.extend((e.name.len() as u32).to_le_bytes());
            out.extend(e.name.as_bytes());
            out.push(e.data.tag());
            out.push(e.shape.len() as u8);
            for &d in &e.shape {
                out.extend((d as u64).to_le_bytes());
            }
            match &e.data {
                EntryData::F32(v) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
                EntryData::F64(v) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
                EntryData::Bytes(v) => out.extend(v),
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic").ok() != Some(&MAGIC[..]) {
            return Err(fail(0, "bad magic"));
        }
        let count = r.u32("entry count")?;
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| fail(at + 4, "entry name is not UTF-8"))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(fail(at, format!("duplicate entry `{name}`")));
            }
            let tag_at = r.pos;
            let tag = r.u8("dtype")?;
            let width = match tag {
                DTYPE_F32 => 4,
                DTYPE_F64 => 8,
                DTYPE_U8 => 1,
                t => return Err(fail(tag_at, format!("unknown dtype tag {t}"))),
            };
            let rank = r.u8("rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let d = r.u64("extent")?;
                shape.push(usize::try_from(d).map_err(|_| fail(r.pos - 8, "extent too large"))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(width))
                .ok_or_else(|| fail(r.pos, "payload length overflows"))?;
            let payload = r.take(n, &format!("payload of `{name}`"))?;
            let data = match tag {
                DTYPE_F32 => EntryData::F32(payload.chunks_exact(4).map(f32::read_le).collect()),
                DTYPE_F64 => EntryData::F64(payload.chunks_exact(8).map(f64::read_le).collect()),
                _ => EntryData::Bytes(payload.to_vec()),
            };
            entries.push(Entry { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(fail(r.pos, "trailing bytes after last entry"));
        }
        Ok(Checkpoint { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

pub fn save_checkpoint<T: Scalar>(store: &ParameterStore<T>, path: &Path) -> Result<()> {
    Checkpoint::from_store(store).save(path)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ParameterStore<T>> {
    Checkpoint::load(path)?.to_store()
}

/// `key=value` lines, one per config field.
pub fn config_text(cfg: &NetworkConfig) -> String {
    cfg.to_pairs()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

pub fn parse_config_text(text: &str) -> Result<NetworkConfig> {
    let mut cfg = NetworkConfig::default();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, "expected key=value"))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parameters plus the network config under `meta.config`.
pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let mut ck = Checkpoint::from_store(&model.params);
    ck.push_bytes(META_CONFIG, config_text(&model.cfg).into_bytes());
    ck.save(path)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let ck = Checkpoint::load(path)?;
    let meta = ck.get(META_CONFIG).ok_or_else(|| {
        Error::arg(
            "load_model",
            format!("checkpoint has no `{META_CONFIG}` entry"),
        )
    })?;
    let text = match &meta.data {
        EntryData::Bytes(b) => {
            std::str::from_utf8(b).map_err(|_| Error::arg("load_model", "config is not UTF-8"))?
        }
        _ => return Err(Error::arg("load_model", "config entry must hold bytes")),
    };
    Model::from_parts(parse_config_text(text)?, ck.to_store()?)
}
