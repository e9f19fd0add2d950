use std::fs;
use std::path::Path;

use super::{NetConfig, NetworkParams};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// First bytes of every checkpoint file.
pub const CHECKPOINT_MAGIC: &[u8] = b"3PU-CKPT-1\n";

/// Parameters together with the last completed training stage.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub stage: usize,
}

// Layout: magic, `key = value` header lines closed by `end`, a u32 tensor
// count, then per tensor: u32 path length, path, u32 rank, u64 dims, and
// little-endian f64 values.

pub fn save_checkpoint(path: &Path, params: &NetworkParams, stage: usize) -> Result<()> {
    let mut buf = CHECKPOINT_MAGIC.to_vec();
    let mut header = String::new();
    for (k, v) in params.config().to_kv() {
        header.push_str(&format!("{k} = {v}\n"));
    }
    let frozen: Vec<String> = (0..params.units())
        .filter(|&u| params.is_frozen(u))
        .map(|u| (u + 1).to_string())
        .collect();
    header.push_str(&format!(
        "frozen = {}\nstage = {stage}\nend\n",
        frozen.join(",")
    ));
    buf.extend(header.as_bytes());
    buf.extend((params.tensors().len() as u32).to_le_bytes());
    for (name, t) in params.paths().iter().zip(params.tensors()) {
        buf.extend((name.len() as u32).to_le_bytes());
        buf.extend(name.as_bytes());
        buf.extend((t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend((d as u64).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend(v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let len = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("unterminated header".into()))?;
        let line = std::str::from_utf8(self.take(len + 1)?)
            .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        Ok(line.trim_end())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::Checkpoint(format!("{}: {m}", path.display()));
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(bad("not a checkpoint file".into()));
    }
    let mut r = Reader {
        bytes: &bytes,
        pos: CHECKPOINT_MAGIC.len(),
    };
    let mut config = NetConfig::default();
    let mut stage = None;
    let mut frozen = Vec::new();
    loop {
        let line = r.line()?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "stage" => stage = Some(v.parse().map_err(|_| bad(format!("stage {v:?}")))?),
            "frozen" => {
                for u in v.split(',').filter(|s| !s.is_empty()) {
                    let u: usize = u.parse().map_err(|_| bad(format!("frozen unit {u:?}")))?;
                    frozen.push(u);
                }
            }
            _ => config.set(k, v).map_err(|e| bad(e.to_string()))?,
        }
    }
    let stage = stage.ok_or_else(|| bad("missing stage".into()))?;
    let mut params = NetworkParams::zeroed(&config).map_err(|e| bad(e.to_string()))?;
    for u in frozen {
        if u == 0 || u > params.units() {
            return Err(bad(format!("frozen unit {u} out of range")));
        }
        params.set_frozen(u - 1, true);
    }
    let count = r.u32()?;
    if count != params.tensors().len() {
        return Err(bad(format!(
            "{count} tensors stored, layout has {}",
            params.tensors().len()
        )));
    }
    for i in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("bad tensor name".into()))?;
        if name != params.paths()[i] {
            return Err(bad(format!("expected {}, found {name}", params.paths()[i])));
        }
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let data = r
            .take(
                numel
                    .checked_mul(8)
                    .ok_or_else(|| bad("tensor too large".into()))?,
            )?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data)?;
        params.set_tensor(i, t).map_err(|e| bad(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes".into()));
    }
    Ok(Checkpoint { params, stage })
}
