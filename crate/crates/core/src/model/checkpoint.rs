//! Binary checkpoint format.
//!
//! ```text
//! "CNDR"                      4 bytes
//! version = 1                 u32 LE
//! vocab_buckets               u32 LE
//! embed_dim                   u32 LE
//! proj_dim                    u32 LE
//! embedding                   vocab_buckets × embed_dim f64 LE, row-major
//! projection                  embed_dim × proj_dim f64 LE, row-major
//! logit_weight                embed_dim f64 LE
//! logit_bias                  f64 LE
//! ```

use std::fs;
use std::path::Path;

use super::{EncoderParams, ModelDims};
use crate::corpus::write_atomic;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CNDR";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(params: &EncoderParams, path: &Path) -> Result<()> {
    let bytes = to_bytes(params)?;
    write_atomic(path, |w| w.write_all(&bytes))
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint { field, message } => Error::Checkpoint {
            field,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    })
}

fn dim_u32(field: &'static str, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint {
        field,
        message: format!("{v} does not fit in 32 bits"),
    })
}

pub(crate) fn to_bytes(p: &EncoderParams) -> Result<Vec<u8>> {
    let d = p.dims();
    let mut out = Vec::with_capacity(20 + 8 * p.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32("vocab_buckets", d.vocab_buckets)?.to_le_bytes());
    out.extend_from_slice(&dim_u32("embed_dim", d.embed_dim)?.to_le_bytes());
    out.extend_from_slice(&dim_u32("proj_dim", d.proj_dim)?.to_le_bytes());
    for v in p
        .embedding
        .iter()
        .chain(&p.projection)
        .chain(&p.logit_weight)
        .chain(std::iter::once(&p.logit_bias))
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint {
                field,
                message: format!("truncated: need {n} bytes, {} remain", self.buf.len()),
            });
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, count: usize, field: &'static str) -> Result<Vec<f64>> {
        let bytes = count.checked_mul(8).ok_or_else(|| Error::Checkpoint {
            field,
            message: "size overflows".into(),
        })?;
        let raw = self.take(bytes, field)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<EncoderParams> {
    let mut r = Reader { buf: bytes };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint {
            field: "magic",
            message: format!(
                "expected \"{}\", found \"{}\"",
                CHECKPOINT_MAGIC.escape_ascii(),
                magic.escape_ascii()
            ),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint {
            field: "version",
            message: format!("unsupported version {version}"),
        });
    }

    let mut dim = |field: &'static str| -> Result<usize> {
        match r.u32(field)? {
            0 => Err(Error::Checkpoint {
                field,
                message: "must be positive".into(),
            }),
            v => Ok(v as usize),
        }
    };
    let dims = ModelDims {
        vocab_buckets: dim("vocab_buckets")?,
        embed_dim: dim("embed_dim")?,
        proj_dim: dim("proj_dim")?,
    };

    let embed_len = dims
        .vocab_buckets
        .checked_mul(dims.embed_dim)
        .ok_or_else(|| Error::Checkpoint {
            field: "embedding",
            message: "size overflows".into(),
        })?;
    let embedding = r.f64s(embed_len, "embedding")?;
    let projection = r.f64s(dims.embed_dim * dims.proj_dim, "projection")?;
    let logit_weight = r.f64s(dims.embed_dim, "logit_weight")?;
    let logit_bias = r.f64s(1, "logit_bias")?[0];
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint {
            field: "logit_bias",
            message: format!("{} unexpected trailing bytes", r.buf.len()),
        });
    }

    let mut p = EncoderParams::zeros(dims)?;
    p.embedding = embedding;
    p.projection = projection;
    p.logit_weight = logit_weight;
    p.logit_bias = logit_bias;
    Ok(p)
}
