//! Model checkpoints.
//!
//! Layout (little-endian): the magic `TRECMDL1`, the variant tag byte,
//! `u32` dims `K1 K2 K P Q R`, a 32-byte SHA-256 digest of the user and item
//! vocabularies, then the payload as row-major `f64` matrices:
//!
//! | variant | dims used | payload |
//! |---|---|---|
//! | dcf | K1, K2 | U, V, T, W |
//! | dcfa | K1, K2, K | U, V, T, W, M, N |
//! | mf | K1 | U, V |
//! | vbpr | K1, K | U, V, M |
//! | cp, cmtf | K1 | U, V, T |
//! | pitf | K1 | user-item, item-user, user-time, time-user, item-time, time-item |
//! | tucker | K1, K2, K (core depth) | core (`K1·K2·K` values, `(i·K2 + j)·K + k`), U, V, T |
//! | mp | | Q popularity values |
//! | rand | | `u64` seed |

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use tensorrec_core::data::{Dataset, Vocab};
use tensorrec_core::models::{Baseline, CpFactors, DcfaParams, Model, PitfFactors, TuckerCore, Variant};
use tensorrec_core::Matrix;

use crate::error::{create, open, Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"TRECMDL1";

/// SHA-256 over the user ids, a separator, then the item ids, each id
/// newline-terminated.
pub fn vocab_hash(users: &Vocab, items: &Vocab) -> [u8; 32] {
    let mut h = Sha256::new();
    for id in users.ids() {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    h.update(b"\0items\n");
    for id in items.ids() {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub users: usize,
    pub items: usize,
    pub intervals: usize,
    pub vocab_hash: [u8; 32],
}

impl Checkpoint {
    pub fn new(model: Model, dataset: &Dataset) -> Self {
        Checkpoint {
            model,
            users: dataset.num_users(),
            items: dataset.num_items(),
            intervals: dataset.num_intervals(),
            vocab_hash: vocab_hash(dataset.users(), dataset.items()),
        }
    }

    /// Fails with [`Error::VocabMismatch`] unless `dataset` has the
    /// vocabularies and grid the model was trained on.
    pub fn check(&self, dataset: &Dataset) -> Result<()> {
        let same = self.vocab_hash == vocab_hash(dataset.users(), dataset.items())
            && (self.users, self.items, self.intervals)
                == (dataset.num_users(), dataset.num_items(), dataset.num_intervals());
        if same {
            Ok(())
        } else {
            Err(Error::VocabMismatch)
        }
    }
}

fn matrices(model: &Model) -> Vec<&Matrix> {
    match model {
        Model::Factorized(p) => p.matrices(),
        Model::Baseline(b) => match b {
            Baseline::Rand { .. } | Baseline::Mp { .. } => Vec::new(),
            Baseline::Mf { u, v } => vec![u, v],
            Baseline::Vbpr { u, v, m } => vec![u, v, m],
            Baseline::Cp(f) | Baseline::Cmtf(f) => vec![&f.u, &f.v, &f.t],
            Baseline::Pitf(f) => f.matrices().to_vec(),
            Baseline::Tucker { u, v, t, .. } => vec![u, v, t],
        },
    }
}

fn latent_dims(model: &Model) -> [usize; 3] {
    match model {
        Model::Factorized(p) => [p.u.dim(), p.t.dim(), p.m.as_ref().map_or(0, Matrix::dim)],
        Model::Baseline(b) => match b {
            Baseline::Rand { .. } | Baseline::Mp { .. } => [0; 3],
            Baseline::Mf { u, .. } => [u.dim(), 0, 0],
            Baseline::Vbpr { u, m, .. } => [u.dim(), 0, m.dim()],
            Baseline::Cp(f) | Baseline::Cmtf(f) => [f.u.dim(), 0, 0],
            Baseline::Pitf(f) => [f.user_item.dim(), 0, 0],
            Baseline::Tucker { core, .. } => core.shape,
        },
    }
}

fn put_u32<W: Write>(w: &mut W, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| Error::Checkpoint(format!("dimension {x} exceeds u32")))?;
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let model = &ckpt.model;
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&[model.variant().tag()])?;
    let [k1, k2, k] = latent_dims(model);
    for x in [k1, k2, k, ckpt.users, ckpt.items, ckpt.intervals] {
        put_u32(&mut w, x)?;
    }
    w.write_all(&ckpt.vocab_hash)?;
    match model {
        Model::Baseline(Baseline::Rand { seed, .. }) => w.write_all(&seed.to_le_bytes())?,
        Model::Baseline(Baseline::Mp { popularity }) => put_f64s(&mut w, popularity)?,
        Model::Baseline(Baseline::Tucker { core, .. }) => put_f64s(&mut w, &core.values)?,
        _ => {}
    }
    for m in matrices(model) {
        put_f64s(&mut w, &m.to_row_major())?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::Checkpoint("truncated file".into()))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.bytes()?))).collect()
    }

    fn matrix(&mut self, dim: usize, count: usize) -> Result<Matrix> {
        let values = self.f64s(dim * count)?;
        Ok(Matrix::from_row_major(dim, count, &values))
    }
}

pub fn read_checkpoint<R: Read>(inner: R) -> Result<Checkpoint> {
    let mut r = Reader { inner };
    if &r.bytes::<8>()? != MODEL_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let tag = r.bytes::<1>()?[0];
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown variant tag {tag}")))?;
    let [k1, k2, k, p, q, rr] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?];
    let vocab_hash = r.bytes::<32>()?;
    let model = match variant {
        Variant::Rand => Model::Baseline(Baseline::Rand {
            seed: u64::from_le_bytes(r.bytes()?),
            items: q,
        }),
        Variant::Mp => Model::Baseline(Baseline::Mp { popularity: r.f64s(q)? }),
        Variant::Mf => Model::Baseline(Baseline::Mf {
            u: r.matrix(k1, p)?,
            v: r.matrix(k1, q)?,
        }),
        Variant::Vbpr => Model::Baseline(Baseline::Vbpr {
            u: r.matrix(k1, p)?,
            v: r.matrix(k1, q)?,
            m: r.matrix(k, p)?,
        }),
        Variant::Cp | Variant::Cmtf => {
            let f = CpFactors {
                u: r.matrix(k1, p)?,
                v: r.matrix(k1, q)?,
                t: r.matrix(k1, rr)?,
            };
            Model::Baseline(if variant == Variant::Cp { Baseline::Cp(f) } else { Baseline::Cmtf(f) })
        }
        Variant::Pitf => Model::Baseline(Baseline::Pitf(PitfFactors {
            user_item: r.matrix(k1, p)?,
            item_user: r.matrix(k1, q)?,
            user_time: r.matrix(k1, p)?,
            time_user: r.matrix(k1, rr)?,
            item_time: r.matrix(k1, q)?,
            time_item: r.matrix(k1, rr)?,
        })),
        Variant::Tucker => {
            let values = r.f64s(k1 * k2 * k)?;
            Model::Baseline(Baseline::Tucker {
                core: TuckerCore { shape: [k1, k2, k], values },
                u: r.matrix(k1, p)?,
                v: r.matrix(k2, q)?,
                t: r.matrix(k, rr)?,
            })
        }
        Variant::Dcf | Variant::Dcfa => {
            let (u, v, t, w) = (r.matrix(k1, p)?, r.matrix(k1, q)?, r.matrix(k2, rr)?, r.matrix(k2, q)?);
            let (m, n) = if variant == Variant::Dcfa {
                (Some(r.matrix(k, p)?), Some(r.matrix(k, rr)?))
            } else {
                (None, None)
            };
            Model::Factorized(DcfaParams { u, v, t, w, m, n })
        }
    };
    let mut tail = [0u8; 1];
    if r.inner.read(&mut tail)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        model,
        users: p,
        items: q,
        intervals: rr,
        vocab_hash,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(create(path)?), ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(open(path)?))
}
