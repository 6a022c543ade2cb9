//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field          | type      |
//! |----------------|-----------|
//! | magic          | `b"PCEBMMDL"` |
//! | format_version | u32       |
//! | kind           | u32 (1 = pwm, 2 = mlp) |
//! | d, L, A, H     | 4 x u64 (L = A = 0 for raw-input MLPs, H = 0 for PWMs) |
//! | param_count    | u64       |
//! | params         | param_count x f64 |
//!
//! Parameter order: PWM `W` row-major (L x A); MLP `W1` row-major (H x d), `w2` (H),
//! `b1` (H), `b2`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::domain::Shape;
use crate::error::{Error, Result};

use super::{EnergyModel, MlpEnergy, PwmEnergy, TrainableModel};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PCEBMMDL";
const KIND_PWM: u32 = 1;
const KIND_MLP: u32 = 2;

pub fn write_model(model: &TrainableModel) -> Vec<u8> {
    let shape = model.shape();
    let (len, alphabet) = match shape {
        Shape::Sequence { len, alphabet } => (len, alphabet),
        Shape::Raw { .. } => (0, 0),
    };
    let (kind, hidden) = match model {
        TrainableModel::Pwm(_) => (KIND_PWM, 0),
        TrainableModel::Mlp(m) => (KIND_MLP, m.hidden()),
    };
    let params = model.params();
    let mut out = Vec::with_capacity(8 + 8 + 40 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    for v in [shape.dim(), len, alphabet, hidden, params.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file: missing {what} at byte offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in memory")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format(format!("{what} count overflows")))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_model(bytes: &[u8]) -> Result<TrainableModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32("format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = r.u32("kind")?;
    let d = r.u64("d")?;
    let len = r.u64("L")?;
    let alphabet = r.u64("A")?;
    let hidden = r.u64("H")?;
    let count = r.u64("param_count")?;

    let shape = if len == 0 && alphabet == 0 {
        Shape::Raw { dim: d }
    } else {
        Shape::Sequence { len, alphabet }
    };
    if shape.dim() != d {
        return Err(Error::Format(format!(
            "header inconsistent: d = {d} but L x A = {}",
            shape.dim()
        )));
    }
    let expected = match kind {
        KIND_PWM => d,
        KIND_MLP => hidden
            .checked_mul(d)
            .and_then(|v| v.checked_add(2 * hidden + 1))
            .ok_or_else(|| Error::Format("parameter count overflows".into()))?,
        other => return Err(Error::Format(format!("unknown model kind {other}"))),
    };
    if count != expected {
        return Err(Error::Format(format!(
            "param_count {count} does not match header (expected {expected})"
        )));
    }
    let params = r.f64s(count, "parameters")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    let invalid = |e: Error| Error::Format(format!("invalid parameters: {e}"));
    let model = match kind {
        KIND_PWM => {
            if let Shape::Raw { .. } = shape {
                return Err(Error::Format("PWM model without sequence shape".into()));
            }
            TrainableModel::Pwm(PwmEnergy::new(len, alphabet, params).map_err(invalid)?)
        }
        _ => {
            let (w1, rest) = params.split_at(hidden * d);
            let (w2, rest) = rest.split_at(hidden);
            let (b1, b2) = rest.split_at(hidden);
            TrainableModel::Mlp(
                MlpEnergy::new(shape, w1.to_vec(), b1.to_vec(), w2.to_vec(), b2[0])
                    .map_err(invalid)?,
            )
        }
    };
    Ok(model)
}

pub fn save_model(model: &TrainableModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_model(model);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainableModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pwm(rng: &mut ChaCha8Rng) -> TrainableModel {
        let w = (0..15).map(|_| rng.random_range(-3.0..3.0)).collect();
        TrainableModel::Pwm(PwmEnergy::new(5, 3, w).unwrap())
    }

    #[test]
    fn pwm_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = pwm(&mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        for _ in 0..100 {
            let x: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(loaded.energy(&x).to_bits(), model.energy(&x).to_bits());
        }
    }

    #[test]
    fn mlp_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for shape in [Shape::Raw { dim: 4 }, Shape::Sequence { len: 2, alphabet: 3 }] {
            let mut model =
                TrainableModel::Mlp(MlpEnergy::random(shape, 5, 1.0, &mut rng).unwrap());
            let mut params = model.params();
            params.iter_mut().for_each(|p| *p += rng.random_range(-0.1..0.1));
            model.set_params(&params);
            let back = read_model(&write_model(&model)).unwrap();
            let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
            assert_eq!(bits(back.params()), bits(model.params()));
            assert_eq!(back.shape(), shape);
        }
    }

    #[test]
    fn truncated_file_is_format_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bytes = write_model(&pwm(&mut rng));
        for cut in [0, 5, 20, bytes.len() - 1] {
            assert!(matches!(read_model(&bytes[..cut]), Err(Error::Format(_))));
        }
    }

    #[test]
    fn version_mismatch_names_version() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut bytes = write_model(&pwm(&mut rng));
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        match read_model(&bytes) {
            Err(Error::Format(msg)) => assert!(msg.contains("version 7"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_and_bad_magic_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bytes = write_model(&pwm(&mut rng));
        bytes.push(0);
        assert!(read_model(&bytes).is_err());
        let mut bytes = write_model(&pwm(&mut rng));
        bytes[0] = b'X';
        assert!(read_model(&bytes).is_err());
    }
}
