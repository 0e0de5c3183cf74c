//! Binary model file.
//!
//! All integers are `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! magic      4 bytes  "SVMF"
//! version    u32      1
//! n_sizes    u32      L
//! sizes      L x u32  [n_in, hidden.., 1]
//! shift      n_in x f64
//! scale      n_in x f64
//! n_params   u32
//! params     n_params x f64   per layer: weights row-major (out x in), then biases
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::mlp::{Mlp, MlpError};

pub const MAGIC: &[u8; 4] = b"SVMF";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (bad magic)")]
    Magic,
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("{0} trailing bytes after model")]
    Trailing(usize),
    #[error(transparent)]
    Shape(#[from] MlpError),
}

pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for s in net.sizes() {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for v in net.shift().iter().chain(net.scale()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for v in net.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelFileError> {
        let end = self.pos.checked_add(n).ok_or(ModelFileError::Truncated)?;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or(ModelFileError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelFileError> {
        let bytes = self.take(n.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Mlp, ModelFileError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ModelFileError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelFileError::Version(version));
    }
    let n_sizes = r.u32()? as usize;
    if n_sizes > 64 {
        return Err(MlpError::Shape(vec![]).into());
    }
    let sizes = (0..n_sizes)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let n_in = *sizes.first().ok_or(MlpError::Shape(vec![]))?;
    let shift = r.f64s(n_in)?;
    let scale = r.f64s(n_in)?;
    let n_params = r.u32()? as usize;
    let params = r.f64s(n_params)?;
    if r.pos != buf.len() {
        return Err(ModelFileError::Trailing(buf.len() - r.pos));
    }
    Ok(Mlp::from_parts(sizes, params, shift, scale)?)
}

pub fn save(net: &Mlp, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, to_bytes(net)).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Mlp, ModelFileError> {
    let buf = fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut net = Mlp::new(&[3, 4, 2, 1], 9).unwrap();
        net.fit_normalization(
            [vec![1.0, 2.0, 3.0], vec![2.0, 0.0, 3.5]]
                .iter()
                .map(|v| v.as_slice()),
        );
        let bytes = to_bytes(&net);
        assert_eq!(&bytes[..4], b"SVMF");
        assert_eq!(
            bytes.len(),
            4 + 4 + 4 + 4 * 4 + 2 * 3 * 8 + 4 + net.params().len() * 8
        );
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        save(&net, &p).unwrap();
        assert_eq!(load(&p).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let net = Mlp::new(&[2, 3, 1], 1).unwrap();
        let bytes = to_bytes(&net);
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 1]),
            Err(ModelFileError::Truncated)
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            from_bytes(&extra),
            Err(ModelFileError::Trailing(1))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(ModelFileError::Magic)));
        let mut ver = bytes;
        ver[4] = 2;
        assert!(matches!(from_bytes(&ver), Err(ModelFileError::Version(2))));
    }
}
