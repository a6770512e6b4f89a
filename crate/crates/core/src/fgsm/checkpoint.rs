use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::params::{Dims, FgsmParams, Head};
use crate::{Error, Result, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CLEVFGSM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Header (magic, version, d, p, q, n_classes) followed by every parameter
/// block as little-endian f64 in declaration order.
pub fn write_checkpoint<T: Scalar, W: Write>(params: &FgsmParams<T>, mut out: W) -> Result<()> {
    let dims = params.dims();
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    for v in [dims.input, dims.proj, dims.hidden, dims.n_outputs()] {
        out.write_u32::<LittleEndian>(v as u32)?;
    }
    for &x in params.as_slice() {
        out.write_f64::<LittleEndian>(x.to_f64_lossless())?;
    }
    Ok(())
}

fn header_field<R: Read>(input: &mut R, field: &'static str) -> Result<u32> {
    input.read_u32::<LittleEndian>().map_err(|e| Error::Format {
        field,
        message: format!("truncated ({e})"),
    })
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<FgsmParams<T>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| Error::Format {
        field: "magic",
        message: "truncated".into(),
    })?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            field: "magic",
            message: "not a matching-head checkpoint".into(),
        });
    }
    let version = header_field(&mut input, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            field: "version",
            message: format!("unsupported version {version}"),
        });
    }
    let d = header_field(&mut input, "d")? as usize;
    let p = header_field(&mut input, "p")? as usize;
    let q = header_field(&mut input, "q")? as usize;
    let head = Head::from_outputs(header_field(&mut input, "n_classes")? as usize)?;
    if d == 0 || p == 0 || q == 0 {
        return Err(Error::Format {
            field: "dims",
            message: "layer sizes must be positive".into(),
        });
    }
    let dims = Dims::new(d, p, q, head);
    let mut raw = vec![0f64; dims.n_params()];
    input.read_f64_into::<LittleEndian>(&mut raw).map_err(|e| Error::Format {
        field: "parameters",
        message: format!("truncated ({e})"),
    })?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format {
            field: "parameters",
            message: "trailing bytes".into(),
        });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format {
            field: "parameters",
            message: "non-finite value".into(),
        });
    }
    FgsmParams::from_vec(dims, raw.into_iter().map(T::from_f64_lossy).collect())
}

pub fn save_checkpoint<T: Scalar>(params: &FgsmParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_checkpoint(params, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<FgsmParams<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
