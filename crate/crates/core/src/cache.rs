//! Binary cache for assembled kernels, keyed by (shell_cap, shift, potential
//! fingerprint). Versioned header followed by the lambda numerators and the
//! row-major K entries as little-endian doubles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::KernelData;
use crate::lattice::Momentum;

const MAGIC: &[u8; 4] = b"FGKC";
const VERSION: u32 = 1;

/// Cache key and payload read back from disk.
#[derive(Debug)]
pub struct CachedKernel {
    pub shell_cap: i64,
    pub shift: Momentum,
    pub fingerprint: u64,
    pub lambda_numerators: Vec<i64>,
    pub matrix: DMatrix<f64>,
}

pub fn write_kernel_cache(
    path: &Path,
    kd: &KernelData,
    shell_cap: i64,
    fingerprint: u64,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&shell_cap.to_le_bytes())?;
    for c in [kd.shift().x, kd.shift().y, kd.shift().z] {
        w.write_all(&c.to_le_bytes())?;
    }
    w.write_all(&fingerprint.to_le_bytes())?;
    let n = kd.lens().len() as u64;
    w.write_all(&n.to_le_bytes())?;
    for lam in kd.lens().lambdas() {
        w.write_all(&lam.numerator().to_le_bytes())?;
    }
    let m = kd.matrix();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernel_cache(path: &Path) -> Result<CachedKernel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::CacheFormat(format!("unsupported version {version}")));
    }
    let shell_cap = read_i64(&mut r)?;
    let shift = Momentum::new(read_i64(&mut r)?, read_i64(&mut r)?, read_i64(&mut r)?);
    let fingerprint = read_u64(&mut r)?;
    let n = read_u64(&mut r)? as usize;
    let mut lambda_numerators = Vec::with_capacity(n);
    for _ in 0..n {
        lambda_numerators.push(read_i64(&mut r)?);
    }
    let mut data = vec![0.0f64; n * n];
    for v in data.iter_mut() {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    Ok(CachedKernel {
        shell_cap,
        shift,
        fingerprint,
        lambda_numerators,
        matrix: DMatrix::from_row_slice(n, n, &data),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_i64(r: &mut impl Read) -> Result<i64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(i64::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
