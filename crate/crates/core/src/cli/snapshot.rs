//! Binary field snapshots.
//!
//! Layout, all little-endian: magic `HPQ1`, version `u32`, then `N`, `M` and
//! `2k` as `u32`, `ε` as `f64`, then the `(re, im)` pairs of `û` followed by
//! those of `û_t`, each in row-major mode order over `|n|_∞ ≤ N`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SnapshotError};
use crate::spectral::{PairField, SpectralField, TorusSpec};

pub const MAGIC: &[u8; 4] = b"HPQ1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 8;
/// Guards the payload size computation against corrupt headers.
const MAX_CUTOFF: usize = 1 << 12;

pub fn encode(spec: &TorusSpec, field: &PairField) -> Result<Vec<u8>> {
    if field.n_max() != spec.n_max {
        return Err(SnapshotError::InvalidHeader(format!(
            "field cutoff {} differs from spec cutoff {}",
            field.n_max(),
            spec.n_max
        ))
        .into());
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 32 * spec.num_modes());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, spec.n_max as u32, spec.grid as u32, spec.two_k as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&spec.epsilon.to_le_bytes());
    for z in field.u.coeffs().iter().chain(field.ut.coeffs()) {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<(TorusSpec, PairField)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(SnapshotError::BadMagic { found: bytes[..bytes.len().min(4)].to_vec() }.into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated { expected: HEADER_LEN, found: bytes.len() }.into());
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion { found: version, expected: VERSION }.into());
    }
    let (n_max, grid, two_k) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize);
    let epsilon = f64_at(bytes, 20);
    if n_max > MAX_CUTOFF {
        return Err(SnapshotError::InvalidHeader(format!("cutoff {n_max} exceeds {MAX_CUTOFF}")).into());
    }
    let spec = TorusSpec::new(n_max, grid, epsilon, two_k).map_err(|e| SnapshotError::InvalidHeader(e.to_string()))?;
    let count = spec.num_modes();
    let expected = HEADER_LEN + 2 * count * 16;
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated { expected, found: bytes.len() }.into());
    }
    if bytes.len() > expected {
        return Err(SnapshotError::TrailingBytes { extra: bytes.len() - expected }.into());
    }
    let read = |offset: usize| -> Vec<Complex64> {
        (0..count)
            .map(|i| {
                let at = offset + 16 * i;
                Complex64::new(f64_at(bytes, at), f64_at(bytes, at + 8))
            })
            .collect()
    };
    let u = SpectralField::from_coeffs(n_max, read(HEADER_LEN))?;
    let ut = SpectralField::from_coeffs(n_max, read(HEADER_LEN + 16 * count))?;
    u.check_hermitian()?;
    ut.check_hermitian()?;
    Ok((spec, PairField::new(u, ut)?))
}

pub fn write(path: &Path, spec: &TorusSpec, field: &PairField) -> Result<()> {
    fs::write(path, encode(spec, field)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(TorusSpec, PairField)> {
    decode(&fs::read(path)?)
}
