//! File formats: T3B tensors, OMB sampling sets, PPM/PGM images, CSV grids
//! and JSON-lines solver traces.
//!
//! T3B is the only tensor persistence format: magic `T3B1`, three
//! little-endian u32 dimensions `(n1, n2, n3)`, then `n1*n2*n3`
//! little-endian f64 values with `i` fastest, then `j`, then `k` — exactly
//! the in-memory layout, so writes and reads are bit-exact.
//!
//! OMB is the binary companion for sampling sets: magic `OMB1`, the three
//! dimensions (u32), the generator seed (u64), the draw count `m` (u64) and
//! the ordered draw list as u32 triples (0-based). The CSV export lists
//! `i,j,k,multiplicity` with 1-based indices, sorted by index.

use anyhow::{bail, Context, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tcomp_core::solver::TraceRow;
use tcomp_core::{DenseTensor3, SamplingSet};

const T3B_MAGIC: &[u8; 4] = b"T3B1";
const OMB_MAGIC: &[u8; 4] = b"OMB1";

pub fn write_t3b(path: &Path, t: &DenseTensor3) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    w.write_all(T3B_MAGIC)?;
    let (n1, n2, n3) = t.dims();
    for d in [n1, n2, n3] {
        w.write_all(&u32::try_from(d).context("dimension exceeds u32")?.to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_t3b(path: &Path) -> Result<DenseTensor3> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("open {path:?}"))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != T3B_MAGIC {
        bail!("{path:?} is not a T3B tensor (bad magic)");
    }
    let mut dim = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut dim)?;
        *d = u32::from_le_bytes(dim) as usize;
    }
    let len = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .context("dimension overflow")?;
    let mut data = vec![0f64; len];
    let mut buf = [0u8; 8];
    for v in &mut data {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(DenseTensor3::from_vec((dims[0], dims[1], dims[2]), data)?)
}

pub fn write_omb(path: &Path, omega: &SamplingSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    w.write_all(OMB_MAGIC)?;
    let (n1, n2, n3) = omega.dims();
    for d in [n1, n2, n3] {
        w.write_all(&u32::try_from(d)?.to_le_bytes())?;
    }
    w.write_all(&omega.seed().to_le_bytes())?;
    w.write_all(&(omega.len() as u64).to_le_bytes())?;
    for &(i, j, k) in omega.draws() {
        w.write_all(&i.to_le_bytes())?;
        w.write_all(&j.to_le_bytes())?;
        w.write_all(&k.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_omb(path: &Path) -> Result<SamplingSet> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("open {path:?}"))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != OMB_MAGIC {
        bail!("{path:?} is not an OMB sampling set (bad magic)");
    }
    let mut b4 = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut b4)?;
        *d = u32::from_le_bytes(b4) as usize;
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let m = u64::from_le_bytes(b8) as usize;
    let mut draws = Vec::with_capacity(m);
    for _ in 0..m {
        let mut triple = [0u32; 3];
        for t in &mut triple {
            r.read_exact(&mut b4)?;
            *t = u32::from_le_bytes(b4);
        }
        draws.push((triple[0], triple[1], triple[2]));
    }
    Ok(SamplingSet::from_draws((dims[0], dims[1], dims[2]), draws, seed)?)
}

/// `i,j,k,multiplicity` with 1-based indices, sorted.
pub fn write_omega_csv(path: &Path, omega: &SamplingSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    writeln!(w, "i,j,k,multiplicity")?;
    for (&(i, j, k), &c) in omega.counts() {
        writeln!(w, "{},{},{},{}", i + 1, j + 1, k + 1, c)?;
    }
    Ok(())
}

/// Binary P6 PPM (8-bit) into an `n1 x n2 x 3` tensor scaled to `[0, 1]`;
/// `i` is the pixel row, `j` the column, `k` the channel.
pub fn read_ppm(path: &Path) -> Result<DenseTensor3> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("open {path:?}"))?);
    let mut header = Vec::new();
    let mut fields = Vec::new();
    // Header: "P6", width, height, maxval, each optionally preceded by
    // comment lines; a single whitespace byte then separates pixel data.
    while fields.len() < 4 {
        header.clear();
        r.read_until(b'\n', &mut header)?;
        if header.is_empty() {
            bail!("{path:?}: truncated PPM header");
        }
        let line = String::from_utf8_lossy(&header);
        let line = line.split('#').next().unwrap_or("");
        fields.extend(line.split_whitespace().map(str::to_owned));
    }
    if fields[0] != "P6" {
        bail!("{path:?}: only binary P6 PPM is supported");
    }
    let width: usize = fields[1].parse().context("PPM width")?;
    let height: usize = fields[2].parse().context("PPM height")?;
    let maxval: usize = fields[3].parse().context("PPM maxval")?;
    if maxval != 255 {
        bail!("{path:?}: only 8-bit PPM (maxval 255) is supported");
    }
    let mut raw = vec![0u8; width * height * 3];
    r.read_exact(&mut raw).context("PPM pixel data")?;
    let mut t = DenseTensor3::zeros(height, width, 3);
    for row in 0..height {
        for col in 0..width {
            for ch in 0..3 {
                let v = raw[(row * width + col) * 3 + ch] as f64 / 255.0;
                t.set(row, col, ch, v);
            }
        }
    }
    Ok(t)
}

/// Writes an `n1 x n2 x 3` tensor as binary P6 PPM, clamping to `[0, 1]`.
pub fn write_ppm(path: &Path, t: &DenseTensor3) -> Result<()> {
    let (height, width, n3) = t.dims();
    if n3 != 3 {
        bail!("PPM output needs an n1 x n2 x 3 tensor, got n3 = {n3}");
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write!(w, "P6\n{width} {height}\n255\n")?;
    for row in 0..height {
        for col in 0..width {
            for ch in 0..3 {
                let v = (t.get(row, col, ch).clamp(0.0, 1.0) * 255.0).round() as u8;
                w.write_all(&[v])?;
            }
        }
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("write {path:?}"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("write {path:?}"))
}

/// One JSON object per iteration: `iter, obj, grad_norm, alpha, beta, restarted`.
pub fn write_trace_jsonl(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    for row in trace {
        let obj = serde_json::json!({
            "iter": row.iter,
            "obj": row.obj,
            "grad_norm": row.grad_norm,
            "alpha": row.alpha,
            "beta": row.beta,
            "restarted": row.restarted,
        });
        writeln!(w, "{obj}")?;
    }
    Ok(())
}
