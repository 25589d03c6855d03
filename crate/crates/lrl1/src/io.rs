//! Bit-exact binary serialization of instances.
//!
//! Layout (little endian): magic `LRL1`, u32 version, three u8 tags
//! (formulation, truth kind, noise distribution), u64 d1 d2 r k m,
//! f64 s p noise-parameter t0 p0, then X*, U*, σ, V* (row-major f64),
//! the ensemble (m·d1·d2 f64 or m (u64, u64) index pairs), the support
//! as u64 count + indices, and finally ε and y.

use crate::linalg::{self, to_row_major, Mat};
use crate::problem::{Ensemble, Formulation, GroundTruth, Instance, NoiseDist, NoiseRealization, TruthKind};
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"LRL1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an instance file (bad magic)")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("corrupt instance file: {0}")]
    Corrupt(String),
}

fn truth_tag(k: TruthKind) -> u8 {
    match k {
        TruthKind::Generic => 0,
        TruthKind::PsdSymmetric => 1,
        TruthKind::Coherent => 2,
    }
}

fn truth_from_tag(t: u8) -> Option<TruthKind> {
    [TruthKind::Generic, TruthKind::PsdSymmetric, TruthKind::Coherent].get(t as usize).copied()
}

fn noise_parts(d: &NoiseDist) -> (u8, f64) {
    match *d {
        NoiseDist::Gaussian { sigma } => (0, sigma),
        NoiseDist::SymmetricOutlier { a } => (1, a),
        NoiseDist::PositiveOutlier { a } => (2, a),
    }
}

fn noise_from_parts(t: u8, v: f64) -> Option<NoiseDist> {
    match t {
        0 => Some(NoiseDist::Gaussian { sigma: v }),
        1 => Some(NoiseDist::SymmetricOutlier { a: v }),
        2 => Some(NoiseDist::PositiveOutlier { a: v }),
        _ => None,
    }
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: usize) -> io::Result<()> {
        self.0.write_all(&(v as u64).to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> io::Result<()> {
        v.iter().try_for_each(|&x| self.f64(x))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<usize, IoError> {
        usize::try_from(u64::from_le_bytes(self.bytes()?)).map_err(|_| IoError::Corrupt("size overflow".into()))
    }
    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> io::Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn write_instance<W: Write>(inst: &Instance, out: W) -> io::Result<()> {
    let mut w = Writer(out);
    let gt = &inst.gt;
    let (noise_tag, noise_param) = noise_parts(&inst.noise.dist);
    w.0.write_all(MAGIC)?;
    w.0.write_all(&VERSION.to_le_bytes())?;
    w.0.write_all(&[inst.formulation().tag(), truth_tag(gt.kind), noise_tag])?;
    for v in [gt.d1, gt.d2, gt.r, inst.k, inst.m()] {
        w.u64(v)?;
    }
    let s = match &inst.ens {
        Ensemble::Completion { s, .. } => *s,
        Ensemble::Sensing { .. } => 1.0,
    };
    w.f64s(&[s, inst.noise.p, noise_param, inst.noise.t0, inst.noise.p0])?;
    w.f64s(&to_row_major(&gt.xstar))?;
    w.f64s(&to_row_major(&gt.ustar))?;
    w.f64s(&gt.sigma)?;
    w.f64s(&to_row_major(&gt.vstar))?;
    match &inst.ens {
        Ensemble::Sensing { a, .. } => w.f64s(&to_row_major(a))?,
        Ensemble::Completion { psi, .. } => {
            for &(i, j) in psi {
                w.u64(i)?;
                w.u64(j)?;
            }
        }
    }
    w.u64(inst.noise.support.len())?;
    for &i in &inst.noise.support {
        w.u64(i)?;
    }
    w.f64s(&inst.noise.eps)?;
    w.f64s(&inst.y)?;
    w.0.flush()
}

fn from_row_major(r: usize, c: usize, v: &[f64]) -> Result<Mat, IoError> {
    linalg::from_row_major(r, c, v).map_err(|e| IoError::Corrupt(e.to_string()))
}

/// Guards allocations against corrupt headers.
const MAX_ELEMS: usize = 1 << 32;

fn checked(a: usize, b: usize) -> Result<usize, IoError> {
    a.checked_mul(b)
        .filter(|&n| n <= MAX_ELEMS)
        .ok_or_else(|| IoError::Corrupt("dimensions too large".into()))
}

pub fn read_instance<R: Read>(input: R) -> Result<Instance, IoError> {
    let mut r = Reader(input);
    if &r.bytes::<4>()? != MAGIC {
        return Err(IoError::Magic);
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != VERSION {
        return Err(IoError::Version(version));
    }
    let [ft, kt, nt] = r.bytes::<3>()?;
    let corrupt = |s: &str| IoError::Corrupt(s.to_string());
    let formulation = Formulation::from_tag(ft).ok_or_else(|| corrupt("formulation tag"))?;
    let kind = truth_from_tag(kt).ok_or_else(|| corrupt("truth tag"))?;
    let (d1, d2, rank, k, m) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let [s, p, noise_param, t0, p0] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
    let dist = noise_from_parts(nt, noise_param).ok_or_else(|| corrupt("noise tag"))?;
    if rank > d1.min(d2) {
        return Err(corrupt("rank exceeds dimensions"));
    }
    let xstar = from_row_major(d1, d2, &r.f64s(checked(d1, d2)?)?)?;
    let ustar = from_row_major(d1, rank, &r.f64s(checked(d1, rank)?)?)?;
    let sigma = r.f64s(rank)?;
    let vstar = from_row_major(d2, rank, &r.f64s(checked(d2, rank)?)?)?;
    let ens = if formulation.is_sensing() {
        let a = from_row_major(m, d1 * d2, &r.f64s(checked(m, checked(d1, d2)?)?)?)?;
        Ensemble::Sensing { d1, d2, a }
    } else {
        let mut psi = Vec::with_capacity(m.min(MAX_ELEMS));
        for _ in 0..m {
            let (i, j) = (r.u64()?, r.u64()?);
            if i >= d1 || j >= d2 {
                return Err(corrupt("observed index out of range"));
            }
            psi.push((i, j));
        }
        Ensemble::Completion { d1, d2, psi, s }
    };
    let ns = r.u64()?;
    if ns > m {
        return Err(corrupt("support larger than m"));
    }
    let support = (0..ns).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    if support.iter().any(|&i| i >= m) {
        return Err(corrupt("support index out of range"));
    }
    let eps = r.f64s(m)?;
    let y = r.f64s(m)?;
    let mut noise = NoiseRealization::from_parts(p, dist, support, eps);
    noise.t0 = t0;
    noise.p0 = p0;
    noise.st = noise.support.iter().copied().filter(|&i| noise.eps[i].abs() >= t0).collect();
    let gt = GroundTruth { d1, d2, r: rank, ustar, sigma, vstar, xstar, kind };
    Ok(Instance { gt, ens, noise, y, k, symmetric: formulation.is_symmetric() })
}

pub fn save_instance(inst: &Instance, path: &Path) -> io::Result<()> {
    write_instance(inst, io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    read_instance(io::BufReader::new(std::fs::File::open(path)?))
}
