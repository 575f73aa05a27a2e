//! Measurement model `y = A·x + w` with an i.i.d. Gaussian sensing matrix.
//!
//! `A` has i.i.d. `N(0, 1/m)` entries and `w` is i.i.d. `N(0, σ_w²)`. An instance is a
//! deterministic function of its [`ModelConfig`]: all randomness is drawn from a single
//! ChaCha stream seeded with `config.seed`, in the order `A` (row-major), `(x, x̃)`, `w`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::prior::{BgPrior, GgPrior, Prior};

/// Largest matrix (in entries) [`generate_instance`] will allocate: 2²⁸ entries, 2 GiB.
pub const MAX_MATRIX_ENTRIES: usize = 1 << 28;

/// Dense row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Resource(format!("{rows} x {cols} matrix overflows usize")))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A·v`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.forward_into(v, &mut out)?;
        Ok(out)
    }

    /// `Aᵀ·u`.
    pub fn adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.adjoint_into(u, &mut out)?;
        Ok(out)
    }

    /// Writes `A·v` into `out`. Each entry is a left-to-right dot product over one row.
    pub fn forward_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check("forward input", self.cols, v.len())?;
        self.check("forward output", self.rows, out.len())?;
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    /// Writes `Aᵀ·u` into `out`, accumulating rows in index order.
    pub fn adjoint_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.check("adjoint input", self.rows, u.len())?;
        self.check("adjoint output", self.cols, out.len())?;
        out.fill(0.0);
        for (&ui, row) in u.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += ui * a;
            }
        }
        Ok(())
    }

    fn check(&self, context: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            });
        }
        Ok(())
    }
}

/// Parameters of one problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub n: usize,
    pub m: usize,
    /// Measurement noise variance `σ_w²`.
    pub sigma_w2: f64,
    pub prior: Prior,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, m: usize, sigma_w2: f64, prior: Prior, seed: u64) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            sigma_w2,
            prior,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        if !(self.sigma_w2.is_finite() && self.sigma_w2 >= 0.0) {
            return Err(Error::invalid(
                "sigma_w2",
                format!("must be finite and >= 0, got {}", self.sigma_w2),
            ));
        }
        Ok(())
    }

    /// Measurement rate `δ = m/n`.
    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// One realization `(A, x, x̃, w, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub a: Matrix,
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub config: ModelConfig,
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts, computing `y = A·x + w`.
    pub fn from_parts(
        a: Matrix,
        x: Vec<f64>,
        x_tilde: Vec<f64>,
        w: Vec<f64>,
        config: ModelConfig,
    ) -> Result<Self> {
        if a.rows() != config.m || a.cols() != config.n {
            return Err(Error::DimensionMismatch {
                context: "matrix shape vs config",
                expected: config.m * config.n,
                found: a.rows() * a.cols(),
            });
        }
        for (context, expected, found) in [
            ("signal length", config.n, x.len()),
            ("side information length", config.n, x_tilde.len()),
            ("noise length", config.m, w.len()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        let mut y = a.forward(&x)?;
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi += wi;
        }
        Ok(Self {
            a,
            x,
            x_tilde,
            w,
            y,
            config,
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn delta(&self) -> f64 {
        self.config.delta()
    }
}

/// Draws an instance from `config`. Identical configs give bit-identical instances.
pub fn generate_instance(config: &ModelConfig) -> Result<ProblemInstance> {
    config.validate()?;
    let (n, m) = (config.n, config.m);
    let entries = n
        .checked_mul(m)
        .filter(|&e| e <= MAX_MATRIX_ENTRIES)
        .ok_or_else(|| {
            Error::Resource(format!(
                "a {m} x {n} matrix exceeds the limit of {MAX_MATRIX_ENTRIES} entries"
            ))
        })?;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(entries).map_err(|e| {
        Error::Resource(format!("cannot allocate a {m} x {n} matrix: {e}"))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / (m as f64).sqrt();
    data.extend((0..entries).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
    let a = Matrix::from_row_major(m, n, data)?;
    let (x, x_tilde) = config.prior.sample_joint(n, &mut rng);
    let sigma_w = config.sigma_w2.sqrt();
    let w: Vec<f64> = (0..m)
        .map(|_| sigma_w * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ProblemInstance::from_parts(a, x, x_tilde, w, *config)
}

const MAGIC: &[u8; 8] = b"AMPSIINS";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 64;

/// Writes `instance` in the little-endian binary container:
///
/// | offset | size | field |
/// |-------:|-----:|-------|
/// | 0  | 8 | magic `AMPSIINS` |
/// | 8  | 4 | format version, `u32` = 1 |
/// | 12 | 4 | prior tag, `u32` (0 = GG, 1 = BG) |
/// | 16 | 8 | `n`, `u64` |
/// | 24 | 8 | `m`, `u64` |
/// | 32 | 8 | seed, `u64` |
/// | 40 | 8 | `σ_w²`, `f64` |
/// | 48 | 8 | `σ_x²` (GG) or `ε` (BG), `f64` |
/// | 56 | 8 | `σ²`, `f64` |
/// | 64 | … | `A` row-major (`m·n`), then `x` (`n`), `x̃` (`n`), `w` (`m`), `y` (`m`), all `f64` |
pub fn write_instance(instance: &ProblemInstance, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let cfg = &instance.config;
    let (tag, p1, p2) = match cfg.prior {
        Prior::Gg(p) => (0u32, p.sigma_x2(), p.sigma_si2()),
        Prior::Bg(p) => (1u32, p.epsilon(), p.sigma_si2()),
    };
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&tag.to_le_bytes());
    header.extend_from_slice(&(cfg.n as u64).to_le_bytes());
    header.extend_from_slice(&(cfg.m as u64).to_le_bytes());
    header.extend_from_slice(&cfg.seed.to_le_bytes());
    for v in [cfg.sigma_w2, p1, p2] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    let write = |out: &mut BufWriter<File>, bytes: &[u8]| {
        out.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    write(&mut out, &header)?;
    for block in [
        instance.a.as_slice(),
        &instance.x,
        &instance.x_tilde,
        &instance.w,
        &instance.y,
    ] {
        for v in block {
            write(&mut out, &v.to_le_bytes())?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads an instance written by [`write_instance`].
pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let prior = match u32_at(12) {
        0 => Prior::Gg(GgPrior::new(f64_at(48), f64_at(56))?),
        1 => Prior::Bg(BgPrior::new(f64_at(48), f64_at(56))?),
        t => return Err(Error::Format(format!("unknown prior tag {t}"))),
    };
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::Format(format!("size {v} too large")));
    let (n, m) = (to_usize(u64_at(16))?, to_usize(u64_at(24))?);
    let config = ModelConfig::new(n, m, f64_at(40), prior, u64_at(32))?;
    let entries = n
        .checked_mul(m)
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;

    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let a = Matrix::from_row_major(m, n, read_block(entries)?)?;
    let x = read_block(n)?;
    let x_tilde = read_block(n)?;
    let w = read_block(m)?;
    let y = read_block(m)?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Format("trailing bytes after instance payload".into()));
    }
    Ok(ProblemInstance {
        a,
        x,
        x_tilde,
        w,
        y,
        config,
    })
}
