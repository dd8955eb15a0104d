//! Dataset generation and storage: seeded right-hand-side families, exact
//! targets from the Fourier solver, a self-describing binary file format with
//! little-endian doubles, and a CSV export. Every load re-checks the solver
//! residual invariant.

use crate::base::EllipticProblem;
use crate::config::{DataSpec, RhsFamily};
use crate::field::{Field, FieldError, Grid};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"RLDS";
const FORMAT_VERSION: u32 = 1;
/// Mean-square residual allowed for stored targets.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset count must be at least 1")]
    EmptyDataset,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error("record {index} violates the solver residual invariant ({residual:.3e} > {tol:.0e})")]
    ResidualViolation {
        index: usize,
        residual: f64,
        tol: f64,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub n: usize,
    pub eps: f64,
    pub rhs_family: RhsFamily,
    pub seed: u64,
    pub count: usize,
}

/// In-memory dataset of `(x, y)` pairs with `(I - eps*L) y = x`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub pairs: Vec<(Field, Field)>,
}

/// One right-hand side from the requested family. Sample streams are
/// disjoint: the draw for sample `i` uses stream `stream_offset + i` of the
/// seeded generator, so generation order and parallelism cannot matter.
fn draw_rhs(grid: Grid, family: RhsFamily, seed: u64, stream: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = grid.n() as f64;
    match family {
        RhsFamily::Tanh => {
            let amp: f64 = rng.gen_range(0.5..1.5);
            let sharpness: f64 = rng.gen_range(1.0..3.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            // Smooth low-mode perturbation.
            let coeffs: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    (
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    )
                })
                .collect();
            Field::from_fn(grid, |i| {
                let s = i as f64 / n;
                let mut v = amp * (sharpness * (2.0 * PI * s + phase).cos()).tanh();
                for (m, (c, d)) in coeffs.iter().enumerate() {
                    let ang = 2.0 * PI * (m + 1) as f64 * s;
                    v += 0.05 * (c * ang.cos() + d * ang.sin());
                }
                v
            })
            .expect("finite draw")
        }
        RhsFamily::Fourier => {
            // Power-law magnitudes (1+k)^-1.5 with Gaussian amplitudes and
            // random phases via independent cos/sin coefficients.
            let dc: f64 = {
                let g: f64 = StandardNormal.sample(&mut rng);
                0.5 * g
            };
            let nyq = grid.nyquist();
            let coeffs: Vec<(f64, f64)> = (1..nyq)
                .map(|_| {
                    (
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    )
                })
                .collect();
            Field::from_fn(grid, |i| {
                let s = i as f64 / n;
                let mut v = dc;
                for (idx, (a, b)) in coeffs.iter().enumerate() {
                    let k = (idx + 1) as f64;
                    let decay = (1.0 + k).powf(-1.5);
                    let ang = 2.0 * PI * k * s;
                    v += decay * (a * ang.cos() + b * ang.sin());
                }
                v
            })
            .expect("finite draw")
        }
    }
}

/// Generate `count` pairs; targets come from the exact solver. Deterministic
/// given `(family, seed, stream_offset)`.
pub fn generate(
    prob: &EllipticProblem,
    family: RhsFamily,
    seed: u64,
    count: usize,
    stream_offset: u64,
) -> Result<Dataset, DataError> {
    if count == 0 {
        return Err(DataError::EmptyDataset);
    }
    let pairs = (0..count)
        .map(|i| {
            let x = draw_rhs(prob.grid, family, seed, stream_offset + i as u64);
            let y = prob.solve_exact(&x)?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            n: prob.grid.n(),
            eps: prob.eps,
            rhs_family: family,
            seed,
            count,
        },
        pairs,
    })
}

/// Train and test splits on disjoint sample streams of one seed: train takes
/// streams `0..n_train`, test takes `n_train..n_train+n_test`.
pub fn train_test(prob: &EllipticProblem, spec: &DataSpec) -> Result<(Dataset, Dataset), DataError> {
    let train = generate(prob, spec.rhs_family, spec.seed, spec.n_train, 0)?;
    let test = generate(
        prob,
        spec.rhs_family,
        spec.seed,
        spec.n_test,
        spec.n_train as u64,
    )?;
    Ok((train, test))
}

impl Dataset {
    pub fn problem(&self) -> EllipticProblem {
        EllipticProblem::new(
            self.header.eps,
            Grid::new(self.header.n).expect("header validated on construction"),
        )
    }

    pub fn write(&self, w: &mut impl Write) -> Result<(), DataError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(self.header.n as u32)?;
        w.write_f64::<LittleEndian>(self.header.eps)?;
        w.write_u8(match self.header.rhs_family {
            RhsFamily::Tanh => 0,
            RhsFamily::Fourier => 1,
        })?;
        w.write_u64::<LittleEndian>(self.header.seed)?;
        w.write_u32::<LittleEndian>(self.header.count as u32)?;
        for (x, y) in &self.pairs {
            for v in x.values().iter().chain(y.values().iter()) {
                w.write_f64::<LittleEndian>(*v)?;
            }
        }
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> Result<(), DataError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    /// Read and validate: shape checks plus the residual invariant on every
    /// record.
    pub fn read(r: &mut impl Read) -> Result<Self, DataError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DataError::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(DataError::Format(format!("unsupported version {version}")));
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let grid = Grid::new(n).map_err(|e| DataError::Format(e.to_string()))?;
        let eps = r.read_f64::<LittleEndian>()?;
        if !(eps >= 0.0) {
            return Err(DataError::Format(format!("bad eps {eps}")));
        }
        let rhs_family = match r.read_u8()? {
            0 => RhsFamily::Tanh,
            1 => RhsFamily::Fourier,
            other => return Err(DataError::Format(format!("unknown rhs family tag {other}"))),
        };
        let seed = r.read_u64::<LittleEndian>()?;
        let count = r.read_u32::<LittleEndian>()? as usize;

        let prob = EllipticProblem::new(eps, grid);
        let mut pairs = Vec::with_capacity(count);
        for index in 0..count {
            let mut read_field = || -> Result<Field, DataError> {
                let mut values = vec![0.0; n];
                r.read_f64_into::<LittleEndian>(&mut values)?;
                Ok(Field::new(grid, values)?)
            };
            let x = read_field()?;
            let y = read_field()?;
            let residual = prob.residual(&y, &x);
            if residual > RESIDUAL_TOL {
                return Err(DataError::ResidualViolation {
                    index,
                    residual,
                    tol: RESIDUAL_TOL,
                });
            }
            pairs.push((x, y));
        }
        Ok(Dataset {
            header: DatasetHeader {
                n,
                eps,
                rhs_family,
                seed,
                count,
            },
            pairs,
        })
    }

    pub fn read_from(path: &Path) -> Result<Self, DataError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut file)
    }

    /// CSV rows `(sample, index, x, y)` at full double precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,index,x,y\n");
        for (s, (x, y)) in self.pairs.iter().enumerate() {
            for i in 0..self.header.n {
                let _ = writeln!(out, "{s},{i},{:.16e},{:.16e}", x.values()[i], y.values()[i]);
            }
        }
        out
    }
}
