//! k-space undersampling mask generation.
//!
//! Three mask families at the supported acceleration rates: uniform cadence,
//! Gaussian random variable-density, and pseudo-radial spokes rasterized onto
//! the Cartesian grid. Uniform and Gaussian masks sample full kx rows
//! (line-based Cartesian undersampling); pseudo-radial samples individual
//! cells. All generators are pure functions of their arguments.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Complex32, ComplexTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskKind {
    Uniform,
    GaussianRandom,
    PseudoRadial,
}

impl MaskKind {
    pub fn all() -> [MaskKind; 3] {
        [MaskKind::Uniform, MaskKind::GaussianRandom, MaskKind::PseudoRadial]
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaskKind::Uniform => "uniform",
            MaskKind::GaussianRandom => "gaussian",
            MaskKind::PseudoRadial => "radial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MaskKind::Uniform),
            "gaussian" | "random" => Ok(MaskKind::GaussianRandom),
            "radial" | "pseudo-radial" => Ok(MaskKind::PseudoRadial),
            other => Err(Error::InvalidArg(format!("unknown mask kind `{other}`"))),
        }
    }
}

/// Binary k-space sampling mask with pattern metadata.
///
/// `grid[x][y] == 1` means cell (kx=x, ky=y) is acquired. The ACS block is a
/// run of `acs_lines` fully sampled central ky lines (0 for pseudo-radial).
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    pub kind: MaskKind,
    pub nominal_rate: u32,
    pub nx: usize,
    pub ny: usize,
    pub grid: Vec<u8>, // row-major [nx, ny]
    pub acs_lines: usize,
    pub seed: u64,
}

impl SamplingMask {
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.grid[x * self.ny + y] != 0
    }

    pub fn ones(&self) -> usize {
        self.grid.iter().filter(|&&v| v != 0).count()
    }

    /// The mask as a complex tensor (1 or 0 with zero imaginary part),
    /// the interchange representation used by file I/O.
    pub fn to_tensor(&self) -> ComplexTensor {
        let data = self
            .grid
            .iter()
            .map(|&v| Complex32::new(v as f32, 0.0))
            .collect();
        ComplexTensor::new(vec![self.nx, self.ny], data).expect("grid length matches")
    }

    /// Rebuild a mask from its tensor form plus metadata.
    pub fn from_tensor(
        t: &ComplexTensor,
        kind: MaskKind,
        nominal_rate: u32,
        acs_lines: usize,
        seed: u64,
    ) -> Result<Self> {
        if t.ndim() != 2 {
            return Err(Error::InvalidShape(format!(
                "mask tensor must be 2-D, got {:?}",
                t.shape()
            )));
        }
        let grid = t.data().iter().map(|z| (z.re != 0.0) as u8).collect();
        Ok(SamplingMask {
            kind,
            nominal_rate,
            nx: t.shape()[0],
            ny: t.shape()[1],
            grid,
            acs_lines,
            seed,
        })
    }

    /// ky indices of fully sampled lines (for line-based masks).
    pub fn sampled_lines(&self) -> Vec<usize> {
        (0..self.ny)
            .filter(|&y| (0..self.nx).all(|x| self.at(x, y)))
            .collect()
    }
}

/// Central ACS line range `[start, start + acs)`.
fn acs_range(ny: usize, acs_lines: usize) -> std::ops::Range<usize> {
    let start = ny / 2 - acs_lines / 2;
    start..start + acs_lines
}

fn mask_from_lines(
    kind: MaskKind,
    nominal_rate: u32,
    nx: usize,
    ny: usize,
    lines: &[bool],
    acs_lines: usize,
    seed: u64,
) -> SamplingMask {
    let mut grid = vec![0u8; nx * ny];
    for x in 0..nx {
        for (y, &on) in lines.iter().enumerate() {
            grid[x * ny + y] = on as u8;
        }
    }
    SamplingMask {
        kind,
        nominal_rate,
        nx,
        ny,
        grid,
        acs_lines,
        seed,
    }
}

fn validate_grid_args(nx: usize, ny: usize, rate: u32) -> Result<()> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidShape(format!("empty grid {nx}x{ny}")));
    }
    if rate < 2 {
        return Err(Error::InvalidArg(format!("rate must be >= 2, got {rate}")));
    }
    Ok(())
}

/// Every `rate`-th ky line starting at `offset`, plus `acs_lines` central lines.
pub fn make_uniform_mask(
    nx: usize,
    ny: usize,
    rate: u32,
    acs_lines: usize,
    offset: u32,
) -> Result<SamplingMask> {
    validate_grid_args(nx, ny, rate)?;
    if offset >= rate {
        return Err(Error::InvalidArg(format!(
            "offset {offset} must be < rate {rate}"
        )));
    }
    if acs_lines >= ny {
        return Err(Error::InvalidArg(format!(
            "acs_lines {acs_lines} must be < ny {ny}"
        )));
    }
    let mut lines = vec![false; ny];
    let mut y = offset as usize;
    while y < ny {
        lines[y] = true;
        y += rate as usize;
    }
    for y in acs_range(ny, acs_lines) {
        lines[y] = true;
    }
    Ok(mask_from_lines(
        MaskKind::Uniform,
        rate,
        nx,
        ny,
        &lines,
        acs_lines,
        offset as u64,
    ))
}

/// ky lines drawn without replacement with probability proportional to a
/// Gaussian density centered at DC (sigma = ny/6), topped up with ACS lines;
/// total line count = round(ny/rate), ACS included.
pub fn make_gaussian_mask(
    nx: usize,
    ny: usize,
    rate: u32,
    acs_lines: usize,
    seed: u64,
) -> Result<SamplingMask> {
    validate_grid_args(nx, ny, rate)?;
    let total = (ny as f64 / rate as f64).round() as usize;
    if total < 1 {
        return Err(Error::InvalidArg(format!(
            "rate {rate} leaves no sampled lines at ny={ny}"
        )));
    }
    if total < acs_lines {
        return Err(Error::InvalidArg(format!(
            "requested {total} lines < acs_lines {acs_lines}"
        )));
    }
    let mut lines = vec![false; ny];
    for y in acs_range(ny, acs_lines) {
        lines[y] = true;
    }
    let sigma = ny as f64 / 6.0;
    let center = ny as f64 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..ny).filter(|&y| !lines[y]).collect();
    let mut drawn = lines.iter().filter(|&&v| v).count();
    while drawn < total {
        let weights: Vec<f64> = remaining
            .iter()
            .map(|&y| {
                let d = y as f64 - center;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidArg(format!("degenerate line weights: {e}")))?;
        let pick = dist.sample(&mut rng);
        lines[remaining[pick]] = true;
        remaining.swap_remove(pick);
        drawn += 1;
    }
    Ok(mask_from_lines(
        MaskKind::GaussianRandom,
        rate,
        nx,
        ny,
        &lines,
        acs_lines,
        seed,
    ))
}

/// Rasterize one spoke through the grid center at angle `theta`.
pub(crate) fn rasterize_spoke(grid: &mut [u8], nx: usize, ny: usize, theta: f64) {
    let cx = (nx / 2) as f64;
    let cy = (ny / 2) as f64;
    let (dx, dy) = (theta.cos(), theta.sin());
    let half_len = ((nx * nx + ny * ny) as f64).sqrt() / 2.0 + 1.0;
    let steps = (half_len / 0.4).ceil() as i64;
    for s in -steps..=steps {
        let t = s as f64 * 0.4;
        let x = (cx + t * dx).round();
        let y = (cy + t * dy).round();
        if x >= 0.0 && y >= 0.0 && (x as usize) < nx && (y as usize) < ny {
            grid[x as usize * ny + y as usize] = 1;
        }
    }
}

/// Straight spokes through the grid center at jittered angles
/// `theta_i = (i + jitter) * pi / n_spokes`.
pub fn make_pseudo_radial_mask(nx: usize, ny: usize, rate: u32, seed: u64) -> Result<SamplingMask> {
    validate_grid_args(nx, ny, rate)?;
    let n_spokes =
        (nx.max(ny) as f64 * std::f64::consts::PI / (2.0 * rate as f64)).round() as usize;
    if n_spokes < 1 {
        return Err(Error::InvalidArg(format!(
            "rate {rate} leaves no spokes on {nx}x{ny}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: f64 = rng.gen_range(0.0..1.0);
    let mut grid = vec![0u8; nx * ny];
    for i in 0..n_spokes {
        let theta = (i as f64 + jitter) * std::f64::consts::PI / n_spokes as f64;
        rasterize_spoke(&mut grid, nx, ny, theta);
    }
    Ok(SamplingMask {
        kind: MaskKind::PseudoRadial,
        nominal_rate: rate,
        nx,
        ny,
        grid,
        acs_lines: 0,
        seed,
    })
}

/// nx*ny divided by the number of sampled cells.
pub fn achieved_rate(mask: &SamplingMask) -> Result<f64> {
    let ones = mask.ones();
    if ones == 0 {
        return Err(Error::Degenerate("all-zero mask".into()));
    }
    Ok((mask.nx * mask.ny) as f64 / ones as f64)
}

/// ACS line count used by dataset builders and sweeps when the caller does
/// not pass one: the usual dense-center default, shrunk at high rates so the
/// achieved rate stays within the factor-of-2 band of the nominal rate.
pub fn default_acs(ny: usize, rate: u32) -> usize {
    let dense = 8.max(ny / 16);
    let budget = ((ny as f64 / rate as f64).round() as usize) / 2;
    dense.min(budget)
}

/// Generate a mask of the given family with the default ACS policy.
pub fn make_mask(kind: MaskKind, nx: usize, ny: usize, rate: u32, seed: u64) -> Result<SamplingMask> {
    match kind {
        MaskKind::Uniform => {
            make_uniform_mask(nx, ny, rate, default_acs(ny, rate), (seed % rate as u64) as u32)
        }
        MaskKind::GaussianRandom => make_gaussian_mask(nx, ny, rate, default_acs(ny, rate), seed),
        MaskKind::PseudoRadial => make_pseudo_radial_mask(nx, ny, rate, seed),
    }
}

pub const PAPER_RATES: [u32; 6] = [4, 8, 12, 16, 20, 24];
