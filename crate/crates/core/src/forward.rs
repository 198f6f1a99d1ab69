//! Multi-coil Cartesian acquisition operator: mask o FFT o coil-sensitivity,
//! its adjoint and normal operator, plus simulated coil sensitivities and
//! retrospective undersampling of fully sampled k-space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::sampling::SamplingMask;
use crate::tensor::{Complex32, ComplexTensor};

/// Complex coil sensitivity profiles, pixelwise normalized so that
/// `sum_c |S_c(x,y)|^2 = 1`.
#[derive(Clone, Debug)]
pub struct CoilSensitivities {
    /// Shape `[ncoils, nx, ny]`.
    pub maps: ComplexTensor,
}

impl CoilSensitivities {
    pub fn ncoils(&self) -> usize {
        self.maps.shape()[0]
    }

    pub fn nx(&self) -> usize {
        self.maps.shape()[1]
    }

    pub fn ny(&self) -> usize {
        self.maps.shape()[2]
    }

    pub fn from_maps(maps: ComplexTensor) -> Result<Self> {
        if maps.ndim() != 3 {
            return Err(Error::InvalidShape(format!(
                "sensitivities must be [ncoils, nx, ny], got {:?}",
                maps.shape()
            )));
        }
        Ok(Self { maps })
    }
}

/// Smooth analytic coil profiles: Gaussian magnitude lobes centered on an
/// ellipse around the FOV with linear phase ramps, normalized pixelwise to
/// unit sum of squares.
pub fn simulate_sensitivities(
    nx: usize,
    ny: usize,
    ncoils: usize,
    seed: u64,
) -> Result<CoilSensitivities> {
    if ncoils < 1 || nx < 1 || ny < 1 {
        return Err(Error::InvalidShape(format!(
            "bad sensitivity shape [{ncoils}, {nx}, {ny}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase_jitter: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let width = 0.6 * nx.max(ny) as f64;
    let (cx0, cy0) = (nx as f64 / 2.0, ny as f64 / 2.0);
    let mut data = vec![Complex32::default(); ncoils * nx * ny];
    for c in 0..ncoils {
        let ang = std::f64::consts::TAU * c as f64 / ncoils as f64 + phase_jitter;
        let (lx, ly) = (cx0 + 0.7 * nx as f64 * ang.cos(), cy0 + 0.7 * ny as f64 * ang.sin());
        // small per-coil linear phase ramp
        let (px, py) = (
            rng.gen_range(-0.5..0.5) / nx as f64,
            rng.gen_range(-0.5..0.5) / ny as f64,
        );
        let p0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        for x in 0..nx {
            for y in 0..ny {
                let d2 = (x as f64 - lx).powi(2) + (y as f64 - ly).powi(2);
                let mag = (-d2 / (2.0 * width * width)).exp();
                let ph = std::f64::consts::TAU * (px * x as f64 + py * y as f64) + p0;
                data[(c * nx + x) * ny + y] =
                    Complex32::new((mag * ph.cos()) as f32, (mag * ph.sin()) as f32);
            }
        }
    }
    // pixelwise sum-of-squares normalization
    for x in 0..nx {
        for y in 0..ny {
            let ss: f64 = (0..ncoils)
                .map(|c| {
                    let z = data[(c * nx + x) * ny + y];
                    z.re as f64 * z.re as f64 + z.im as f64 * z.im as f64
                })
                .sum();
            let inv = (1.0 / ss.sqrt()) as f32;
            for c in 0..ncoils {
                data[(c * nx + x) * ny + y] *= inv;
            }
        }
    }
    CoilSensitivities::from_maps(ComplexTensor::new(vec![ncoils, nx, ny], data)?)
}

fn check_image_shape(x: &ComplexTensor, sens: &CoilSensitivities) -> Result<(usize, usize, usize)> {
    if x.ndim() != 3 {
        return Err(Error::InvalidShape(format!(
            "image must be [t, x, y], got {:?}",
            x.shape()
        )));
    }
    let (nt, nx, ny) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if nx != sens.nx() || ny != sens.ny() {
        return Err(Error::shape(&[sens.nx(), sens.ny()], &[nx, ny]));
    }
    Ok((nt, nx, ny))
}

fn check_mask(mask: &SamplingMask, nx: usize, ny: usize) -> Result<()> {
    if mask.nx != nx || mask.ny != ny {
        return Err(Error::shape(&[nx, ny], &[mask.nx, mask.ny]));
    }
    Ok(())
}

/// Acquisition: per frame and coil, `mask . fft2c(S_c . x_t)`.
/// Returns k-space of shape `[coil, t, x, y]`; unsampled positions are zero.
pub fn forward(
    x: &ComplexTensor,
    sens: &CoilSensitivities,
    mask: &SamplingMask,
) -> Result<ComplexTensor> {
    let (nt, nx, ny) = check_image_shape(x, sens)?;
    check_mask(mask, nx, ny)?;
    let nc = sens.ncoils();
    let plane = nx * ny;
    let mut out = vec![Complex32::default(); nc * nt * plane];
    for c in 0..nc {
        let smap = &sens.maps.data()[c * plane..(c + 1) * plane];
        for t in 0..nt {
            let img = &x.data()[t * plane..(t + 1) * plane];
            let mut buf: Vec<Complex32> = img.iter().zip(smap).map(|(&v, &s)| v * s).collect();
            crate::fft::fft2c_plane(&mut buf, nx, ny, false);
            let dst = &mut out[(c * nt + t) * plane..(c * nt + t + 1) * plane];
            for (i, (d, z)) in dst.iter_mut().zip(buf).enumerate() {
                *d = if mask.grid[i] != 0 { z } else { Complex32::default() };
            }
        }
    }
    ComplexTensor::new(vec![nc, nt, nx, ny], out)
}

/// Adjoint acquisition: `sum_c conj(S_c) . ifft2c(mask . y_c)` per frame.
pub fn adjoint(
    y: &ComplexTensor,
    sens: &CoilSensitivities,
    mask: &SamplingMask,
) -> Result<ComplexTensor> {
    if y.ndim() != 4 {
        return Err(Error::InvalidShape(format!(
            "k-space must be [coil, t, x, y], got {:?}",
            y.shape()
        )));
    }
    let (nc, nt, nx, ny) = (y.shape()[0], y.shape()[1], y.shape()[2], y.shape()[3]);
    if nc != sens.ncoils() || nx != sens.nx() || ny != sens.ny() {
        return Err(Error::shape(&[sens.ncoils(), sens.nx(), sens.ny()], &[nc, nx, ny]));
    }
    check_mask(mask, nx, ny)?;
    let plane = nx * ny;
    let mut out = vec![Complex32::default(); nt * plane];
    let mut buf = vec![Complex32::default(); plane];
    for c in 0..nc {
        let smap = &sens.maps.data()[c * plane..(c + 1) * plane];
        for t in 0..nt {
            let ksp = &y.data()[(c * nt + t) * plane..(c * nt + t + 1) * plane];
            for (i, (b, z)) in buf.iter_mut().zip(ksp).enumerate() {
                *b = if mask.grid[i] != 0 { *z } else { Complex32::default() };
            }
            crate::fft::fft2c_plane(&mut buf, nx, ny, true);
            let dst = &mut out[t * plane..(t + 1) * plane];
            for ((d, &z), &s) in dst.iter_mut().zip(&buf).zip(smap) {
                *d += z * s.conj();
            }
        }
    }
    ComplexTensor::new(vec![nt, nx, ny], out)
}

/// Normal operator with Tikhonov shift: `adjoint(forward(x)) + mu * x`.
pub fn normal(
    x: &ComplexTensor,
    sens: &CoilSensitivities,
    mask: &SamplingMask,
    mu: f32,
) -> Result<ComplexTensor> {
    if mu < 0.0 {
        return Err(Error::InvalidArg(format!("mu must be >= 0, got {mu}")));
    }
    let ehe = adjoint(&forward(x, sens, mask)?, sens, mask)?;
    ehe.zip(x, |a, b| a + b * mu)
}

/// Elementwise `mask . full_ksp`, broadcast over coil and t.
pub fn retrospective_undersample(
    full_ksp: &ComplexTensor,
    mask: &SamplingMask,
) -> Result<ComplexTensor> {
    if full_ksp.ndim() < 2 {
        return Err(Error::InvalidShape(format!(
            "k-space must have spatial axes, got {:?}",
            full_ksp.shape()
        )));
    }
    let ny = full_ksp.shape()[full_ksp.ndim() - 1];
    let nx = full_ksp.shape()[full_ksp.ndim() - 2];
    check_mask(mask, nx, ny)?;
    let plane = nx * ny;
    let mut out = full_ksp.clone();
    for chunk in out.data_mut().chunks_exact_mut(plane) {
        for (i, z) in chunk.iter_mut().enumerate() {
            if mask.grid[i] == 0 {
                *z = Complex32::default();
            }
        }
    }
    Ok(out)
}

/// A mask with every cell sampled (identity sampling).
pub fn full_mask(nx: usize, ny: usize) -> SamplingMask {
    SamplingMask {
        kind: crate::sampling::MaskKind::Uniform,
        nominal_rate: 1,
        nx,
        ny,
        grid: vec![1; nx * ny],
        acs_lines: ny,
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{make_gaussian_mask, make_mask, MaskKind};
    use crate::tensor::inner;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: &ComplexTensor, b: &ComplexTensor) -> f64 {
        a.sub(b).unwrap().norm() / b.norm().max(1e-30)
    }

    #[test]
    fn single_coil_magnitude_is_one_after_normalization() {
        let s = simulate_sensitivities(12, 10, 1, 3).unwrap();
        for z in s.maps.data() {
            assert!((z.norm() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn sum_of_squares_is_unity() {
        let s = simulate_sensitivities(16, 16, 6, 11).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                let ss: f32 = (0..6).map(|c| s.maps.at(&[c, x, y]).norm_sqr()).sum();
                assert!((ss - 1.0).abs() < 1e-5, "({x},{y}): {ss}");
            }
        }
    }

    #[test]
    fn sensitivities_deterministic() {
        let a = simulate_sensitivities(8, 8, 4, 5).unwrap();
        let b = simulate_sensitivities(8, 8, 4, 5).unwrap();
        assert_eq!(a.maps, b.maps);
    }

    #[test]
    fn forward_full_mask_single_coil_is_fft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ComplexTensor::random(&[2, 8, 8], &mut rng);
        let sens = simulate_sensitivities(8, 8, 1, 0).unwrap();
        let y = forward(&x, &sens, &full_mask(8, 8)).unwrap();
        // |S| = 1, so adjoint(forward) recovers x exactly
        let back = adjoint(&y, &sens, &full_mask(8, 8)).unwrap();
        assert!(rel(&back, &x) < 1e-5);
        // with truly unit sensitivities (phase too), forward is exactly fft2c
        let unit = CoilSensitivities::from_maps(ComplexTensor::from_fn(&[1, 8, 8], |_| {
            Complex32::new(1.0, 0.0)
        }))
        .unwrap();
        let y2 = forward(&x, &unit, &full_mask(8, 8)).unwrap();
        let want = fft2c(&x).unwrap();
        for t in 0..2 {
            for i in 0..64 {
                let got = y2.data()[t * 64 + i];
                let w = want.data()[t * 64 + i];
                assert!((got - w).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_image_gives_zero_kspace() {
        let x = ComplexTensor::zeros(&[1, 8, 8]);
        let sens = simulate_sensitivities(8, 8, 3, 1).unwrap();
        let m = make_mask(MaskKind::GaussianRandom, 8, 8, 2, 0).unwrap();
        let y = forward(&x, &sens, &m).unwrap();
        assert_eq!(y.norm(), 0.0);
        let back = adjoint(&y, &sens, &m).unwrap();
        assert_eq!(back.norm(), 0.0);
    }

    #[test]
    fn adjoint_dot_product_identity_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sens = simulate_sensitivities(16, 16, 4, 8).unwrap();
        for kind in MaskKind::all() {
            let m = make_mask(kind, 16, 16, 4, 3).unwrap();
            for _ in 0..5 {
                let x = ComplexTensor::random(&[2, 16, 16], &mut rng);
                let y = ComplexTensor::random(&[4, 2, 16, 16], &mut rng);
                let ex = forward(&x, &sens, &m).unwrap();
                let ehy = adjoint(&y, &sens, &m).unwrap();
                let lhs = inner(&ex, &y).unwrap();
                let rhs = inner(&x, &ehy).unwrap();
                let denom = x.norm() * y.norm();
                assert!(
                    (lhs - rhs).norm() / denom < 1e-5,
                    "{kind:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn adjoint_full_single_coil_is_ifft() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = ComplexTensor::random(&[1, 1, 8, 8], &mut rng);
        let unit = CoilSensitivities::from_maps(ComplexTensor::from_fn(&[1, 8, 8], |_| {
            Complex32::new(1.0, 0.0)
        }))
        .unwrap();
        let img = adjoint(&y, &unit, &full_mask(8, 8)).unwrap();
        let want = ifft2c(&ComplexTensor::new(vec![1, 8, 8], y.data().to_vec()).unwrap()).unwrap();
        assert!(rel(&img, &want) < 1e-6);
    }

    #[test]
    fn ehe_is_identity_when_fully_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ComplexTensor::random(&[2, 16, 16], &mut rng);
        let sens = simulate_sensitivities(16, 16, 4, 2).unwrap();
        let back = adjoint(&forward(&x, &sens, &full_mask(16, 16)).unwrap(), &sens, &full_mask(16, 16)).unwrap();
        assert!(rel(&back, &x) < 1e-5);
    }

    #[test]
    fn normal_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = ComplexTensor::random(&[1, 8, 8], &mut rng);
        let sens = simulate_sensitivities(8, 8, 1, 0).unwrap();
        let n0 = normal(&x, &sens, &full_mask(8, 8), 0.0).unwrap();
        assert!(rel(&n0, &x) < 1e-5);
        let z = ComplexTensor::zeros(&[1, 8, 8]);
        assert_eq!(normal(&z, &sens, &full_mask(8, 8), 0.3).unwrap().norm(), 0.0);
        assert!(normal(&x, &sens, &full_mask(8, 8), -1.0).is_err());
    }

    #[test]
    fn normal_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sens = simulate_sensitivities(8, 8, 3, 4).unwrap();
        let m = make_gaussian_mask(8, 8, 2, 2, 1).unwrap();
        for _ in 0..10 {
            let x = ComplexTensor::random(&[1, 8, 8], &mut rng);
            let nx = normal(&x, &sens, &m, 0.0).unwrap();
            let q = inner(&x, &nx).unwrap();
            assert!(q.im.abs() < 1e-5 * q.re.abs().max(1.0));
            assert!(q.re >= -1e-6 * x.norm().powi(2));
        }
    }

    #[test]
    fn forward_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sens = simulate_sensitivities(8, 8, 2, 3).unwrap();
        let m = make_mask(MaskKind::Uniform, 8, 8, 2, 0).unwrap();
        let x1 = ComplexTensor::random(&[1, 8, 8], &mut rng);
        let x2 = ComplexTensor::random(&[1, 8, 8], &mut rng);
        let a = Complex32::new(0.7, -0.3);
        let combo = x1.zip(&x2, |u, v| u * a + v).unwrap();
        let lhs = forward(&combo, &sens, &m).unwrap();
        let rhs = forward(&x1, &sens, &m)
            .unwrap()
            .zip(&forward(&x2, &sens, &m).unwrap(), |u, v| u * a + v)
            .unwrap();
        assert!(rel(&lhs, &rhs) < 1e-5);
    }

    #[test]
    fn retrospective_mask_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let full = ComplexTensor::random(&[2, 1, 16, 16], &mut rng);
        assert_eq!(
            retrospective_undersample(&full, &full_mask(16, 16)).unwrap(),
            full
        );
        let m = make_mask(MaskKind::Uniform, 16, 16, 4, 1).unwrap();
        let us = retrospective_undersample(&full, &m).unwrap();
        let lines = m.sampled_lines();
        for c in 0..2 {
            for x in 0..16 {
                for y in 0..16 {
                    let z = us.at(&[c, 0, x, y]);
                    if lines.contains(&y) {
                        assert_eq!(z, full.at(&[c, 0, x, y]));
                    } else {
                        assert_eq!(z, Complex32::default());
                    }
                }
            }
        }
    }
}
