//! Centered orthonormal 2D FFT over the trailing two axes.
//!
//! The centered convention (`shift -> FFT -> shift` with `1/sqrt(N)` scaling)
//! keeps DC at index `(nx/2, ny/2)`, matching how k-space masks are laid out.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Scalar};

// One plan cache per precision. rustfft plans are Send + Sync.
static PLANS_F32: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f32>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));
static PLANS_F64: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn direction(inverse: bool) -> FftDirection {
    if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    }
}

pub(crate) fn plan_f32(n: usize, inverse: bool) -> Arc<dyn Fft<f32>> {
    let mut cache = PLANS_F32.lock().unwrap();
    cache
        .entry((n, inverse))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction(inverse)))
        .clone()
}

pub(crate) fn plan_f64(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS_F64.lock().unwrap();
    cache
        .entry((n, inverse))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction(inverse)))
        .clone()
}

/// Circular shift a contiguous `nx x ny` plane by (sx, sy), element i -> i+s.
fn shift_plane<T: Copy + Default>(buf: &mut [T], nx: usize, ny: usize, sx: usize, sy: usize) {
    if sx == 0 && sy == 0 {
        return;
    }
    let mut out = vec![T::default(); buf.len()];
    for x in 0..nx {
        let xd = (x + sx) % nx;
        let src = &buf[x * ny..(x + 1) * ny];
        let dst = &mut out[xd * ny..(xd + 1) * ny];
        dst[sy..].copy_from_slice(&src[..ny - sy]);
        dst[..sy].copy_from_slice(&src[ny - sy..]);
    }
    buf.copy_from_slice(&out);
}

/// In-place centered orthonormal 2D transform of one `nx x ny` plane.
pub fn fft2c_plane<T: Scalar>(buf: &mut [Complex<T>], nx: usize, ny: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), nx * ny);
    // ifftshift: index n/2 -> 0
    shift_plane(buf, nx, ny, nx.div_ceil(2), ny.div_ceil(2));

    let row_fft = T::fft_plan(ny, inverse);
    let mut scratch = vec![Complex::<T>::default(); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(ny) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    // columns via transpose
    let mut tr = vec![Complex::<T>::default(); buf.len()];
    for x in 0..nx {
        for y in 0..ny {
            tr[y * nx + x] = buf[x * ny + y];
        }
    }
    let col_fft = T::fft_plan(nx, inverse);
    scratch.resize(col_fft.get_inplace_scratch_len(), Complex::default());
    for col in tr.chunks_exact_mut(nx) {
        col_fft.process_with_scratch(col, &mut scratch);
    }
    for y in 0..ny {
        for x in 0..nx {
            buf[x * ny + y] = tr[y * nx + x];
        }
    }

    // fftshift: index 0 -> n/2
    shift_plane(buf, nx, ny, nx / 2, ny / 2);

    let scale = T::one() / T::from_f64(((nx * ny) as f64).sqrt());
    for z in buf.iter_mut() {
        *z = z.scale(scale);
    }
}

fn transform(t: &ComplexTensor, inverse: bool) -> Result<ComplexTensor> {
    if t.ndim() < 2 {
        return Err(Error::InvalidShape(format!(
            "need at least 2 spatial axes, got shape {:?}",
            t.shape()
        )));
    }
    let ny = t.shape()[t.ndim() - 1];
    let nx = t.shape()[t.ndim() - 2];
    let mut out = t.clone();
    for plane in out.data_mut().chunks_exact_mut(nx * ny) {
        fft2c_plane(plane, nx, ny, inverse);
    }
    Ok(out)
}

/// Centered orthonormal 2D DFT over the last two axes, applied per leading index.
pub fn fft2c(img: &ComplexTensor) -> Result<ComplexTensor> {
    transform(img, false)
}

/// Inverse of [`fft2c`], same conventions.
pub fn ifft2c(ksp: &ComplexTensor) -> Result<ComplexTensor> {
    transform(ksp, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Complex32;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &ComplexTensor, b: &ComplexTensor) -> f64 {
        let diff = a.sub(b).unwrap().norm();
        diff / b.norm().max(1e-30)
    }

    #[test]
    fn centered_impulse_gives_flat_spectrum() {
        let (nx, ny) = (8, 6);
        let mut img = ComplexTensor::zeros(&[nx, ny]);
        img.set(&[nx / 2, ny / 2], Complex32::new(1.0, 0.0));
        let ksp = fft2c(&img).unwrap();
        let want = 1.0 / ((nx * ny) as f32).sqrt();
        for z in ksp.data() {
            assert!((z.re - want).abs() < 1e-6 && z.im.abs() < 1e-6, "{z}");
        }
    }

    #[test]
    fn flat_spectrum_gives_centered_impulse() {
        let (nx, ny) = (8, 8);
        let flat = ComplexTensor::from_fn(&[nx, ny], |_| {
            Complex32::new(1.0 / ((nx * ny) as f32).sqrt(), 0.0)
        });
        let img = ifft2c(&flat).unwrap();
        for x in 0..nx {
            for y in 0..ny {
                let z = img.at(&[x, y]);
                let want = if x == nx / 2 && y == ny / 2 { 1.0 } else { 0.0 };
                assert!((z.re - want).abs() < 1e-6 && z.im.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn round_trip_both_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = ComplexTensor::random(&[16, 16], &mut rng);
        assert!(rel_err(&ifft2c(&fft2c(&x).unwrap()).unwrap(), &x) < 1e-6);
        assert!(rel_err(&fft2c(&ifft2c(&x).unwrap()).unwrap(), &x) < 1e-6);
    }

    #[test]
    fn round_trip_batched_up_to_64x64x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for shape in [vec![64, 64], vec![8, 64, 64], vec![2, 4, 16, 16]] {
            let x = ComplexTensor::random(&shape, &mut rng);
            assert!(rel_err(&ifft2c(&fft2c(&x).unwrap()).unwrap(), &x) < 1e-5);
        }
    }

    #[test]
    fn parseval_norm_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = ComplexTensor::random(&[8, 8], &mut rng);
        let y = fft2c(&x).unwrap();
        assert!((x.norm() - y.norm()).abs() / x.norm() < 1e-6);
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = ComplexTensor::zeros(&[4, 4]);
        assert_eq!(ifft2c(&z).unwrap(), z);
        assert_eq!(fft2c(&z).unwrap(), z);
    }

    #[test]
    fn rank_one_rejected() {
        let t = ComplexTensor::zeros(&[4]);
        assert!(fft2c(&t).is_err());
    }

    #[test]
    fn odd_extents_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x = ComplexTensor::random(&[5, 7], &mut rng);
        assert!(rel_err(&ifft2c(&fft2c(&x).unwrap()).unwrap(), &x) < 1e-5);
    }
}
