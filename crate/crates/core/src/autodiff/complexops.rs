//! Kernels for complex-valued linear MRI operators on the two-channel real
//! layout `[2, ..., x, y]` (channel 0 = re, channel 1 = im). Backward passes
//! of these linear maps are their complex adjoints, which on the two-channel
//! representation coincide with the real transpose.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::fft2c_plane;
use crate::tensor::{RealTensor, Scalar};

fn split_2ch<T: Scalar>(x: &RealTensor<T>) -> Result<(usize, usize, usize)> {
    let s = x.shape();
    if s.len() < 3 || s[0] != 2 {
        return Err(Error::InvalidShape(format!(
            "expected [2, ..., x, y], got {s:?}"
        )));
    }
    let ny = s[s.len() - 1];
    let nx = s[s.len() - 2];
    let lead: usize = s[1..s.len() - 2].iter().product();
    Ok((lead, nx, ny))
}

/// Centered orthonormal 2D FFT over the trailing axes of a 2-channel tensor.
pub fn fft2c_2ch<T: Scalar>(x: &RealTensor<T>, inverse: bool) -> Result<RealTensor<T>> {
    let (lead, nx, ny) = split_2ch(x)?;
    let plane = nx * ny;
    let half = lead * plane;
    let mut out = RealTensor::zeros(x.shape());
    let mut buf = vec![Complex::<T>::default(); plane];
    for l in 0..lead {
        let re = &x.data()[l * plane..(l + 1) * plane];
        let im = &x.data()[half + l * plane..half + (l + 1) * plane];
        for (b, (&r, &i)) in buf.iter_mut().zip(re.iter().zip(im)) {
            *b = Complex::new(r, i);
        }
        fft2c_plane(&mut buf, nx, ny, inverse);
        let (lo, hi) = out.data_mut().split_at_mut(half);
        for (k, z) in buf.iter().enumerate() {
            lo[l * plane + k] = z.re;
            hi[l * plane + k] = z.im;
        }
    }
    Ok(out)
}

/// Complex sensitivity maps as a `[2, ncoils, nx, ny]` real tensor.
pub fn sens_to_2ch<T: Scalar>(maps: &crate::tensor::ComplexTensor) -> RealTensor<T> {
    let s = maps.shape();
    let n = maps.len();
    let mut data = vec![T::zero(); 2 * n];
    for (i, z) in maps.data().iter().enumerate() {
        data[i] = T::from_f64(z.re as f64);
        data[n + i] = T::from_f64(z.im as f64);
    }
    let mut shape = vec![2];
    shape.extend_from_slice(s);
    RealTensor::new(shape, data).expect("sized")
}

/// Coil expansion: image [2, t, x, y] -> coil images [2, C, t, x, y],
/// out_c = S_c * x (complex pointwise product).
pub fn sens_expand<T: Scalar>(x: &RealTensor<T>, sens: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (nt_lead, nx, ny) = split_2ch(x)?;
    let sc = sens.shape();
    let ncoil = sc[1];
    if sc[2] != nx || sc[3] != ny {
        return Err(Error::shape(&[2, ncoil, nx, ny], sc));
    }
    let plane = nx * ny;
    let nimg = nt_lead * plane;
    let nout = ncoil * nt_lead * plane;
    let (xr, xi) = x.data().split_at(nimg);
    let (sr, si) = sens.data().split_at(ncoil * plane);
    let mut out = vec![T::zero(); 2 * nout];
    for c in 0..ncoil {
        let (scr, sci) = (&sr[c * plane..(c + 1) * plane], &si[c * plane..(c + 1) * plane]);
        for t in 0..nt_lead {
            let (pr, pi) = (&xr[t * plane..(t + 1) * plane], &xi[t * plane..(t + 1) * plane]);
            let base = (c * nt_lead + t) * plane;
            for k in 0..plane {
                out[base + k] = scr[k] * pr[k] - sci[k] * pi[k];
                out[nout + base + k] = scr[k] * pi[k] + sci[k] * pr[k];
            }
        }
    }
    let mut shape = vec![2, ncoil];
    shape.extend_from_slice(&x.shape()[1..]);
    RealTensor::new(shape, out)
}

/// Coil combination (adjoint of expansion): [2, C, t, x, y] -> [2, t, x, y],
/// sum_c conj(S_c) * y_c.
pub fn sens_combine<T: Scalar>(y: &RealTensor<T>, sens: &RealTensor<T>) -> Result<RealTensor<T>> {
    let s = y.shape();
    if s.len() < 4 || s[0] != 2 {
        return Err(Error::InvalidShape(format!(
            "expected [2, coil, ..., x, y], got {s:?}"
        )));
    }
    let ncoil = s[1];
    let ny = s[s.len() - 1];
    let nx = s[s.len() - 2];
    let plane = nx * ny;
    let nt_lead: usize = s[2..s.len() - 2].iter().product();
    let sc = sens.shape();
    if sc[1] != ncoil || sc[2] != nx || sc[3] != ny {
        return Err(Error::shape(&[2, ncoil, nx, ny], sc));
    }
    let nin = ncoil * nt_lead * plane;
    let (yr, yi) = y.data().split_at(nin);
    let (sr, si) = sens.data().split_at(ncoil * plane);
    let nout = nt_lead * plane;
    let mut out = vec![T::zero(); 2 * nout];
    for c in 0..ncoil {
        let (scr, sci) = (&sr[c * plane..(c + 1) * plane], &si[c * plane..(c + 1) * plane]);
        for t in 0..nt_lead {
            let base = (c * nt_lead + t) * plane;
            let (pr, pi) = (&yr[base..base + plane], &yi[base..base + plane]);
            for k in 0..plane {
                // conj(S) * y
                out[t * plane + k] = out[t * plane + k] + scr[k] * pr[k] + sci[k] * pi[k];
                out[nout + t * plane + k] =
                    out[nout + t * plane + k] + scr[k] * pi[k] - sci[k] * pr[k];
            }
        }
    }
    let mut shape = vec![2];
    shape.extend_from_slice(&s[2..]);
    RealTensor::new(shape, out)
}

/// Multiply both channels by a binary mask broadcast over leading axes.
pub fn mask_mul<T: Scalar>(x: &RealTensor<T>, mask: &[u8]) -> Result<RealTensor<T>> {
    let (lead, nx, ny) = split_2ch(x)?;
    let plane = nx * ny;
    if mask.len() != plane {
        return Err(Error::InvalidShape(format!(
            "mask has {} cells, plane is {plane}",
            mask.len()
        )));
    }
    let mut out = x.clone();
    for l in 0..2 * lead {
        let chunk = &mut out.data_mut()[l * plane..(l + 1) * plane];
        for (v, &m) in chunk.iter_mut().zip(mask) {
            if m == 0 {
                *v = T::zero();
            }
        }
    }
    Ok(out)
}

/// The full normal operator `E^H E x` on the two-channel layout
/// (no Tikhonov term). Self-adjoint, so it is its own backward map.
pub fn normal_apply<T: Scalar>(
    x: &RealTensor<T>,
    sens: &RealTensor<T>,
    mask: &[u8],
) -> Result<RealTensor<T>> {
    let coil = sens_expand(x, sens)?;
    let ksp = fft2c_2ch(&coil, false)?;
    let masked = mask_mul(&ksp, mask)?;
    let img = fft2c_2ch(&masked, true)?;
    sens_combine(&img, sens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{full_mask, normal, simulate_sensitivities};
    use crate::sampling::{make_mask, MaskKind};
    use crate::tensor::ComplexTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fft_2ch_matches_complex_tensor_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexTensor::random(&[3, 8, 8], &mut rng);
        let via_2ch = fft2c_2ch::<f32>(&x.to_two_channel(), false).unwrap();
        let direct = crate::fft::fft2c(&x).unwrap().to_two_channel();
        let diff: f32 = via_2ch
            .data()
            .iter()
            .zip(direct.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(diff < 1e-5);
    }

    #[test]
    fn normal_2ch_matches_complex_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ComplexTensor::random(&[2, 8, 8], &mut rng);
        let sens = simulate_sensitivities(8, 8, 3, 4).unwrap();
        let mask = make_mask(MaskKind::GaussianRandom, 8, 8, 2, 1).unwrap();
        let want = normal(&x, &sens, &mask, 0.0).unwrap().to_two_channel();
        let got = normal_apply::<f32>(
            &x.to_two_channel(),
            &sens_to_2ch(&sens.maps),
            &mask.grid,
        )
        .unwrap();
        let denom = want.norm().max(1e-20);
        let mut num = 0.0f64;
        for (a, b) in got.data().iter().zip(want.data()) {
            num += ((a - b) as f64).powi(2);
        }
        assert!(num.sqrt() / denom < 1e-5);
    }

    #[test]
    fn expand_combine_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sens = sens_to_2ch::<f64>(&simulate_sensitivities(6, 6, 4, 7).unwrap().maps);
        let x = RealTensor::from_fn(&[2, 2, 6, 6], |_| rng.gen_range(-1.0..1.0));
        let y = RealTensor::from_fn(&[2, 4, 2, 6, 6], |_| rng.gen_range(-1.0..1.0));
        let ex = sens_expand(&x, &sens).unwrap();
        let ehy = sens_combine(&y, &sens).unwrap();
        let lhs: f64 = ex.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(ehy.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn full_mask_is_identity_on_kspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = RealTensor::<f32>::from_fn(&[2, 1, 4, 4], |_| rng.gen_range(-1.0..1.0));
        let m = full_mask(4, 4);
        assert_eq!(mask_mul(&x, &m.grid).unwrap().data(), x.data());
    }

    use rand::Rng;
}
