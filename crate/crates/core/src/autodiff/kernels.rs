//! Plain tensor kernels shared by the tape ops and by inference paths.
//! Layer inputs follow the `[channels, t, x, y]` layout; 2D convolutions act
//! on (x, y) per frame, the temporal convolution acts along t with circular
//! padding.

use crate::error::{Error, Result};
use crate::tensor::{RealTensor, Scalar};

pub fn shape4(t: &RealTensor<impl Scalar>) -> Result<(usize, usize, usize, usize)> {
    let s = t.shape();
    if s.len() != 4 {
        return Err(Error::InvalidShape(format!("expected rank 4, got {s:?}")));
    }
    Ok((s[0], s[1], s[2], s[3]))
}

/// Cross-correlation with zero padding over the trailing two axes.
/// x: [cin, t, h, w], w: [cout, cin, kh, kw], b: [cout].
pub fn conv2d<T: Scalar>(
    x: &RealTensor<T>,
    w: &RealTensor<T>,
    b: &RealTensor<T>,
    stride: usize,
    pad: usize,
) -> Result<RealTensor<T>> {
    let (cin, nt, h, wd) = shape4(x)?;
    let ws = w.shape();
    if ws.len() != 4 || ws[1] != cin {
        return Err(Error::InvalidShape(format!(
            "kernel {ws:?} does not match input channels {cin}"
        )));
    }
    let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
    if b.shape() != [cout] {
        return Err(Error::shape(&[cout], b.shape()));
    }
    if stride == 0 {
        return Err(Error::InvalidArg("stride must be >= 1".into()));
    }
    if h + 2 * pad < kh || wd + 2 * pad < kw {
        return Err(Error::InvalidShape(format!(
            "kernel {kh}x{kw} does not fit padded input {}x{}",
            h + 2 * pad,
            wd + 2 * pad
        )));
    }
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![T::zero(); cout * nt * ho * wo];

    if stride == 1 {
        // row-sliced accumulation; inner loop is a contiguous axpy
        for oc in 0..cout {
            let bias = b.data()[oc];
            for t in 0..nt {
                let oplane = &mut out[(oc * nt + t) * ho * wo..(oc * nt + t + 1) * ho * wo];
                oplane.fill(bias);
            }
            for ic in 0..cin {
                for u in 0..kh {
                    for v in 0..kw {
                        let wv = w.data()[((oc * cin + ic) * kh + u) * kw + v];
                        if wv == T::zero() {
                            continue;
                        }
                        let du = u as isize - pad as isize;
                        let dv = v as isize - pad as isize;
                        let i0 = (-du).max(0) as usize;
                        let i1 = ho.min((h as isize - du).max(0) as usize);
                        let j0 = (-dv).max(0) as usize;
                        let j1 = wo.min((wd as isize - dv).max(0) as usize);
                        if i0 >= i1 || j0 >= j1 {
                            continue;
                        }
                        for t in 0..nt {
                            let xplane = &x.data()[(ic * nt + t) * h * wd..(ic * nt + t + 1) * h * wd];
                            let obase = (oc * nt + t) * ho * wo;
                            for i in i0..i1 {
                                let xi = (i as isize + du) as usize;
                                let xrow = &xplane[xi * wd..(xi + 1) * wd];
                                let orow = &mut out[obase + i * wo..obase + (i + 1) * wo];
                                let src = &xrow[(j0 as isize + dv) as usize..(j1 as isize + dv) as usize];
                                for (o, &s) in orow[j0..j1].iter_mut().zip(src) {
                                    *o = *o + wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
    } else {
        for oc in 0..cout {
            for t in 0..nt {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut acc = b.data()[oc];
                        for ic in 0..cin {
                            for u in 0..kh {
                                let xi = (i * stride + u) as isize - pad as isize;
                                if xi < 0 || xi >= h as isize {
                                    continue;
                                }
                                for v in 0..kw {
                                    let xj = (j * stride + v) as isize - pad as isize;
                                    if xj < 0 || xj >= wd as isize {
                                        continue;
                                    }
                                    acc = acc
                                        + w.data()[((oc * cin + ic) * kh + u) * kw + v]
                                            * x.data()
                                                [((ic * nt + t) * h + xi as usize) * wd + xj as usize];
                                }
                            }
                        }
                        out[((oc * nt + t) * ho + i) * wo + j] = acc;
                    }
                }
            }
        }
    }
    RealTensor::new(vec![cout, nt, ho, wo], out)
}

/// Gradients of [`conv2d`] w.r.t. input, kernel, and bias.
pub fn conv2d_bwd<T: Scalar>(
    x: &RealTensor<T>,
    w: &RealTensor<T>,
    go: &RealTensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(RealTensor<T>, RealTensor<T>, RealTensor<T>)> {
    let (cin, nt, h, wd) = shape4(x)?;
    let (cout, _, kh, kw) = {
        let s = w.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (_, _, ho, wo) = shape4(go)?;
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); cout];

    for oc in 0..cout {
        for t in 0..nt {
            let gplane = &go.data()[(oc * nt + t) * ho * wo..(oc * nt + t + 1) * ho * wo];
            gb[oc] = gb[oc] + gplane.iter().copied().sum::<T>();
        }
        for ic in 0..cin {
            for u in 0..kh {
                for v in 0..kw {
                    let widx = ((oc * cin + ic) * kh + u) * kw + v;
                    let wv = w.data()[widx];
                    let mut gw_acc = T::zero();
                    for t in 0..nt {
                        let gplane =
                            &go.data()[(oc * nt + t) * ho * wo..(oc * nt + t + 1) * ho * wo];
                        let xbase = (ic * nt + t) * h * wd;
                        if stride == 1 {
                            let du = u as isize - pad as isize;
                            let dv = v as isize - pad as isize;
                            let i0 = (-du).max(0) as usize;
                            let i1 = ho.min((h as isize - du).max(0) as usize);
                            let j0 = (-dv).max(0) as usize;
                            let j1 = wo.min((wd as isize - dv).max(0) as usize);
                            for i in i0..i1 {
                                let xi = (i as isize + du) as usize;
                                let grow = &gplane[i * wo..(i + 1) * wo];
                                let xrow0 = xbase + xi * wd;
                                let js = (j0 as isize + dv) as usize;
                                // gw accumulation and gx scatter share bounds
                                for (jj, &g) in grow[j0..j1].iter().enumerate() {
                                    let xj = js + jj;
                                    gw_acc = gw_acc + g * x.data()[xrow0 + xj];
                                    gx[xrow0 + xj] = gx[xrow0 + xj] + wv * g;
                                }
                            }
                        } else {
                            for i in 0..ho {
                                let xi = (i * stride + u) as isize - pad as isize;
                                if xi < 0 || xi >= h as isize {
                                    continue;
                                }
                                for j in 0..wo {
                                    let xj = (j * stride + v) as isize - pad as isize;
                                    if xj < 0 || xj >= wd as isize {
                                        continue;
                                    }
                                    let g = gplane[i * wo + j];
                                    let xoff = xbase + xi as usize * wd + xj as usize;
                                    gw_acc = gw_acc + g * x.data()[xoff];
                                    gx[xoff] = gx[xoff] + wv * g;
                                }
                            }
                        }
                    }
                    gw[widx] = gw[widx] + gw_acc;
                }
            }
        }
    }
    Ok((
        RealTensor::new(x.shape().to_vec(), gx)?,
        RealTensor::new(w.shape().to_vec(), gw)?,
        RealTensor::new(vec![cout], gb)?,
    ))
}

/// 1D cross-correlation along t with circular padding and centered kernel.
/// x: [cin, t, h, w], w: [cout, cin, kt], b: [cout].
pub fn conv1d_t<T: Scalar>(
    x: &RealTensor<T>,
    w: &RealTensor<T>,
    b: &RealTensor<T>,
) -> Result<RealTensor<T>> {
    let (cin, nt, h, wd) = shape4(x)?;
    let ws = w.shape();
    if ws.len() != 3 || ws[1] != cin {
        return Err(Error::InvalidShape(format!(
            "temporal kernel {ws:?} does not match input channels {cin}"
        )));
    }
    let (cout, kt) = (ws[0], ws[2]);
    if b.shape() != [cout] {
        return Err(Error::shape(&[cout], b.shape()));
    }
    if kt > 2 * nt {
        return Err(Error::InvalidArg(format!(
            "temporal kernel {kt} longer than 2*nt = {}",
            2 * nt
        )));
    }
    let plane = h * wd;
    let half = (kt / 2) as isize;
    let mut out = vec![T::zero(); cout * nt * plane];
    for oc in 0..cout {
        for t in 0..nt {
            out[(oc * nt + t) * plane..(oc * nt + t + 1) * plane].fill(b.data()[oc]);
        }
        for ic in 0..cin {
            for k in 0..kt {
                let wv = w.data()[(oc * cin + ic) * kt + k];
                if wv == T::zero() {
                    continue;
                }
                for t in 0..nt {
                    let ts = (t as isize + k as isize - half).rem_euclid(nt as isize) as usize;
                    let src = &x.data()[(ic * nt + ts) * plane..(ic * nt + ts + 1) * plane];
                    let dst = &mut out[(oc * nt + t) * plane..(oc * nt + t + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d + wv * s;
                    }
                }
            }
        }
    }
    RealTensor::new(vec![cout, nt, h, wd], out)
}

pub fn conv1d_t_bwd<T: Scalar>(
    x: &RealTensor<T>,
    w: &RealTensor<T>,
    go: &RealTensor<T>,
) -> Result<(RealTensor<T>, RealTensor<T>, RealTensor<T>)> {
    let (cin, nt, h, wd) = shape4(x)?;
    let (cout, kt) = (w.shape()[0], w.shape()[2]);
    let plane = h * wd;
    let half = (kt / 2) as isize;
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); cout];
    for oc in 0..cout {
        for t in 0..nt {
            let gplane = &go.data()[(oc * nt + t) * plane..(oc * nt + t + 1) * plane];
            gb[oc] = gb[oc] + gplane.iter().copied().sum::<T>();
        }
        for ic in 0..cin {
            for k in 0..kt {
                let widx = (oc * cin + ic) * kt + k;
                let wv = w.data()[widx];
                let mut acc = T::zero();
                for t in 0..nt {
                    let ts = (t as isize + k as isize - half).rem_euclid(nt as isize) as usize;
                    let gplane = &go.data()[(oc * nt + t) * plane..(oc * nt + t + 1) * plane];
                    let xoff = (ic * nt + ts) * plane;
                    for (i, &g) in gplane.iter().enumerate() {
                        acc = acc + g * x.data()[xoff + i];
                        gx[xoff + i] = gx[xoff + i] + wv * g;
                    }
                }
                gw[widx] = gw[widx] + acc;
            }
        }
    }
    Ok((
        RealTensor::new(x.shape().to_vec(), gx)?,
        RealTensor::new(w.shape().to_vec(), gw)?,
        RealTensor::new(vec![cout], gb)?,
    ))
}

/// 2x2 average pooling over (x, y); extents must be even.
pub fn avgpool2<T: Scalar>(x: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (c, nt, h, w) = shape4(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidShape(format!(
            "downsample needs even extents, got {h}x{w}"
        )));
    }
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); c * nt * ho * wo];
    for ct in 0..c * nt {
        let xp = &x.data()[ct * h * w..(ct + 1) * h * w];
        let op = &mut out[ct * ho * wo..(ct + 1) * ho * wo];
        for i in 0..ho {
            for j in 0..wo {
                let s = xp[(2 * i) * w + 2 * j]
                    + xp[(2 * i) * w + 2 * j + 1]
                    + xp[(2 * i + 1) * w + 2 * j]
                    + xp[(2 * i + 1) * w + 2 * j + 1];
                op[i * wo + j] = s * quarter;
            }
        }
    }
    RealTensor::new(vec![c, nt, ho, wo], out)
}

pub fn avgpool2_bwd<T: Scalar>(x_shape: &[usize], go: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (c, nt, ho, wo) = shape4(go)?;
    let (h, w) = (x_shape[2], x_shape[3]);
    let quarter = T::from_f64(0.25);
    let mut gx = vec![T::zero(); c * nt * h * w];
    for ct in 0..c * nt {
        let gp = &go.data()[ct * ho * wo..(ct + 1) * ho * wo];
        let xp = &mut gx[ct * h * w..(ct + 1) * h * w];
        for i in 0..ho {
            for j in 0..wo {
                let g = gp[i * wo + j] * quarter;
                xp[(2 * i) * w + 2 * j] = xp[(2 * i) * w + 2 * j] + g;
                xp[(2 * i) * w + 2 * j + 1] = xp[(2 * i) * w + 2 * j + 1] + g;
                xp[(2 * i + 1) * w + 2 * j] = xp[(2 * i + 1) * w + 2 * j] + g;
                xp[(2 * i + 1) * w + 2 * j + 1] = xp[(2 * i + 1) * w + 2 * j + 1] + g;
            }
        }
    }
    RealTensor::new(x_shape.to_vec(), gx)
}

/// Nearest-neighbour 2x upsampling over (x, y).
pub fn upsample2<T: Scalar>(x: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (c, nt, h, w) = shape4(x)?;
    let (ho, wo) = (h * 2, w * 2);
    let mut out = vec![T::zero(); c * nt * ho * wo];
    for ct in 0..c * nt {
        let xp = &x.data()[ct * h * w..(ct + 1) * h * w];
        let op = &mut out[ct * ho * wo..(ct + 1) * ho * wo];
        for i in 0..ho {
            let xi = i / 2;
            for j in 0..wo {
                op[i * wo + j] = xp[xi * w + j / 2];
            }
        }
    }
    RealTensor::new(vec![c, nt, ho, wo], out)
}

pub fn upsample2_bwd<T: Scalar>(x_shape: &[usize], go: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (c, nt, ho, wo) = shape4(go)?;
    let (h, w) = (x_shape[2], x_shape[3]);
    let mut gx = vec![T::zero(); c * nt * h * w];
    for ct in 0..c * nt {
        let gp = &go.data()[ct * ho * wo..(ct + 1) * ho * wo];
        let xp = &mut gx[ct * h * w..(ct + 1) * h * w];
        for i in 0..ho {
            for j in 0..wo {
                let off = (i / 2) * w + j / 2;
                xp[off] = xp[off] + gp[i * wo + j];
            }
        }
    }
    RealTensor::new(x_shape.to_vec(), gx)
}

/// Bilinear resize of per-map spatial planes. x: [c, h, w] -> [c, ho, wo].
pub fn bilinear_resize<T: Scalar>(x: &RealTensor<T>, ho: usize, wo: usize) -> Result<RealTensor<T>> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(Error::InvalidShape(format!("expected [c, h, w], got {s:?}")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let mut out = vec![T::zero(); c * ho * wo];
    for (i, j, x0, x1, wx, y0, y1, wy) in resize_coords(h, w, ho, wo) {
        for ch in 0..c {
            let xp = &x.data()[ch * h * w..(ch + 1) * h * w];
            let a = xp[x0 * w + y0].to_f64_();
            let b = xp[x0 * w + y1].to_f64_();
            let cc = xp[x1 * w + y0].to_f64_();
            let d = xp[x1 * w + y1].to_f64_();
            let v = a * (1.0 - wx) * (1.0 - wy)
                + b * (1.0 - wx) * wy
                + cc * wx * (1.0 - wy)
                + d * wx * wy;
            out[ch * ho * wo + i * wo + j] = T::from_f64(v);
        }
    }
    RealTensor::new(vec![c, ho, wo], out)
}

pub fn bilinear_resize_bwd<T: Scalar>(
    x_shape: &[usize],
    go: &RealTensor<T>,
) -> Result<RealTensor<T>> {
    let (c, h, w) = (x_shape[0], x_shape[1], x_shape[2]);
    let (ho, wo) = (go.shape()[1], go.shape()[2]);
    let mut gx = vec![T::zero(); c * h * w];
    for (i, j, x0, x1, wx, y0, y1, wy) in resize_coords(h, w, ho, wo) {
        for ch in 0..c {
            let g = go.data()[ch * ho * wo + i * wo + j].to_f64_();
            let gp = &mut gx[ch * h * w..(ch + 1) * h * w];
            gp[x0 * w + y0] = gp[x0 * w + y0] + T::from_f64(g * (1.0 - wx) * (1.0 - wy));
            gp[x0 * w + y1] = gp[x0 * w + y1] + T::from_f64(g * (1.0 - wx) * wy);
            gp[x1 * w + y0] = gp[x1 * w + y0] + T::from_f64(g * wx * (1.0 - wy));
            gp[x1 * w + y1] = gp[x1 * w + y1] + T::from_f64(g * wx * wy);
        }
    }
    RealTensor::new(x_shape.to_vec(), gx)
}

#[allow(clippy::type_complexity)]
fn resize_coords(
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
) -> Vec<(usize, usize, usize, usize, f64, usize, usize, f64)> {
    let mut coords = Vec::with_capacity(ho * wo);
    for i in 0..ho {
        let sx = ((i as f64 + 0.5) * h as f64 / ho as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = sx.floor() as usize;
        let x1 = (x0 + 1).min(h - 1);
        let wx = sx - x0 as f64;
        for j in 0..wo {
            let sy = ((j as f64 + 0.5) * w as f64 / wo as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(w - 1);
            let wy = sy - y0 as f64;
            coords.push((i, j, x0, x1, wx, y0, y1, wy));
        }
    }
    coords
}

/// Numerically stable softmax over a rank-1 tensor.
pub fn softmax<T: Scalar>(x: &RealTensor<T>) -> Result<RealTensor<T>> {
    if x.ndim() != 1 {
        return Err(Error::InvalidShape(format!(
            "softmax expects rank 1, got {:?}",
            x.shape()
        )));
    }
    let m = x.data().iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.data().iter().map(|&v| (v - m).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    RealTensor::new(
        x.shape().to_vec(),
        exps.into_iter().map(|e| e / sum).collect(),
    )
}

pub fn softmax_bwd<T: Scalar>(y: &RealTensor<T>, go: &RealTensor<T>) -> RealTensor<T> {
    let dot: T = y
        .data()
        .iter()
        .zip(go.data())
        .map(|(&s, &g)| s * g)
        .sum();
    RealTensor::new(
        y.shape().to_vec(),
        y.data()
            .iter()
            .zip(go.data())
            .map(|(&s, &g)| s * (g - dot))
            .collect(),
    )
    .expect("same shape")
}

/// Circular shift of the trailing two axes by (dx, dy) per channel/frame.
pub fn circ_shift_xy<T: Scalar>(x: &RealTensor<T>, dx: i64, dy: i64) -> Result<RealTensor<T>> {
    let (c, nt, h, w) = shape4(x)?;
    let sx = dx.rem_euclid(h as i64) as usize;
    let sy = dy.rem_euclid(w as i64) as usize;
    let mut out = vec![T::zero(); x.len()];
    for ct in 0..c * nt {
        let xp = &x.data()[ct * h * w..(ct + 1) * h * w];
        let op = &mut out[ct * h * w..(ct + 1) * h * w];
        for i in 0..h {
            let id = (i + sx) % h;
            let src = &xp[i * w..(i + 1) * w];
            let dst = &mut op[id * w..(id + 1) * w];
            dst[sy..].copy_from_slice(&src[..w - sy]);
            dst[..sy].copy_from_slice(&src[w - sy..]);
        }
    }
    RealTensor::new(x.shape().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4(shape: &[usize], vals: &[f32]) -> RealTensor<f32> {
        RealTensor::new(shape.to_vec(), vals.to_vec()).unwrap()
    }

    #[test]
    fn conv2d_identity_kernel() {
        let x = RealTensor::from_fn(&[1, 1, 3, 3], |i| (i[2] * 3 + i[3]) as f32);
        let w = t4(&[1, 1, 1, 1], &[1.0]);
        let b = t4(&[1], &[0.0]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv2d_ones_kernel_on_constant() {
        let c = 0.7f32;
        let x = RealTensor::full(&[1, 1, 5, 5], c);
        let w = RealTensor::full(&[1, 1, 3, 3], 1.0f32);
        let b = t4(&[1], &[0.0]);
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        // interior pixels see the full window
        assert!((y.data()[2 * 5 + 2] - 9.0 * c).abs() < 1e-6);
        // corner sees 4 cells
        assert!((y.data()[0] - 4.0 * c).abs() < 1e-6);
    }

    #[test]
    fn conv2d_channel_mismatch_errors() {
        let x = RealTensor::<f32>::zeros(&[2, 1, 4, 4]);
        let w = RealTensor::<f32>::zeros(&[1, 3, 3, 3]);
        let b = RealTensor::<f32>::zeros(&[1]);
        assert!(conv2d(&x, &w, &b, 1, 1).is_err());
    }

    #[test]
    fn conv2d_stride2_shapes() {
        let x = RealTensor::<f32>::zeros(&[1, 1, 8, 8]);
        let w = RealTensor::<f32>::zeros(&[3, 1, 3, 3]);
        let b = RealTensor::<f32>::zeros(&[3]);
        let y = conv2d(&x, &w, &b, 2, 1).unwrap();
        assert_eq!(y.shape(), &[3, 1, 4, 4]);
    }

    #[test]
    fn conv1dt_center_tap_is_identity() {
        let x = RealTensor::from_fn(&[1, 3, 2, 2], |i| (i[1] * 4 + i[2] * 2 + i[3]) as f32 + 1.0);
        let w = RealTensor::new(vec![1, 1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let b = t4(&[1], &[0.0]);
        let y = conv1d_t(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv1dt_left_tap_rotates_frames() {
        // kernel [1,0,0] picks frame t-1 (circular): [a,b,c] -> [c,a,b]
        let x = RealTensor::new(vec![1, 3, 1, 1], vec![1.0f32, 2.0, 3.0]).unwrap();
        let w = RealTensor::new(vec![1, 1, 3], vec![1.0, 0.0, 0.0]).unwrap();
        let b = t4(&[1], &[0.0]);
        let y = conv1d_t(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[3.0, 1.0, 2.0]);
    }

    #[test]
    fn conv1dt_kernel_too_long_errors() {
        let x = RealTensor::<f32>::zeros(&[1, 1, 2, 2]);
        let w = RealTensor::<f32>::zeros(&[1, 1, 3]);
        let b = RealTensor::<f32>::zeros(&[1]);
        assert!(conv1d_t(&x, &w, &b).is_err());
    }

    #[test]
    fn pool_then_upsample_preserves_constant() {
        let x = RealTensor::full(&[2, 1, 4, 4], 1.25f32);
        let y = upsample2(&avgpool2(&x).unwrap()).unwrap();
        assert_eq!(y.shape(), x.shape());
        for &v in y.data() {
            assert!((v - 1.25).abs() < 1e-6);
        }
    }

    #[test]
    fn pool_odd_extent_errors() {
        let x = RealTensor::<f32>::zeros(&[1, 1, 3, 4]);
        assert!(avgpool2(&x).is_err());
    }

    #[test]
    fn softmax_normalizes() {
        let x = RealTensor::new(vec![3], vec![1.0f32, 2.0, 3.0]).unwrap();
        let s = softmax(&x).unwrap();
        let sum: f32 = s.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(s.data()[2] > s.data()[1] && s.data()[1] > s.data()[0]);
        let one = softmax(&RealTensor::new(vec![1], vec![5.0f32]).unwrap()).unwrap();
        assert_eq!(one.data(), &[1.0]);
    }

    #[test]
    fn bilinear_resize_constant_stays_constant() {
        let x = RealTensor::full(&[2, 4, 4], 3.5f32);
        let y = bilinear_resize(&x, 7, 9).unwrap();
        for &v in y.data() {
            assert!((v - 3.5).abs() < 1e-6);
        }
    }

    #[test]
    fn circ_shift_xy_matches_expected() {
        // single-channel analog of the two-channel shift: [1,2;3,4] shifted
        // by 1 along y gives [2,1;4,3]
        let x = RealTensor::new(vec![1, 1, 2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let y = circ_shift_xy(&x, 0, 1).unwrap();
        assert_eq!(y.data(), &[2.0, 1.0, 4.0, 3.0]);
    }
}
