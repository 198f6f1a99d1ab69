//! Dense n-dimensional tensors: complex single-precision arrays for images,
//! k-space and sensitivities, plus a real-valued tensor generic over the
//! element type (f32 for training, f64 for gradient-check shadow mode).
//!
//! Axis order is fixed as `[coil?, t?, x, y]` with the last two axes spatial.
//! Storage is row-major (last axis fastest). Tensors are immutable for all
//! read operations; every op allocates a fresh result.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};

pub type Complex32 = Complex<f32>;
pub type Complex64 = Complex<f64>;

/// Element type usable by the numeric kernels and the autodiff tape.
pub trait Scalar:
    rustfft::FftNum
    + num_traits::Float
    + num_traits::FloatConst
    + std::iter::Sum
    + std::fmt::Display
    + Default
{
    fn from_f64(v: f64) -> Self;
    fn to_f64_(self) -> f64;
    /// Cached FFT plan of length `n` for this precision.
    fn fft_plan(n: usize, inverse: bool) -> std::sync::Arc<dyn rustfft::Fft<Self>>;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64_(self) -> f64 {
        self as f64
    }
    fn fft_plan(n: usize, inverse: bool) -> std::sync::Arc<dyn rustfft::Fft<f32>> {
        crate::fft::plan_f32(n, inverse)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64_(self) -> f64 {
        self
    }
    fn fft_plan(n: usize, inverse: bool) -> std::sync::Arc<dyn rustfft::Fft<f64>> {
        crate::fft::plan_f64(n, inverse)
    }
}

/// n-dimensional complex-valued array, row-major, 32-bit components.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex32>,
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidShape(format!("zero extent in {shape:?}")));
        }
        if n != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} holds {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![Complex32::default(); n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> Complex32) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn random(shape: &[usize], rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex32> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, (&ix, &ext)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(ix < ext, "index {ix} out of range on axis {i}");
            off = off * ext + ix;
        }
        off
    }

    pub fn at(&self, idx: &[usize]) -> Complex32 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex32) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn map(&self, f: impl Fn(Complex32) -> Complex32) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, a: f32) -> Self {
        self.map(|z| z * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Complex32, Complex32) -> Complex32) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(&self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// l2 norm with 64-bit accumulation.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|z| z.re as f64 * z.re as f64 + z.im as f64 * z.im as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Pointwise magnitude as a real tensor of the same shape.
    pub fn magnitude(&self) -> RealTensor<f32> {
        RealTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Split re/im into a `[2, ...shape]` real tensor (channel 0 = re).
    pub fn to_two_channel(&self) -> RealTensor<f32> {
        let mut shape = Vec::with_capacity(self.ndim() + 1);
        shape.push(2);
        shape.extend_from_slice(&self.shape);
        let n = self.len();
        let mut data = vec![0.0f32; 2 * n];
        for (i, z) in self.data.iter().enumerate() {
            data[i] = z.re;
            data[n + i] = z.im;
        }
        RealTensor { shape, data }
    }

    /// Inverse of [`to_two_channel`](Self::to_two_channel).
    pub fn from_two_channel(t: &RealTensor<f32>) -> Result<Self> {
        if t.shape.first() != Some(&2) {
            return Err(Error::InvalidShape(format!(
                "expected leading extent 2, got {:?}",
                t.shape
            )));
        }
        let n = t.len() / 2;
        let data = (0..n)
            .map(|i| Complex32::new(t.data[i], t.data[n + i]))
            .collect();
        Self::new(t.shape[1..].to_vec(), data)
    }
}

/// Circular shift along one axis: the element at position `i` moves to
/// `(i + offset) mod extent`. The offset may be any integer.
pub fn circ_shift(t: &ComplexTensor, axis: usize, offset: i64) -> Result<ComplexTensor> {
    if axis >= t.ndim() {
        return Err(Error::InvalidArg(format!(
            "axis {axis} out of range for rank {}",
            t.ndim()
        )));
    }
    let n = t.shape[axis] as i64;
    let k = offset.rem_euclid(n) as usize;
    if k == 0 {
        return Ok(t.clone());
    }
    let inner: usize = t.shape[axis + 1..].iter().product();
    let outer: usize = t.shape[..axis].iter().product();
    let ext = t.shape[axis];
    let mut out = vec![Complex32::default(); t.len()];
    for o in 0..outer {
        let base = o * ext * inner;
        for i in 0..ext {
            let j = (i + k) % ext;
            let src = base + i * inner;
            let dst = base + j * inner;
            out[dst..dst + inner].copy_from_slice(&t.data[src..src + inner]);
        }
    }
    Ok(ComplexTensor {
        shape: t.shape.clone(),
        data: out,
    })
}

/// `sum conj(a_i) * b_i` with 64-bit accumulation.
pub fn inner(a: &ComplexTensor, b: &ComplexTensor) -> Result<Complex64> {
    if a.shape != b.shape {
        return Err(Error::shape(&a.shape, &b.shape));
    }
    let mut re = 0.0f64;
    let mut im = 0.0f64;
    for (za, zb) in a.data.iter().zip(&b.data) {
        let (ar, ai) = (za.re as f64, za.im as f64);
        let (br, bi) = (zb.re as f64, zb.im as f64);
        re += ar * br + ai * bi;
        im += ar * bi - ai * br;
    }
    Ok(Complex64::new(re, im))
}

/// Dense real-valued tensor, row-major, generic over element precision.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> RealTensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} holds {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn item(&self) -> T {
        debug_assert_eq!(self.len(), 1);
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> RealTensor<U> {
        RealTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64_())).collect(),
        }
    }

    pub fn add_into(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.to_f64_() * v.to_f64_())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.to_f64_().abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_product_must_match_data_len() {
        assert!(ComplexTensor::new(vec![2, 3], vec![Complex32::default(); 5]).is_err());
        assert!(ComplexTensor::new(vec![2, 3], vec![Complex32::default(); 6]).is_ok());
        assert!(ComplexTensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn circ_shift_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = ComplexTensor::random(&[3, 5], &mut rng);
        assert_eq!(circ_shift(&t, 1, 0).unwrap(), t);
        assert_eq!(circ_shift(&t, 1, 5).unwrap(), t);
        assert_eq!(circ_shift(&t, 0, -3).unwrap(), t);
    }

    #[test]
    fn circ_shift_by_one_moves_elements_forward() {
        let t = ComplexTensor::new(
            vec![4],
            [1.0, 2.0, 3.0, 4.0]
                .iter()
                .map(|&r| Complex32::new(r, 0.0))
                .collect(),
        )
        .unwrap();
        let s = circ_shift(&t, 0, 1).unwrap();
        let got: Vec<f32> = s.data().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn circ_shift_composed_with_negation_is_exact_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &off in &[1i64, 3, 7, -2, 13] {
            let t = ComplexTensor::random(&[2, 6, 4], &mut rng);
            for axis in 0..3 {
                let back = circ_shift(&circ_shift(&t, axis, off).unwrap(), axis, -off).unwrap();
                assert_eq!(back, t, "axis {axis} offset {off}");
            }
        }
    }

    #[test]
    fn circ_shift_invalid_axis_errors() {
        let t = ComplexTensor::zeros(&[2, 2]);
        assert!(circ_shift(&t, 2, 1).is_err());
    }

    #[test]
    fn inner_self_is_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = ComplexTensor::random(&[4, 4], &mut rng);
        let ip = inner(&t, &t).unwrap();
        assert!(ip.im.abs() < 1e-12);
        assert!((ip.re - t.norm().powi(2)).abs() < 1e-6 * ip.re.max(1.0));
    }

    #[test]
    fn inner_hermitian_symmetry_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ComplexTensor::random(&[3, 3], &mut rng);
        let b = ComplexTensor::random(&[3, 3], &mut rng);
        let c = ComplexTensor::random(&[3, 3], &mut rng);
        let ab = inner(&a, &b).unwrap();
        let ba = inner(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-9 * (1.0 + ab.norm()));

        // linearity in the second argument: <a, b + 2c> = <a,b> + 2<a,c>
        let b2c = b.zip(&c, |x, y| x + y * 2.0).unwrap();
        let lhs = inner(&a, &b2c).unwrap();
        let rhs = ab + inner(&a, &c).unwrap() * 2.0;
        assert!((lhs - rhs).norm() < 1e-6 * (1.0 + lhs.norm()));
    }

    #[test]
    fn inner_hand_computed() {
        let a = ComplexTensor::new(vec![1], vec![Complex32::new(1.0, 1.0)]).unwrap();
        let b = ComplexTensor::new(vec![1], vec![Complex32::new(2.0, 0.0)]).unwrap();
        let ip = inner(&a, &b).unwrap();
        assert_eq!(ip, Complex64::new(2.0, -2.0));
    }

    #[test]
    fn inner_shape_mismatch_errors() {
        let a = ComplexTensor::zeros(&[2]);
        let b = ComplexTensor::zeros(&[3]);
        assert!(inner(&a, &b).is_err());
    }

    #[test]
    fn two_channel_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = ComplexTensor::random(&[3, 4, 5], &mut rng);
        let rt = t.to_two_channel();
        assert_eq!(rt.shape(), &[2, 3, 4, 5]);
        let back = ComplexTensor::from_two_channel(&rt).unwrap();
        assert_eq!(back, t);
    }
}
