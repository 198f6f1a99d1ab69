//! Receptive-field enlargement by channel-shifting: the two-channel input is
//! augmented with circularly shifted replicas concatenated along channels,
//! so a small kernel reaches locations separated by large fractions of the
//! FOV in the shifted copies.

use crate::autodiff::kernels::circ_shift_xy;
use crate::error::{Error, Result};
use crate::sampling::MaskKind;
use crate::tensor::{RealTensor, Scalar};

pub fn validate_shifts(shifts: &[(i64, i64)]) -> Result<()> {
    if shifts.is_empty() {
        return Err(Error::InvalidArg("shift list must be nonempty".into()));
    }
    for (i, s) in shifts.iter().enumerate() {
        if *s == (0, 0) {
            return Err(Error::InvalidArg(
                "shift (0, 0) duplicates the unshifted copy".into(),
            ));
        }
        if shifts[..i].contains(s) {
            return Err(Error::InvalidArg(format!("duplicate shift {s:?}")));
        }
    }
    Ok(())
}

/// `[2, t, x, y]` -> `[2(1+len(shifts)), t, x, y]`: the original channels
/// followed, per shift, by both channels circularly shifted by (dx, dy).
pub fn channel_shift_augment<T: Scalar>(
    x2ch: &RealTensor<T>,
    shifts: &[(i64, i64)],
) -> Result<RealTensor<T>> {
    validate_shifts(shifts)?;
    let s = x2ch.shape();
    if s.len() != 4 || s[0] != 2 {
        return Err(Error::InvalidShape(format!(
            "expected [2, t, x, y], got {s:?}"
        )));
    }
    let mut shape = s.to_vec();
    shape[0] = 2 * (1 + shifts.len());
    let mut data = Vec::with_capacity(shape.iter().product());
    data.extend_from_slice(x2ch.data());
    for &(dx, dy) in shifts {
        data.extend_from_slice(circ_shift_xy(x2ch, dx, dy)?.data());
    }
    RealTensor::new(shape, data)
}

/// Shift sets tied to the mask family: ky-undersampled families shift along
/// y at strides of a quarter FOV; pseudo-radial shifts along both directions.
pub fn default_shifts(kind: MaskKind, nx: usize, ny: usize) -> Vec<(i64, i64)> {
    let (hx, hy) = (nx as i64 / 2, ny as i64 / 2);
    match kind {
        MaskKind::Uniform | MaskKind::GaussianRandom => {
            vec![(0, hy / 2), (0, hy), (0, hy + hy / 2)]
        }
        MaskKind::PseudoRadial => vec![(0, hy), (hx, 0), (hx, hy)],
    }
}
