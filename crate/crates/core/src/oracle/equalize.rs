use num_complex::Complex;

use super::OracleError;
use crate::phy::{zeros, CirculantOperator, OfdmPhy, ReceivedSymbol};
use crate::Real;

pub(crate) fn check_bins<T: Real>(op: &CirculantOperator<T>, bins: &[usize], floor: T) -> Result<(), OracleError> {
    for &k in bins {
        let magnitude = op.eigenvalues()[k].norm();
        if !(magnitude >= floor) {
            return Err(OracleError::Singular { bin: k, magnitude: magnitude.to_f64_lossy() });
        }
    }
    Ok(())
}

fn one_tap<T: Real>(phy: &OfdmPhy<T>, op: &CirculantOperator<T>, x: &[Complex<T>], floor: T) -> Vec<Complex<T>> {
    let mut fx = phy.dft().forward(x);
    for (v, d) in fx.iter_mut().zip(op.eigenvalues()) {
        *v = if d.norm() >= floor { *v / d } else { Complex::new(T::zero(), T::zero()) };
    }
    fx
}

/// `D^{-1} F y`. Bins whose eigenvalue falls below `floor` are zeroed; if any of
/// them is in `bins` the call fails instead.
pub fn equalize<T: Real>(
    phy: &OfdmPhy<T>,
    rx: &ReceivedSymbol<T>,
    op: &CirculantOperator<T>,
    bins: &[usize],
    floor: T,
) -> Result<Vec<Complex<T>>, OracleError> {
    check_bins(op, bins, floor)?;
    Ok(one_tap(phy, op, &rx.y(), floor))
}

/// Per-component equalizer output: `d + F H^{-1} J + D^{-1} F z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedComponents<T> {
    pub data: Vec<Complex<T>>,
    pub interference: Vec<Complex<T>>,
    pub noise: Vec<Complex<T>>,
}

pub fn equalize_components<T: Real>(
    phy: &OfdmPhy<T>,
    rx: &ReceivedSymbol<T>,
    op: &CirculantOperator<T>,
    bins: &[usize],
    floor: T,
) -> Result<EqualizedComponents<T>, OracleError> {
    check_bins(op, bins, floor)?;
    let noise = if rx.noise.iter().all(|z| z.norm_sqr() == T::zero()) { zeros(phy.n_fft()) } else { one_tap(phy, op, &rx.noise, floor) };
    Ok(EqualizedComponents { data: one_tap(phy, op, &rx.desired, floor), interference: one_tap(phy, op, &rx.interference, floor), noise })
}
