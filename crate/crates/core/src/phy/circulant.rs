use num_complex::Complex;

use super::{zeros, OfdmPhy, PhyError};
use crate::chanmodel::DiscreteChannel;
use crate::Real;

/// `N x N` circulant channel operator `H = F^H D F`, held as its first column
/// and DFT eigenvalues `D[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantOperator<T> {
    column: Vec<Complex<T>>,
    eigenvalues: Vec<Complex<T>>,
}

pub fn build_circulant<T: Real>(phy: &OfdmPhy<T>, h: &DiscreteChannel<T>) -> Result<CirculantOperator<T>, PhyError> {
    let n = phy.n_fft();
    if h.len() > n {
        return Err(PhyError::ChannelTooLong { len: h.len(), n_fft: n });
    }
    let mut column = zeros(n);
    column[..h.len()].copy_from_slice(h.taps());
    let eigenvalues = phy.dft().unnormalized(&column);
    Ok(CirculantOperator { column, eigenvalues })
}

impl<T: Real> CirculantOperator<T> {
    pub fn n(&self) -> usize {
        self.column.len()
    }

    pub fn column(&self) -> &[Complex<T>] {
        &self.column
    }

    /// Diagonal of `F H F^H`.
    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    /// `H x` (circular convolution), computed in the frequency domain.
    pub fn apply(&self, phy: &OfdmPhy<T>, x: &[Complex<T>]) -> Result<Vec<Complex<T>>, PhyError> {
        if x.len() != self.n() {
            return Err(PhyError::LengthMismatch { expected: self.n(), found: x.len() });
        }
        let mut y = phy.dft().forward(x);
        y.iter_mut().zip(&self.eigenvalues).for_each(|(v, d)| *v *= d);
        phy.dft().inverse_in_place(&mut y);
        Ok(y)
    }

    /// Element `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        let n = self.n();
        self.column[(row + n - col) % n]
    }

    pub fn dense(&self) -> Vec<Vec<Complex<T>>> {
        (0..self.n()).map(|r| (0..self.n()).map(|c| self.entry(r, c)).collect()).collect()
    }
}
