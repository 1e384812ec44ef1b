use num_complex::Complex;

use super::equalize::check_bins;
use super::OracleError;
use crate::phy::{zeros, CirculantOperator, InterfererSpec, OfdmPhy, PhyError};
use crate::Real;

/// `E|(F J)[k]|^2` for every bin `k`, for Gaussian data of the interferer's power
/// on its allocation. Independent symbols and subcarriers make this a sum of
/// squared tone responses through the windowed channel.
///
/// A CP-prefixed tone is a complex exponential truncated to its symbol, so its
/// convolution with `h` is the same exponential times a partial sum of
/// `h[l] w^{-bin l}`. Prefix sums give each windowed sample in constant time.
pub fn interference_psd<T: Real>(phy: &OfdmPhy<T>, spec: &InterfererSpec<T>) -> Result<Vec<T>, PhyError> {
    let n = phy.n_fft();
    let mut psd = vec![T::zero(); n];
    if !spec.overlaps(phy) {
        return Ok(psd);
    }
    if let Some(&bin) = spec.allocation.iter().find(|&&k| k >= n) {
        return Err(PhyError::BinOutOfRange { bin, n_fft: n });
    }
    let cp = phy.cp_len() as isize;
    let ls = phy.symbol_len() as isize;
    let start = cp + spec.gap;
    let taps = spec.channel.taps();
    let n_taps = taps.len() as isize;
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    let roots: Vec<Complex<T>> =
        (0..n).map(|j| Complex::from_polar(T::one(), T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(n))).collect();
    let root = |e: isize| roots[e.rem_euclid(n as isize) as usize];
    let (lo, hi) = spec.symbol_range(phy);
    let mut prefix = vec![Complex::new(T::zero(), T::zero()); taps.len() + 1];
    let mut window = zeros(n);
    for &bin in &spec.allocation {
        let b = bin as isize;
        for (l, h) in taps.iter().enumerate() {
            prefix[l + 1] = prefix[l] + *h * root(-b * l as isize);
        }
        for m in lo..=hi {
            for (i, w) in window.iter_mut().enumerate() {
                // position inside symbol m of the sample reaching window index i through tap 0
                let t = start + i as isize - m * ls;
                let first = (t - ls + 1).max(0);
                let last = t.min(n_taps - 1);
                *w = if first > last {
                    Complex::new(T::zero(), T::zero())
                } else {
                    (prefix[last as usize + 1] - prefix[first as usize]) * root(b * (t - cp)) * scale
                };
            }
            phy.dft().forward_in_place(&mut window);
            for (p, v) in psd.iter_mut().zip(&window) {
                *p += spec.power * v.norm_sqr();
            }
        }
    }
    Ok(psd)
}

pub fn total_interference_psd<T: Real>(phy: &OfdmPhy<T>, specs: &[InterfererSpec<T>]) -> Result<Vec<T>, PhyError> {
    let mut total = vec![T::zero(); phy.n_fft()];
    for spec in specs {
        for (acc, v) in total.iter_mut().zip(interference_psd(phy, spec)?) {
            *acc += v;
        }
    }
    Ok(total)
}

/// Linear SINR after one-tap equalisation:
/// `P / (E|(D^{-1} F J)[k]|^2 + sigma^2 / |D_k|^2)`.
pub fn sinr_from_psd<T: Real>(
    k: usize,
    victim: &CirculantOperator<T>,
    psd_k: T,
    noise_var: T,
    power: T,
    floor: T,
) -> Result<T, OracleError> {
    check_bins(victim, &[k], floor)?;
    let gain = victim.eigenvalues()[k].norm_sqr();
    let denom = psd_k + noise_var;
    Ok(if denom > T::zero() { power * gain / denom } else { T::infinity() })
}

/// SINR of subcarrier `k` of the victim facing `interferers`.
pub fn subcarrier_sinr<T: Real>(
    phy: &OfdmPhy<T>,
    k: usize,
    victim: &CirculantOperator<T>,
    interferers: &[InterfererSpec<T>],
    noise_var: T,
    power: T,
    floor: T,
) -> Result<T, OracleError> {
    let psd = total_interference_psd(phy, interferers)?;
    sinr_from_psd(k, victim, psd[k], noise_var, power, floor)
}

/// SINR table over the symbols of a packet and the victim's allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport<T> {
    pub bins: Vec<usize>,
    /// `sinr[w][i]` belongs to symbol `w`, bin `bins[i]`.
    pub sinr: Vec<Vec<T>>,
    /// Bits/s/Hz.
    pub rate: T,
}

/// One row per packet symbol; `psd_per_symbol[w]` is that symbol's interference PSD.
pub fn sinr_report<T: Real>(
    victim: &CirculantOperator<T>,
    bins: &[usize],
    psd_per_symbol: &[Vec<T>],
    noise_var: T,
    power: T,
    floor: T,
) -> Result<SinrReport<T>, OracleError> {
    if bins.is_empty() {
        return Err(OracleError::EmptyAllocation);
    }
    let sinr = psd_per_symbol
        .iter()
        .map(|psd| bins.iter().map(|&k| sinr_from_psd(k, victim, psd[k], noise_var, power, floor)).collect())
        .collect::<Result<Vec<Vec<T>>, _>>()?;
    let rate = packet_rate(&sinr)?;
    Ok(SinrReport { bins: bins.to_vec(), sinr, rate })
}

/// Mean of `log2(1 + SINR)` over every (symbol, subcarrier) entry.
pub fn packet_rate<T: Real>(sinr: &[Vec<T>]) -> Result<T, OracleError> {
    let count: usize = sinr.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(OracleError::EmptyReport);
    }
    let total: T = sinr.iter().flatten().map(|s| (T::one() + *s).log2()).sum();
    Ok(total / T::from_usize_lossy(count))
}
