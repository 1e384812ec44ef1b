//! Image-method multipath surrogate for ray-traced channel responses.
//!
//! Specular paths come from source images in an isovelocity waveguide bounded by
//! the surface (depth 0) and a flat bottom. Each path carries spherical/cylindrical
//! spreading loss, Thorp absorption at the carrier, lumped boundary reflection
//! losses and a random phase. A configurable number of diffuse arrivals with
//! exponential inter-arrival times fills in the tail. Everything past the delay
//! spread cap is dropped, so the cyclic prefix always covers the response.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::geometry::distance;
use super::{ChannelError, ChannelImpulseResponse, Geometry3D, LinkId, Tap};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticEnv {
    /// m/s.
    pub sound_speed: f64,
    pub carrier_hz: f64,
    /// 1.0 cylindrical, 2.0 spherical.
    pub spreading_exponent: f64,
    /// Highest surface+bottom bounce count kept by the image expansion.
    pub max_bounces: usize,
    pub surface_reflection: f64,
    pub bottom_reflection: f64,
    /// Diffuse arrival count is uniform on `0..=max_diffuse_paths`.
    pub max_diffuse_paths: usize,
    /// Mean spacing of diffuse arrivals, seconds.
    pub diffuse_mean_interarrival: f64,
    /// Diffuse amplitude relative to the direct path.
    pub diffuse_relative_gain: f64,
    /// Arrivals later than this after the first one are discarded, seconds.
    pub max_delay_spread: f64,
}

impl Default for AcousticEnv {
    fn default() -> Self {
        Self {
            sound_speed: 1500.0,
            carrier_hz: 1200.0,
            spreading_exponent: 1.5,
            max_bounces: 4,
            surface_reflection: 0.9,
            bottom_reflection: 0.5,
            max_diffuse_paths: 6,
            diffuse_mean_interarrival: 0.004,
            diffuse_relative_gain: 0.3,
            max_delay_spread: 0.030,
        }
    }
}

impl AcousticEnv {
    /// A single line-of-sight arrival, nothing else.
    pub fn direct_path_only() -> Self {
        Self { max_bounces: 0, max_diffuse_paths: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("sound_speed", self.sound_speed),
            ("carrier_hz", self.carrier_hz),
            ("diffuse_mean_interarrival", self.diffuse_mean_interarrival),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChannelError::InvalidEnv(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("spreading_exponent", self.spreading_exponent),
            ("surface_reflection", self.surface_reflection),
            ("bottom_reflection", self.bottom_reflection),
            ("diffuse_relative_gain", self.diffuse_relative_gain),
            ("max_delay_spread", self.max_delay_spread),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ChannelError::InvalidEnv(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Thorp absorption in dB/km at the carrier.
    pub fn absorption_db_per_km(&self) -> f64 {
        let f2 = (self.carrier_hz / 1000.0).powi(2);
        0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
    }

    /// Amplitude factor after `length` meters of propagation (1 m reference).
    pub fn path_amplitude(&self, length: f64) -> f64 {
        let l = length.max(1.0);
        let loss_db = self.spreading_exponent * 10.0 * l.log10() + self.absorption_db_per_km() * l / 1000.0;
        10f64.powf(-loss_db / 20.0)
    }
}

struct Path {
    length: f64,
    surface: usize,
    bottom: usize,
}

fn image_paths(range: f64, zs: f64, zr: f64, depth: f64, max_bounces: usize) -> Vec<Path> {
    let mut paths = Vec::new();
    let mut push = |dz: f64, surface: usize, bottom: usize| {
        if surface + bottom <= max_bounces {
            paths.push(Path { length: (range * range + dz * dz).sqrt(), surface, bottom });
        }
    };
    for m in 0..=max_bounces {
        let m2 = 2.0 * m as f64 * depth;
        let m2n = 2.0 * (m + 1) as f64 * depth;
        push(m2 + zs - zr, m, m);
        push(m2 + zs + zr, m + 1, m);
        push(m2n - zs - zr, m, m + 1);
        push(m2n - zs + zr, m + 1, m + 1);
    }
    paths
}

/// Surrogate channel response of `link` in `geometry`; a pure function of its inputs.
pub fn generate_cir<T: Real>(
    geometry: &Geometry3D,
    link: LinkId,
    env: &AcousticEnv,
    seed: u64,
) -> Result<ChannelImpulseResponse<T>, ChannelError> {
    env.validate()?;
    let src = geometry.position(link.src)?;
    let dst = geometry.position(link.dst)?;
    let direct = distance(src, dst);
    if direct <= 0.0 {
        return Err(ChannelError::ZeroDistance { src: link.src, dst: link.dst });
    }
    let range = ((src[0] - dst[0]).powi(2) + (src[1] - dst[1]).powi(2)).sqrt();
    let depth = geometry.bounds()[2];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = env.sound_speed;
    let first = direct / c;
    let mut taps: Vec<(f64, Complex<f64>)> = Vec::new();
    for path in image_paths(range, src[2], dst[2], depth, env.max_bounces) {
        let delay = path.length / c;
        if delay - first > env.max_delay_spread {
            continue;
        }
        // pressure-release surface flips the sign
        let boundary = (-env.surface_reflection).powi(path.surface as i32) * env.bottom_reflection.powi(path.bottom as i32);
        let amp = env.path_amplitude(path.length) * boundary;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        taps.push((delay, Complex::from_polar(amp, phase)));
    }

    let n_diffuse = if env.max_diffuse_paths > 0 { rng.random_range(0..=env.max_diffuse_paths) } else { 0 };
    if n_diffuse > 0 {
        let exp = Exp::new(1.0 / env.diffuse_mean_interarrival).expect("positive rate");
        let mut excess = 0.0;
        for _ in 0..n_diffuse {
            excess += exp.sample(&mut rng);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            if excess > env.max_delay_spread {
                continue;
            }
            let amp = env.diffuse_relative_gain * env.path_amplitude(direct + excess * c);
            taps.push((first + excess, Complex::from_polar(amp, phase)));
        }
    }

    let taps = taps.into_iter().map(|(d, g)| Tap { delay: T::lit(d), gain: Complex::new(T::lit(g.re), T::lit(g.im)) }).collect();
    ChannelImpulseResponse::from_unsorted(link, taps)
}
