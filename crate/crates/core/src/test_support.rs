//! Random fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    los_receive_response, nlos_covariance, transmit_response, ArrayConfig, ChannelStatistics, LinkStatistics,
};
use crate::linalg::CMat;
use crate::scalar::cplx;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_arrays() -> ArrayConfig {
    ArrayConfig {
        sat_antennas: [2, 2],
        ut_antennas: [2, 2],
        ..ArrayConfig::default()
    }
}

pub fn random_link(arrays: &ArrayConfig, r: &mut ChaCha8Rng, beta: f64, kappa: f64) -> LinkStatistics<f64> {
    let tx = r.random_range(0.0..std::f64::consts::PI);
    let ty = r.random_range(0.0..std::f64::consts::PI);
    let elev = r.random_range(20.0..90.0);
    LinkStatistics {
        beta,
        kappa,
        g: transmit_response(arrays, tx, ty),
        d0: los_receive_response(arrays, elev, r),
        sigma: nlos_covariance(arrays.num_ut_antennas(), r),
    }
}

/// `K × S` statistics with β drawn in `[0.5, 2]·beta` and a common κ.
pub fn random_statistics(sats: usize, uts: usize, beta: f64, kappa: f64, seed: u64) -> ChannelStatistics<f64> {
    let arrays = small_arrays();
    let mut r = rng(seed);
    let links = (0..uts)
        .map(|_| {
            (0..sats)
                .map(|_| {
                    let b = beta * r.random_range(0.5..2.0);
                    random_link(&arrays, &mut r, b, kappa)
                })
                .collect()
        })
        .collect();
    ChannelStatistics {
        num_sat_antennas: arrays.num_sat_antennas(),
        num_ut_antennas: arrays.num_ut_antennas(),
        links,
    }
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, r: &mut ChaCha8Rng) -> CMat<f64> {
    CMat::from_fn(rows, cols, |_, _| {
        cplx(r.random_range(-1.0..1.0) * scale, r.random_range(-1.0..1.0) * scale)
    })
}
