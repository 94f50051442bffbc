use super::*;
use crate::linalg::norm_sqr;
use crate::scalar::cplx;
use proptest::{prop_assert, proptest};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_link(arrays: &ArrayConfig, r: &mut ChaCha8Rng, beta: f64, kappa: f64) -> LinkStatistics<f64> {
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

fn small_arrays() -> ArrayConfig {
    ArrayConfig {
        sat_antennas: [2, 2],
        ut_antennas: [2, 2],
        ..ArrayConfig::default()
    }
}

#[test]
fn steering_zero_phase_and_sign_flip() {
    let e = steering_vector(2, 0.5, 0.0);
    let h = 0.5f64.sqrt();
    assert!((e[0] - cplx(h, 0.0)).norm() < 1e-15 && (e[1] - cplx(h, 0.0)).norm() < 1e-15);
    let e = steering_vector(2, 0.5, 1.0);
    assert!((e[0] - cplx(h, 0.0)).norm() < 1e-15 && (e[1] - cplx(-h, 0.0)).norm() < 1e-15);
}

proptest! {
    #[test]
    fn steering_is_unit_norm(n in 1usize..40, d in 0.05f64..3.0, q in -1.0f64..1.0) {
        prop_assert!((steering_vector(n, d, q).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn transmit_response_broadside_cosines() {
    let arrays = ArrayConfig::default();
    let g = transmit_response(&arrays, 0.3, 0.0);
    let expect = kron(&steering_vector(5, 1.0, 0.0), &steering_vector(5, 1.0, 1.0));
    assert!((g - expect).norm() < 1e-14);
}

#[test]
fn transmit_response_single_element() {
    let arrays = ArrayConfig {
        sat_antennas: [1, 1],
        ..ArrayConfig::default()
    };
    let g: CVec<f64> = transmit_response(&arrays, 1.1, 0.4);
    assert_eq!(g.len(), 1);
    assert!((g[0] - cplx(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn transmit_response_matches_direct_formula() {
    let arrays = ArrayConfig {
        sat_antennas: [3, 4],
        sat_spacing_wl: [0.7, 1.3],
        ..ArrayConfig::default()
    };
    let mut r = rng(1);
    for _ in 0..50 {
        let tx: f64 = r.random_range(-3.0..3.0);
        let ty: f64 = r.random_range(-3.0..3.0);
        let g = transmit_response(&arrays, tx, ty);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let qx = ty.sin() * tx.cos();
        let qy = ty.cos();
        for i in 0..3 {
            for j in 0..4 {
                let phase = -2.0 * std::f64::consts::PI * (0.7 * qx * i as f64 + 1.3 * qy * j as f64);
                let want = cplx(phase.cos(), phase.sin()) / 12f64.sqrt();
                assert!((g[i * 4 + j] - want).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn path_gain_reference_constants() {
    let b = path_gain::<f64>(600e3, 0.14990, 6.0, 0.0);
    assert!((b / 1.574e-15 - 1.0).abs() < 5e-3, "{b:e}");
    let lambda = 4.0 * std::f64::consts::PI;
    assert!((path_gain::<f64>(1.0, lambda, 0.0, 0.0) - 1.0).abs() < 1e-14);
    let ratio = path_gain::<f64>(1200e3, 0.1499, 6.0, 0.0) / path_gain(600e3, 0.1499, 6.0, 0.0);
    assert!((ratio - 0.25).abs() < 1e-14);
}

#[test]
fn noise_variance_examples() {
    let s = noise_variance::<f64>(290.0, 5e7);
    assert!((s / 2.002e-13 - 1.0).abs() < 1e-3, "{s:e}");
    assert_eq!(noise_variance::<f64>(0.0, 5e7), 0.0);
    assert!((noise_variance::<f64>(290.0, 1e8) - 2.0 * s).abs() < 1e-25);
}

#[test]
fn los_response_elevation_limits() {
    let arrays = ArrayConfig::default();
    let mut r = rng(2);
    for _ in 0..20 {
        let (px, py) = los_arrival_angles(0.0f64, &mut r);
        assert!((px.sin() * py.sin()).abs() < 1e-12);
        let d: CVec<f64> = los_receive_response(&arrays, 0.0, &mut r);
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }
    let (px, py) = los_arrival_angles(90.0f64, &mut r);
    assert!((px - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!((py - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    // both directional cosines vanish: every element in phase
    let d = receive_response(&arrays, px, py);
    let expect = kron(&steering_vector(4, 0.5, 0.0), &steering_vector(4, 0.5, 0.0));
    assert!((d - expect).norm() < 1e-5);
}

proptest! {
    #[test]
    fn los_constraint_holds(elev in -90.0f64..90.0, seed in 0u64..1000) {
        let mut r = rng(seed);
        let (px, py) = los_arrival_angles(elev, &mut r);
        prop_assert!((px.sin() * py.sin() - elev.to_radians().sin()).abs() < 1e-9);
        let d: CVec<f64> = los_receive_response(&ArrayConfig::default(), elev, &mut r);
        prop_assert!((d.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nlos_covariance_normalized() {
    let s: CMat<f64> = nlos_covariance(1, &mut rng(3));
    assert!((s[(0, 0)].re - 1.0).abs() < 1e-15);
    for n in [2, 7, 16] {
        let s: CMat<f64> = nlos_covariance(n, &mut rng(n as u64));
        assert!((s.trace().re - 1.0).abs() < 1e-12);
        assert!(s.diagonal().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
    }
    let a: CMat<f64> = nlos_covariance(8, &mut rng(11));
    let b: CMat<f64> = nlos_covariance(8, &mut rng(11));
    assert_eq!(a, b);
}

#[test]
fn effective_channel_single_link_is_rank_one() {
    let arrays = ArrayConfig::default();
    let link = random_link(&arrays, &mut rng(4), 2.5, 3.0);
    let ch = effective_channel(std::slice::from_ref(&link)).unwrap();
    let expect = &link.g * link.g.adjoint() * real(2.5f64.sqrt());
    assert!((&ch.h_hat - expect).norm() < 1e-12);
    assert!((ch.d_hat[(0, 0)].re - 2.5).abs() < 1e-15);
}

#[test]
fn effective_channel_identity_correlation_is_projector() {
    let arrays = small_arrays();
    let mut r = rng(5);
    let mut a = random_link(&arrays, &mut r, 1.0, 1.0);
    let mut b = random_link(&arrays, &mut r, 1.0, 1.0);
    // orthogonal LoS responses remove the cross term
    a.d0 = CVec::from_vec(vec![real(1.0), real(0.0), real(0.0), real(0.0)]);
    b.d0 = CVec::from_vec(vec![real(0.0), real(1.0), real(0.0), real(0.0)]);
    let ch = effective_channel(&[a, b]).unwrap();
    let proj = &ch.g_block * ch.g_block.adjoint();
    assert!((ch.h_hat - proj).norm() < 1e-12);
}

#[test]
fn effective_channel_reconstructs_gram() {
    let arrays = small_arrays();
    let mut r = rng(6);
    for _ in 0..20 {
        let links: Vec<_> = (0..2)
            .map(|_| {
                let beta = r.random_range(0.1..3.0);
                random_link(&arrays, &mut r, beta, 4.0)
            })
            .collect();
        let ch = effective_channel(&links).unwrap();
        let gram = &ch.g_block * &ch.d_hat * ch.g_block.adjoint();
        let back = ch.h_hat.adjoint() * &ch.h_hat;
        assert!((back - &gram).norm() <= 1e-10 * gram.norm());
        for s in 0..2 {
            assert!((ch.d_hat[(s, s)].re - links[s].beta).abs() < 1e-14);
        }
        crate::linalg::checked_psd_eigen(&ch.d_hat).unwrap();
    }
}

#[test]
fn effective_channel_rejects_inconsistent_correlation() {
    let arrays = small_arrays();
    let mut r = rng(7);
    let mut a = random_link(&arrays, &mut r, 1.0, 1e9);
    let b = random_link(&arrays, &mut r, 1.0, 1e9);
    a.d0 = b.d0.clone();
    // β_a far below the LoS cross-term of b makes D̂ indefinite
    a.beta = 1e-6;
    a.kappa = 1e9;
    let mut d_hat = receive_correlation(&[a.clone(), b.clone()]);
    d_hat[(0, 1)] = real(5.0);
    d_hat[(1, 0)] = real(5.0);
    assert!(matches!(
        effective_from_correlation(&[a, b], d_hat),
        Err(Error::NotPsd { .. })
    ));
}

#[test]
fn los_only_replaces_diagonal() {
    let arrays = small_arrays();
    let mut r = rng(8);
    let links: Vec<_> = (0..3).map(|_| random_link(&arrays, &mut r, 2.0, 3.0)).collect();
    let full = effective_channel(&links).unwrap();
    let los = effective_channel_los_only(&links).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                assert!((los.d_hat[(a, a)].re - 1.5).abs() < 1e-14);
            } else {
                assert_eq!(los.d_hat[(a, b)], full.d_hat[(a, b)]);
            }
        }
    }
}

#[test]
fn deterministic_limit_realization() {
    let arrays = small_arrays();
    let link = random_link(&arrays, &mut rng(9), 0.7, 1e12);
    let sampler = LinkSampler::new(&link).unwrap();
    let mut d = CVec::zeros(4);
    let mut r = rng(10);
    for _ in 0..10 {
        sampler.sample_into(&mut r, d.column_mut(0));
        // NLoS part scales as κ^{-1/2}
        assert!((norm_sqr(&d) / 0.7 - 1.0).abs() < 1e-5);
    }
}

#[test]
fn received_power_moment() {
    let arrays = ArrayConfig::default();
    let link = random_link(&arrays, &mut rng(12), 1.3, 2.0);
    let sampler = LinkSampler::new(&link).unwrap();
    let mut r = rng(13);
    let n = 100_000;
    let mut d = CVec::zeros(16);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        sampler.sample_into(&mut r, d.column_mut(0));
        let p = norm_sqr(&d);
        sum += p;
        sum2 += p * p;
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - 1.3).abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn full_covariance_sampler_matches_second_moment() {
    let arrays = small_arrays();
    let mut link = random_link(&arrays, &mut rng(14), 1.0, 0.5);
    let b = CMat::from_fn(4, 4, |i, j| {
        cplx(((i * 3 + j) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.3)
    });
    let cov = &b * b.adjoint();
    link.sigma = &cov / cov.trace();
    let sampler = LinkSampler::new(&link).unwrap();
    let mut r = rng(15);
    let n = 100_000;
    let mut acc = CMat::<f64>::zeros(4, 4);
    let mut d = CVec::zeros(4);
    let los = &link.d0 * real(link.los_amplitude());
    for _ in 0..n {
        sampler.sample_into(&mut r, d.column_mut(0));
        let w = &d - &los;
        acc += &w * w.adjoint();
    }
    acc /= real(n as f64);
    let expect = &link.sigma * real(link.beta / (link.kappa + 1.0));
    assert!((acc - expect).norm() < 0.02);
}

#[test]
fn realization_rank_at_most_satellites() {
    let arrays = small_arrays();
    let mut r = rng(16);
    let links: Vec<Vec<_>> = (0..2)
        .map(|_| (0..2).map(|_| random_link(&arrays, &mut r, 1.0, 2.0)).collect())
        .collect();
    let stats = ChannelStatistics {
        num_sat_antennas: 4,
        num_ut_antennas: 4,
        links,
    };
    for _ in 0..10 {
        let real = sample_realization(&stats, &mut r).unwrap();
        for h in &real.h {
            assert_eq!(h.shape(), (4, 8));
            let sv = h.clone().singular_values();
            let rank = sv.iter().filter(|&&x| x > 1e-10 * sv[0]).count();
            assert!(rank <= 2);
        }
    }
}

#[test]
fn moment_identity_small() {
    let arrays = small_arrays();
    let mut r = rng(17);
    let links: Vec<_> = (0..2).map(|_| random_link(&arrays, &mut r, 1.5, 3.0)).collect();
    let d_hat = receive_correlation(&links);
    let sampler = ReceiveSampler::new(&links).unwrap();
    let n = 100_000;
    let mut mean = CMat::<f64>::zeros(2, 2);
    let mut sq = nalgebra::DMatrix::<f64>::zeros(2, 2);
    let mut sq_im = nalgebra::DMatrix::<f64>::zeros(2, 2);
    let mut d = CMat::zeros(4, 2);
    for _ in 0..n {
        sampler.sample_into(&mut r, &mut d);
        let g = d.adjoint() * &d;
        mean += &g;
        for i in 0..4 {
            sq.as_mut_slice()[i] += g.as_slice()[i].re.powi(2);
            sq_im.as_mut_slice()[i] += g.as_slice()[i].im.powi(2);
        }
    }
    let nf = n as f64;
    mean /= real(nf);
    for i in 0..4 {
        let m = mean.as_slice()[i];
        let se_re = ((sq.as_slice()[i] / nf - m.re * m.re) / nf).sqrt();
        let se_im = ((sq_im.as_slice()[i] / nf - m.im * m.im) / nf).sqrt();
        let t = d_hat.as_slice()[i];
        assert!((m.re - t.re).abs() <= 3.0 * se_re + 1e-15, "{i}: {m} vs {t}");
        assert!((m.im - t.im).abs() <= 3.0 * se_im + 1e-15, "{i}: {m} vs {t}");
    }
}

#[test]
fn statistics_json_round_trip() {
    let arrays = small_arrays();
    let mut r = rng(18);
    let links: Vec<Vec<_>> = (0..2)
        .map(|_| (0..3).map(|_| random_link(&arrays, &mut r, 1e-3, 5.0)).collect())
        .collect();
    let stats = ChannelStatistics {
        num_sat_antennas: 4,
        num_ut_antennas: 4,
        links,
    };
    let doc = StatisticsDocument::from_statistics(&stats);
    let text = serde_json::to_string(&doc).unwrap();
    let back: StatisticsDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_statistics::<f64>().unwrap(), stats);

    let ch = effective_channel(&stats.links[0]).unwrap();
    let doc = EffectiveChannelDocument::from_channel(&ch);
    let back: EffectiveChannelDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(back.to_channel::<f64>().unwrap(), ch);
}

#[test]
fn statistics_document_rejects_wrong_schema() {
    let doc = StatisticsDocument {
        schema: "something-else".into(),
        version: SCHEMA_VERSION,
        num_sat_antennas: 1,
        num_ut_antennas: 1,
        links: vec![],
    };
    assert!(doc.to_statistics::<f64>().is_err());
}

#[test]
fn generated_statistics_are_valid() {
    let cfg = crate::geometry::ScenarioConfig::standard(4, 6, 1);
    let sc: Scenario<f64> = crate::geometry::build_scenario(&cfg).unwrap();
    let stats = generate_statistics(&sc, &ArrayConfig::default(), &RicianTable::default(), 7).unwrap();
    stats.validate().unwrap();
    assert_eq!((stats.num_uts(), stats.num_satellites()), (6, 4));
    let again = generate_statistics(&sc, &ArrayConfig::default(), &RicianTable::default(), 7).unwrap();
    assert_eq!(stats, again);
}

#[test]
fn f32_responses_work() {
    let g: CVec<f32> = transmit_response(&ArrayConfig::default(), 0.4f32, 1.2f32);
    assert!((g.norm() - 1.0).abs() < 1e-5);
}
