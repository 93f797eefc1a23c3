//! Random channel generation.
//!
//! Direct BS-user links are Rayleigh. BS-RIS and RIS-user links are Rician
//! with a line-of-sight component built from uniform-linear-array steering
//! vectors (half-wavelength spacing) evaluated at the 2-D azimuth of the
//! connecting ray. Every link is scaled by the log-distance path loss
//! `C0 * (d / D0)^-alpha`, with distances below `D0` clamped to `D0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system_model::{Point, SystemConfig};
use crate::C64;

/// One random draw of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h_direct[j][k]`: BS j to user k, length M.
    pub h_direct: Vec<Vec<DVector<C64>>>,
    /// `g_bs_ris[j]`: BS j to RIS, N x M.
    pub g_bs_ris: Vec<DMatrix<C64>>,
    /// `h_ris_user[k]`: RIS to user k, length N.
    pub h_ris_user: Vec<DVector<C64>>,
    pub user_positions: Vec<Point>,
}

impl ChannelSet {
    pub fn num_bs(&self) -> usize {
        self.h_direct.len()
    }

    pub fn num_users(&self) -> usize {
        self.h_ris_user.len()
    }

    pub fn bs_antennas(&self) -> usize {
        self.h_direct.first().and_then(|row| row.first()).map_or(0, |h| h.len())
    }

    pub fn ris_elements(&self) -> usize {
        self.h_ris_user.first().map_or(0, |h| h.len())
    }

    /// Channels of a drop: `seed` alone determines the result.
    pub fn for_drop(cfg: &SystemConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gen_channel_set(cfg, &mut rng)
    }

    /// The same draw with every BS-RIS matrix zeroed, i.e. no RIS path.
    pub fn without_ris(&self) -> Self {
        ChannelSet {
            g_bs_ris: self.g_bs_ris.iter().map(|g| DMatrix::zeros(g.nrows(), g.ncols())).collect(),
            ..self.clone()
        }
    }

    /// Direct-link power gain `||h_d[j][k]||^2`.
    pub fn direct_gain(&self, bs: usize, user: usize) -> f64 {
        self.h_direct[bs][user].norm_squared()
    }

    /// JSON dump of every matrix as `[re, im]` pairs, with the seed.
    pub fn to_json(&self, seed: u64) -> String {
        #[derive(Serialize)]
        struct Dump {
            seed: u64,
            num_bs: usize,
            num_users: usize,
            bs_antennas: usize,
            ris_elements: usize,
            user_positions: Vec<[f64; 2]>,
            h_direct: Vec<Vec<Vec<[f64; 2]>>>,
            /// Row-major N x M.
            g_bs_ris: Vec<Vec<Vec<[f64; 2]>>>,
            h_ris_user: Vec<Vec<[f64; 2]>>,
        }
        let vec = |v: &DVector<C64>| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        let dump = Dump {
            seed,
            num_bs: self.num_bs(),
            num_users: self.num_users(),
            bs_antennas: self.bs_antennas(),
            ris_elements: self.ris_elements(),
            user_positions: self.user_positions.iter().map(|p| [p.x, p.y]).collect(),
            h_direct: self.h_direct.iter().map(|row| row.iter().map(vec).collect()).collect(),
            g_bs_ris: self
                .g_bs_ris
                .iter()
                .map(|g| g.row_iter().map(|r| r.iter().map(|c| [c.re, c.im]).collect()).collect())
                .collect(),
            h_ris_user: self.h_ris_user.iter().map(vec).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("channel dump is plain data")
    }
}

/// Log-distance path loss `C0 * (d / D0)^-alpha` as a linear power gain.
pub fn path_loss(d: f64, alpha: f64, cfg: &SystemConfig) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::Domain(d));
    }
    Ok(cfg.pathloss_ref_gain * (d / cfg.pathloss_ref_dist).powf(-alpha))
}

/// Path loss at a geometric distance, clamped below to the reference distance.
pub fn link_gain(d: f64, alpha: f64, cfg: &SystemConfig) -> f64 {
    let d = d.max(cfg.pathloss_ref_dist);
    cfg.pathloss_ref_gain * (d / cfg.pathloss_ref_dist).powf(-alpha)
}

/// ULA response with half-wavelength spacing: entries `exp(j pi n sin(az))`.
pub fn steering_vector(len: usize, azimuth: f64) -> DVector<C64> {
    let s = azimuth.sin();
    DVector::from_fn(len, |n, _| C64::from_polar(1.0, PI * n as f64 * s))
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// K users uniform over the configured disk.
pub fn place_users<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<Point> {
    let Point { x: cx, y: cy } = cfg.user_region.center;
    let radius = cfg.user_region.radius;
    (0..cfg.num_users)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            Point::new(cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

/// Rayleigh direct channels, `h_direct[j][k]`.
pub fn gen_direct<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    positions: &[Point],
    rng: &mut R,
) -> Vec<Vec<DVector<C64>>> {
    cfg.bs_positions
        .iter()
        .map(|&bs| {
            positions
                .iter()
                .map(|&user| {
                    let amp = link_gain(bs.distance(user), cfg.alpha_direct, cfg).sqrt();
                    DVector::from_fn(cfg.bs_antennas, |_, _| complex_gaussian(rng) * amp)
                })
                .collect()
        })
        .collect()
}

/// BS-RIS channels `G_j = sqrt(L) (w_los a_ris a_bs^H + w_nlos Z)`.
pub fn gen_bs_ris<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<DMatrix<C64>> {
    let (w_los, w_nlos) = cfg.rician_bs_ris.mixing_weights();
    let (n, m) = (cfg.ris_elements, cfg.bs_antennas);
    cfg.bs_positions
        .iter()
        .map(|&bs| {
            let ris = cfg.ris_position;
            let amp = link_gain(bs.distance(ris), cfg.alpha_bs_ris, cfg).sqrt();
            let a_ris = steering_vector(n, ris.azimuth_to(bs));
            let a_bs = steering_vector(m, bs.azimuth_to(ris));
            let mut g = &a_ris * a_bs.adjoint() * C64::from(w_los);
            if w_nlos > 0.0 {
                // Column-major fill order.
                g += DMatrix::from_fn(n, m, |_, _| complex_gaussian(rng)) * C64::from(w_nlos);
            }
            g * C64::from(amp)
        })
        .collect()
}

/// RIS-user channels `h_k = sqrt(L) (w_los a_ris(psi_k) + w_nlos z)`.
pub fn gen_ris_user<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    positions: &[Point],
    rng: &mut R,
) -> Vec<DVector<C64>> {
    let (w_los, w_nlos) = cfg.rician_ris_user.mixing_weights();
    let ris = cfg.ris_position;
    positions
        .iter()
        .map(|&user| {
            let amp = link_gain(ris.distance(user), cfg.alpha_ris_user, cfg).sqrt();
            let mut h = steering_vector(cfg.ris_elements, ris.azimuth_to(user)) * C64::from(w_los);
            if w_nlos > 0.0 {
                h += DVector::from_fn(cfg.ris_elements, |_, _| complex_gaussian(rng)) * C64::from(w_nlos);
            }
            h * C64::from(amp)
        })
        .collect()
}

/// Draws positions and all three link types.
///
/// Each part gets its own generator seeded from `rng`, so the direct links of
/// a drop do not depend on the RIS size and the RIS-user links do not depend
/// on the antenna count.
pub fn gen_channel_set<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelSet {
    let seeds: [u64; 4] = std::array::from_fn(|_| rng.random());
    let sub = |i: usize| ChaCha8Rng::seed_from_u64(seeds[i]);
    let user_positions = place_users(cfg, &mut sub(0));
    let h_direct = gen_direct(cfg, &user_positions, &mut sub(1));
    let g_bs_ris = gen_bs_ris(cfg, &mut sub(2));
    let h_ris_user = gen_ris_user(cfg, &user_positions, &mut sub(3));
    ChannelSet { h_direct, g_bs_ris, h_ris_user, user_positions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::RicianFactor;

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            num_bs: 2,
            num_users: 3,
            bs_antennas: 4,
            ris_elements: 8,
            bs_positions: vec![Point::new(0.0, 200.0), Point::new(-150.0, 0.0)],
            ..SystemConfig::paper_default()
        }
    }

    #[test]
    fn path_loss_reference_values() {
        let cfg = SystemConfig::paper_default();
        for alpha in [2.0, 2.5, 3.9] {
            assert!((path_loss(1.0, alpha, &cfg).unwrap() - 1e-3).abs() < 1e-18);
        }
        let l = path_loss(100.0, 2.5, &cfg).unwrap();
        assert!((l - 1e-8).abs() < 1e-8 * 1e-12, "{l}");
        assert!(matches!(path_loss(0.0, 2.0, &cfg), Err(Error::Domain(_))));
        assert!(path_loss(-3.0, 2.0, &cfg).is_err());
    }

    #[test]
    fn distances_below_reference_are_clamped() {
        let cfg = SystemConfig::paper_default();
        assert_eq!(link_gain(0.0, 3.9, &cfg), cfg.pathloss_ref_gain);
        assert_eq!(link_gain(0.3, 3.9, &cfg), cfg.pathloss_ref_gain);
    }

    #[test]
    fn users_stay_inside_the_disk() {
        let cfg = SystemConfig::paper_default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            for p in place_users(&cfg, &mut rng) {
                assert!(p.distance(Point::new(25.0, -25.0)) <= 150.0 + 1e-9);
            }
        }
        let degenerate = SystemConfig {
            user_region: crate::system_model::Disk { center: Point::new(3.0, 4.0), radius: 0.0 },
            ..cfg
        };
        for p in place_users(&degenerate, &mut rng) {
            assert_eq!(p, Point::new(3.0, 4.0));
        }
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = SystemConfig::paper_default();
        assert_eq!(ChannelSet::for_drop(&cfg, 11), ChannelSet::for_drop(&cfg, 11));
        assert_ne!(ChannelSet::for_drop(&cfg, 11), ChannelSet::for_drop(&cfg, 12));
    }

    #[test]
    fn shapes_follow_config() {
        let ch = ChannelSet::for_drop(&small_cfg(), 3);
        assert_eq!(ch.h_direct.len(), 2);
        assert!(ch.h_direct.iter().all(|row| row.len() == 3 && row.iter().all(|h| h.len() == 4)));
        assert!(ch.g_bs_ris.iter().all(|g| g.shape() == (8, 4)));
        assert_eq!(ch.h_ris_user.len(), 3);
        assert!(ch.h_ris_user.iter().all(|h| h.len() == 8));
        assert_eq!(ch.user_positions.len(), 3);
    }

    #[test]
    fn direct_links_follow_user_positions() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos = place_users(&cfg, &mut rng);
        let mut swapped = pos.clone();
        swapped.swap(0, 2);
        let h = gen_direct(&cfg, &pos, &mut ChaCha8Rng::seed_from_u64(5));
        let hs = gen_direct(&cfg, &swapped, &mut ChaCha8Rng::seed_from_u64(5));
        for j in 0..cfg.num_bs {
            let bs = cfg.bs_positions[j];
            for (k, ks) in [(0, 2), (2, 0), (1, 1)] {
                let l = link_gain(bs.distance(pos[k]), cfg.alpha_direct, &cfg).sqrt();
                let ls = link_gain(bs.distance(pos[ks]), cfg.alpha_direct, &cfg).sqrt();
                let fading = &h[j][k] / C64::from(l);
                let fading_s = &hs[j][k] / C64::from(ls);
                assert!((&fading - &fading_s).norm() < 1e-9 * fading.norm());
            }
        }
    }

    #[test]
    fn pure_los_bs_ris_is_rank_one_with_constant_magnitude() {
        let cfg = SystemConfig::paper_default();
        let g = gen_bs_ris(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        for (j, gj) in g.iter().enumerate() {
            let l = link_gain(cfg.bs_positions[j].distance(cfg.ris_position), cfg.alpha_bs_ris, &cfg);
            for c in gj.iter() {
                assert!((c.norm() - l.sqrt()).abs() < 1e-12 * l.sqrt());
            }
            let sv = gj.clone().singular_values();
            assert!(sv[1] < 1e-10 * sv[0], "second singular value {}", sv[1]);
        }
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        for az in [-2.0, 0.0, 0.4, 3.0] {
            let a = steering_vector(33, az);
            assert!(a.iter().all(|c| (c.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn rician_weights_split_power() {
        let (l, n) = RicianFactor::Finite(1.0).mixing_weights();
        assert!((l * l - 0.5).abs() < 1e-15 && (n * n - 0.5).abs() < 1e-15);
        assert_eq!(RicianFactor::PureLos.mixing_weights(), (1.0, 0.0));
    }

    #[test]
    fn json_dump_records_seed_and_shapes() {
        let ch = ChannelSet::for_drop(&small_cfg(), 3);
        let v: serde_json::Value = serde_json::from_str(&ch.to_json(3)).unwrap();
        assert_eq!(v["seed"], 3);
        assert_eq!(v["g_bs_ris"][0].as_array().unwrap().len(), 8);
        assert_eq!(v["h_direct"][1][2].as_array().unwrap().len(), 4);
    }
}
