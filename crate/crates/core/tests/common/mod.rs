#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use risnet::channel::complex_gaussian;
use risnet::ris_optimizer::CellProblem;
use risnet::system_model::{AntennaRule, SystemConfig};
use risnet::C64;

pub fn cvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| complex_gaussian(rng))
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| complex_gaussian(rng))
}

pub fn unit_modulus(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| {
        C64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
    })
}

/// Cell with i.i.d. Rayleigh links where the cascaded path is as strong as
/// the direct one, so that the phases matter.
pub struct OwnedCell {
    pub hd: Vec<DVector<C64>>,
    pub hr: Vec<DVector<C64>>,
    pub g: DMatrix<C64>,
    pub noise_power: f64,
    pub p_max: f64,
    pub num_users: usize,
}

impl OwnedCell {
    pub fn random(rng: &mut ChaCha8Rng, s: usize, m: usize, n: usize) -> Self {
        let scale = C64::from(1.0 / (n as f64).sqrt());
        OwnedCell {
            hd: (0..s).map(|_| cvec(rng, m)).collect(),
            hr: (0..s).map(|_| cvec(rng, n) * scale).collect(),
            g: cmat(rng, n, m),
            noise_power: 1.0,
            p_max: 10.0 * s as f64,
            num_users: s,
        }
    }

    pub fn problem(&self) -> CellProblem<'_> {
        CellProblem {
            bs: 0,
            h_direct: self.hd.iter().collect(),
            h_ris: self.hr.iter().collect(),
            g: &self.g,
            noise_power: self.noise_power,
            p_max: self.p_max,
            num_users: self.num_users,
        }
    }
}

/// Paper geometry cut down to `num_bs` BSs.
pub fn small_config(num_bs: usize, num_users: usize, m: usize, n: usize) -> SystemConfig {
    let base = SystemConfig::paper_default();
    SystemConfig {
        num_bs,
        num_users,
        bs_antennas: m,
        ris_elements: n,
        bs_positions: base.bs_positions[..num_bs].to_vec(),
        antenna_rule: AntennaRule::PerBs,
        ..base
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn plans_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans")
}

/// Largest relative deviation of the empirical per-entry second moment from
/// the path loss, for direct, BS-RIS and RIS-user links, over `draws` fading
/// realizations at fixed user positions.
pub fn channel_moment_errors(cfg: &SystemConfig, draws: usize, seed: u64) -> [f64; 3] {
    use rand::SeedableRng;
    use risnet::channel::{gen_bs_ris, gen_direct, gen_ris_user, link_gain, place_users};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = place_users(cfg, &mut rng);
    let (j, k, m, n) = (cfg.num_bs, cfg.num_users, cfg.bs_antennas, cfg.ris_elements);
    let mut direct = vec![0.0; j * k * m];
    let mut bs_ris = vec![0.0; j * n * m];
    let mut ris_user = vec![0.0; k * n];
    for _ in 0..draws {
        for (a, row) in gen_direct(cfg, &users, &mut rng).iter().enumerate() {
            for (b, h) in row.iter().enumerate() {
                for (c, x) in h.iter().enumerate() {
                    direct[(a * k + b) * m + c] += x.norm_sqr();
                }
            }
        }
        for (a, g) in gen_bs_ris(cfg, &mut rng).iter().enumerate() {
            for (c, x) in g.iter().enumerate() {
                bs_ris[a * n * m + c] += x.norm_sqr();
            }
        }
        for (b, h) in gen_ris_user(cfg, &users, &mut rng).iter().enumerate() {
            for (c, x) in h.iter().enumerate() {
                ris_user[b * n + c] += x.norm_sqr();
            }
        }
    }
    let worst = |sums: &[f64], expected: &dyn Fn(usize) -> f64| {
        sums.iter().enumerate().map(|(i, s)| (s / draws as f64 / expected(i) - 1.0).abs()).fold(0.0, f64::max)
    };
    let ris = cfg.ris_position;
    [
        worst(&direct, &|i| {
            let (a, b) = (i / (k * m), (i / m) % k);
            link_gain(cfg.bs_positions[a].distance(users[b]), cfg.alpha_direct, cfg)
        }),
        worst(&bs_ris, &|i| link_gain(cfg.bs_positions[i / (n * m)].distance(ris), cfg.alpha_bs_ris, cfg)),
        worst(&ris_user, &|i| link_gain(ris.distance(users[i / n]), cfg.alpha_ris_user, cfg)),
    ]
}
