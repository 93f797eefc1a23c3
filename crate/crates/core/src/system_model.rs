//! Scenario configuration and the domain types shared by the rest of the crate.
//!
//! Everything inside the crate works in watts and linear power gains. dBm and
//! dB only appear at the scenario-file boundary (see [`crate::scenario`]).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{ConfigError, Error, Result, Violation};
use crate::precoder::BeamformerSet;
use crate::C64;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power ratio in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of the ray from `self` towards `other`, in radians.
    pub fn azimuth_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// The disk users are dropped in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

/// Rician K-factor of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RicianFactor {
    /// Deterministic line-of-sight only (K = infinity).
    PureLos,
    Finite(f64),
}

impl RicianFactor {
    /// Amplitude weights `(los, nlos)` applied to the unit-power LoS and
    /// scattered parts. Their squares sum to one.
    pub fn mixing_weights(self) -> (f64, f64) {
        match self {
            RicianFactor::PureLos => (1.0, 0.0),
            RicianFactor::Finite(k) => ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt()),
        }
    }
}

/// How the antenna count is checked against the user count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AntennaRule {
    /// `M >= K`: any BS can serve every user.
    #[default]
    Global,
    /// `J * M >= K`: the network as a whole has enough spatial streams. Cells
    /// that would exceed `M` users are treated as infeasible during association.
    PerBs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_bs: usize,
    pub num_users: usize,
    pub bs_antennas: usize,
    pub ris_elements: usize,
    pub bs_positions: Vec<Point>,
    pub ris_position: Point,
    pub user_region: Disk,
    /// Total transmit power budget, watts.
    pub p_max: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    /// Path-loss reference gain at `pathloss_ref_dist` (linear).
    pub pathloss_ref_gain: f64,
    pub pathloss_ref_dist: f64,
    pub alpha_direct: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub rician_bs_ris: RicianFactor,
    pub rician_ris_user: RicianFactor,
    pub antenna_rule: AntennaRule,
    pub seed: u64,
}

impl SystemConfig {
    /// The four-BS layout with 25 users, 32 antennas and a 64-element RIS.
    pub fn paper_default() -> Self {
        SystemConfig {
            num_bs: 4,
            num_users: 25,
            bs_antennas: 32,
            ris_elements: 64,
            bs_positions: vec![
                Point::new(0.0, 200.0),
                Point::new(-150.0, 0.0),
                Point::new(250.0, 0.0),
                Point::new(0.0, -300.0),
            ],
            ris_position: Point::new(0.0, 0.0),
            user_region: Disk { center: Point::new(25.0, -25.0), radius: 150.0 },
            p_max: dbm_to_watts(50.0),
            noise_power: dbm_to_watts(-80.0),
            pathloss_ref_gain: db_to_linear(-30.0),
            pathloss_ref_dist: 1.0,
            alpha_direct: 3.9,
            alpha_bs_ris: 2.5,
            alpha_ris_user: 2.7,
            rician_bs_ris: RicianFactor::PureLos,
            rician_ris_user: RicianFactor::Finite(1.0),
            antenna_rule: AntennaRule::Global,
            seed: 1,
        }
    }

    /// Same geometry as [`Self::paper_default`] with 12 users, 16 antennas
    /// and 32 elements, checked under [`AntennaRule::PerBs`].
    pub fn desk_default() -> Self {
        SystemConfig {
            num_users: 12,
            bs_antennas: 16,
            ris_elements: 32,
            antenna_rule: AntennaRule::PerBs,
            ..Self::paper_default()
        }
    }

    /// Equal per-user power `P_max / K`.
    pub fn per_user_power(&self) -> f64 {
        self.p_max / self.num_users as f64
    }

    /// Largest number of users a single BS may serve.
    pub fn cell_capacity(&self) -> usize {
        self.bs_antennas
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        validate_config(self)
    }
}

/// Checks every scenario invariant and returns the config unchanged if all
/// hold, otherwise the full list of violations.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig, ConfigError> {
    let mut violations = Vec::new();

    for (name, n) in [
        ("num_bs", cfg.num_bs),
        ("num_users", cfg.num_users),
        ("bs_antennas", cfg.bs_antennas),
        ("ris_elements", cfg.ris_elements),
    ] {
        if n == 0 {
            violations.push(Violation::ZeroCount(name));
        }
    }
    if cfg.bs_positions.len() != cfg.num_bs {
        violations.push(Violation::BsPositionCount { expected: cfg.num_bs, found: cfg.bs_positions.len() });
    }
    match cfg.antenna_rule {
        AntennaRule::Global if cfg.bs_antennas < cfg.num_users => {
            violations.push(Violation::TooFewAntennas { antennas: cfg.bs_antennas, users: cfg.num_users });
        }
        AntennaRule::PerBs if cfg.num_bs * cfg.bs_antennas < cfg.num_users => {
            violations.push(Violation::TooFewAntennasPerBs {
                antennas: cfg.bs_antennas,
                bss: cfg.num_bs,
                users: cfg.num_users,
            });
        }
        _ => {}
    }
    if cfg.num_users < cfg.num_bs {
        violations.push(Violation::TooFewUsers { users: cfg.num_users, bss: cfg.num_bs });
    }

    let positive = [
        ("p_max", cfg.p_max),
        ("noise_power", cfg.noise_power),
        ("pathloss_ref_gain", cfg.pathloss_ref_gain),
        ("pathloss_ref_dist", cfg.pathloss_ref_dist),
        ("alpha_direct", cfg.alpha_direct),
        ("alpha_bs_ris", cfg.alpha_bs_ris),
        ("alpha_ris_user", cfg.alpha_ris_user),
        ("user_radius", cfg.user_region.radius),
    ];
    for (name, v) in positive {
        if !v.is_finite() {
            violations.push(Violation::NotFinite(name));
        } else if v <= 0.0 {
            violations.push(Violation::NonPositive(name, v));
        }
    }
    let coords = cfg
        .bs_positions
        .iter()
        .chain([&cfg.ris_position, &cfg.user_region.center])
        .all(|p| p.x.is_finite() && p.y.is_finite());
    if !coords {
        violations.push(Violation::NotFinite("positions"));
    }
    for (name, k) in [("bs_ris", cfg.rician_bs_ris), ("ris_user", cfg.rician_ris_user)] {
        if let RicianFactor::Finite(k) = k {
            if !k.is_finite() {
                violations.push(Violation::NotFinite(name));
            } else if k < 0.0 {
                violations.push(Violation::NegativeRician(name, k));
            }
        }
    }

    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations })
    }
}

/// Binary BS-user association matrix with its served and unassigned sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationState {
    u: Vec<Vec<bool>>,
    served: Vec<Vec<usize>>,
    serving: Vec<Option<usize>>,
    unassigned: BTreeSet<usize>,
}

impl AssociationState {
    /// Every user unassigned.
    pub fn new(num_bs: usize, num_users: usize) -> Self {
        AssociationState {
            u: vec![vec![false; num_users]; num_bs],
            served: vec![Vec::new(); num_bs],
            serving: vec![None; num_users],
            unassigned: (0..num_users).collect(),
        }
    }

    /// Builds a complete association from a serving-BS index per user.
    pub fn from_serving(num_bs: usize, serving: &[usize]) -> Result<Self> {
        let mut state = Self::new(num_bs, serving.len());
        for (k, &j) in serving.iter().enumerate() {
            state.assign(j, k)?;
        }
        Ok(state)
    }

    pub fn num_bs(&self) -> usize {
        self.served.len()
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn assign(&mut self, bs: usize, user: usize) -> Result<()> {
        if bs >= self.num_bs() || user >= self.num_users() {
            return Err(Error::Dimension(format!(
                "assignment ({bs}, {user}) outside {}x{}",
                self.num_bs(),
                self.num_users()
            )));
        }
        if let Some(current) = self.serving[user] {
            return Err(Error::AlreadyAssigned { user, bs: current });
        }
        self.u[bs][user] = true;
        self.served[bs].push(user);
        self.serving[user] = Some(bs);
        self.unassigned.remove(&user);
        Ok(())
    }

    /// Moves an assigned user to another BS, appending it to that BS's set.
    pub fn reassign(&mut self, user: usize, to: usize) -> Result<()> {
        let from = self.serving[user].ok_or(Error::UnassignedUser(user))?;
        if from == to {
            return Ok(());
        }
        self.u[from][user] = false;
        self.served[from].retain(|&k| k != user);
        self.serving[user] = None;
        self.unassigned.insert(user);
        self.assign(to, user)
    }

    pub fn serving_bs(&self, user: usize) -> Option<usize> {
        self.serving.get(user).copied().flatten()
    }

    /// Users served by `bs`, in the order they were associated.
    pub fn served(&self, bs: usize) -> &[usize] {
        &self.served[bs]
    }

    pub fn unassigned(&self) -> &BTreeSet<usize> {
        &self.unassigned
    }

    pub fn is_complete(&self) -> bool {
        self.unassigned.is_empty()
    }

    pub fn u(&self, bs: usize, user: usize) -> bool {
        self.u[bs][user]
    }

    /// The association matrix as 0/1 rows, one per BS.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.u.iter().map(|row| row.iter().map(|&b| b as u8).collect()).collect()
    }

    /// Checks the structural invariants: `k in A_j <=> u[j][k]`, unassigned
    /// users are exactly the all-zero columns, column sums are at most one
    /// and, if `require_complete`, every column sums to one and every row to
    /// at least one.
    pub fn check(&self, require_complete: bool) -> std::result::Result<(), String> {
        let (nj, nk) = (self.num_bs(), self.num_users());
        for k in 0..nk {
            let col: usize = (0..nj).map(|j| self.u[j][k] as usize).sum();
            if col > 1 {
                return Err(format!("user {k} is served by {col} BSs"));
            }
            if (col == 0) != self.unassigned.contains(&k) {
                return Err(format!("user {k}: unassigned set disagrees with U"));
            }
        }
        for j in 0..nj {
            for k in 0..nk {
                if self.u[j][k] != self.served[j].contains(&k) {
                    return Err(format!("BS {j}, user {k}: served set disagrees with U"));
                }
            }
        }
        if require_complete {
            if !self.unassigned.is_empty() {
                return Err(format!("{} users unassigned", self.unassigned.len()));
            }
            if let Some(j) = (0..nj).find(|&j| self.served[j].is_empty()) {
                return Err(format!("BS {j} serves no users"));
            }
        }
        Ok(())
    }
}

/// Reflection coefficients of the RIS as seen by one BS.
///
/// Entries are unit-modulus. The neutral profile (all ones) is what every BS
/// the RIS is not tuned for experiences.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    coeffs: DVector<C64>,
}

impl PhaseProfile {
    pub fn neutral(n: usize) -> Self {
        PhaseProfile { coeffs: DVector::from_element(n, C64::new(1.0, 0.0)) }
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        PhaseProfile {
            coeffs: DVector::from_iterator(angles.len(), angles.iter().map(|&t| C64::from_polar(1.0, t))),
        }
    }

    /// Uniform phases on `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        Self::from_angles(&angles)
    }

    /// Projects each entry onto the unit circle. Zero entries become 1.
    pub fn from_coefficients(coeffs: DVector<C64>) -> Self {
        let coeffs = coeffs.map(|c| {
            let r = c.norm();
            if r == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                c / r
            }
        });
        PhaseProfile { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self) -> &DVector<C64> {
        &self.coeffs
    }

    /// Phase of each coefficient, in `[0, 2pi)`.
    pub fn angles(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.arg().rem_euclid(std::f64::consts::TAU)).collect()
    }

    /// Largest deviation of any entry's modulus from one.
    pub fn modulus_error(&self) -> f64 {
        self.coeffs.iter().map(|c| (c.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Which BS the frequency-selective RIS is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RisAssignment {
    assisted: usize,
    num_bs: usize,
}

impl RisAssignment {
    pub fn new(assisted: usize, num_bs: usize) -> Result<Self> {
        if assisted >= num_bs {
            return Err(Error::Dimension(format!("RIS assigned to BS {assisted} of {num_bs}")));
        }
        Ok(RisAssignment { assisted, num_bs })
    }

    pub fn assisted_bs(&self) -> usize {
        self.assisted
    }

    /// One-hot `r` vector.
    pub fn vector(&self) -> Vec<u8> {
        (0..self.num_bs).map(|j| (j == self.assisted) as u8).collect()
    }
}

/// Counters from a full solve, reported in solution dumps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub stage2_steps: usize,
    /// Outer iterations of every passive-beamforming run, in call order.
    pub optimizer_iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NetworkSolution {
    pub association: AssociationState,
    pub ris: RisAssignment,
    /// Beamformers in effect, ordered like `association.served(j)`.
    pub beamformers: BeamformerSet,
    /// Profiles in effect: the assisted BS's optimized profile, neutral elsewhere.
    pub phase_profiles: Vec<PhaseProfile>,
    /// Sum-rate of every RIS-assignment candidate, indexed by BS.
    pub ris_candidates: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub stats: SolveStats,
}

impl NetworkSolution {
    /// Total transmit power over all served beams.
    pub fn total_power(&self) -> f64 {
        self.beamformers.w.iter().flatten().map(|w| w.norm_squared()).sum()
    }

    /// Checks the problem constraints: power budget, unit-modulus phases,
    /// binary complete association with every BS serving someone, one-hot
    /// RIS assignment, and `sum_rate == sum(per_user_rate)`.
    pub fn audit(&self, cfg: &SystemConfig) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let power = self.total_power();
        if power > cfg.p_max * (1.0 + 1e-9) {
            problems.push(format!("transmit power {power} exceeds {}", cfg.p_max));
        }
        if let Err(e) = self.association.check(true) {
            problems.push(e);
        }
        for (j, p) in self.phase_profiles.iter().enumerate() {
            if p.modulus_error() > 1e-12 {
                problems.push(format!("BS {j}: phase profile not unit-modulus"));
            }
        }
        let r = self.ris.vector();
        if r.iter().map(|&x| x as usize).sum::<usize>() != 1 {
            problems.push("RIS assignment is not one-hot".into());
        }
        for j in 0..self.association.num_bs() {
            if self.beamformers.w[j].len() != self.association.served(j).len() {
                problems.push(format!("BS {j}: beamformer count differs from served set"));
            }
        }
        let total: f64 = self.per_user_rate.iter().sum();
        if (total - self.sum_rate).abs() > 1e-12 * total.abs().max(1.0) {
            problems.push(format!("sum_rate {} != sum of rates {total}", self.sum_rate));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    /// Plain-text record of the solution with a fixed field order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "num_bs = {}", self.association.num_bs());
        let _ = writeln!(out, "num_users = {}", self.association.num_users());
        for (j, row) in self.association.matrix().iter().enumerate() {
            let row: Vec<String> = row.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "U[{j}] = {}", row.join(" "));
        }
        let r: Vec<String> = self.ris.vector().iter().map(u8::to_string).collect();
        let _ = writeln!(out, "r = {}", r.join(" "));
        for (j, v) in self.ris_candidates.iter().enumerate() {
            let _ = writeln!(out, "ris_candidate[{j}] = {v:.9e}");
        }
        for (k, v) in self.per_user_rate.iter().enumerate() {
            let _ = writeln!(out, "rate[{k}] = {v:.9e}");
        }
        let _ = writeln!(out, "sum_rate = {:.9e}", self.sum_rate);
        let _ = writeln!(out, "total_power = {:.9e}", self.total_power());
        let _ = writeln!(out, "stage2_steps = {}", self.stats.stage2_steps);
        let iters: Vec<String> = self.stats.optimizer_iterations.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "optimizer_iterations = {}", iters.join(" "));
        out
    }
}
