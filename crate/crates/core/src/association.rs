//! BS-user association by dynamically successive access, followed by the
//! exhaustive choice of which BS the RIS is tuned for.
//!
//! During association every BS is treated as if it had its own RIS, so each
//! cell carries its own phase profile. Stage I gives each BS, in index order,
//! the unassigned user with the strongest direct channel. Stage II then
//! repeatedly admits the (BS, user) pair with the highest SINR under a
//! hypothetical ZF precoder for the enlarged cell, re-running the passive
//! beamforming of the winning cell each time. Finally, each BS in turn gets
//! the real RIS with its optimized profile while every other BS sees the
//! neutral profile, and the best of these J configurations is kept.

use nalgebra::DVector;

use crate::channel::ChannelSet;
use crate::error::{ConfigError, Error, Result, Violation};
use crate::metrics::{sinr_in_cell, sum_rate, EffectiveChannel};
use crate::precoder::{zf_beamformers, BeamformerSet};
use crate::ris_optimizer::{optimize_bs, CellProblem, SolverSettings};
use crate::system_model::{
    AssociationState, NetworkSolution, PhaseProfile, RisAssignment, SolveStats, SystemConfig,
};
use crate::C64;

/// How each cell's phase profile is obtained while users are being admitted.
#[derive(Debug, Clone, Copy)]
pub enum PassiveMode<'a> {
    /// Run the passive beamforming optimizer on every cell update.
    Optimize(SolverSettings),
    /// Keep the given per-BS profiles; only the ZF precoders change.
    Fixed(&'a [PhaseProfile]),
}

/// Which beamformers the non-assisted BSs use in the RIS-assignment search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecoderPolicy {
    /// Recompute ZF for every BS against the channels it actually sees.
    #[default]
    Recompute,
    /// Keep the beamformers designed for each BS's individual profile.
    Reuse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub bs: usize,
    pub user: usize,
    /// Direct-channel gain in Stage I, SINR in Stage II. Zero when infeasible.
    pub score: f64,
    pub feasible: bool,
}

/// Association together with each cell's individual profile and beamformers.
#[derive(Debug, Clone)]
pub struct AssociationOutcome {
    pub association: AssociationState,
    pub phases: Vec<PhaseProfile>,
    /// Ordered like `association.served(j)`.
    pub beamformers: Vec<Vec<DVector<C64>>>,
    /// Stage II picks in order.
    pub picks: Vec<CandidateScore>,
    pub stats: SolveStats,
}

fn check_dimensions(channels: &ChannelSet, cfg: &SystemConfig) -> Result<()> {
    let found = (channels.num_bs(), channels.num_users(), channels.bs_antennas(), channels.ris_elements());
    let want = (cfg.num_bs, cfg.num_users, cfg.bs_antennas, cfg.ris_elements);
    if found != want {
        return Err(Error::Dimension(format!("channels are (J,K,M,N)={found:?}, config says {want:?}")));
    }
    Ok(())
}

/// Designs one cell's profile and beamformers for its current served set.
fn design_cell(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    bs: usize,
    served: &[usize],
    mode: PassiveMode<'_>,
    stats: &mut SolveStats,
) -> Result<(PhaseProfile, Vec<DVector<C64>>)> {
    let cell = CellProblem::new(channels, bs, served, cfg);
    match mode {
        PassiveMode::Optimize(settings) => {
            let sol = optimize_bs(&cell, &settings)?;
            stats.optimizer_iterations.push(sol.iterations());
            Ok((sol.phi, sol.beams))
        }
        PassiveMode::Fixed(profiles) => {
            let phi = profiles[bs].clone();
            let beams = cell.beamformers(&phi)?;
            Ok((phi, beams))
        }
    }
}

/// Designs every cell of a complete association, e.g. one produced by a
/// baseline rule.
pub fn design_all_cells(
    association: AssociationState,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    mode: PassiveMode<'_>,
) -> Result<AssociationOutcome> {
    check_dimensions(channels, cfg)?;
    let mut stats = SolveStats::default();
    let mut phases = Vec::with_capacity(cfg.num_bs);
    let mut beamformers = Vec::with_capacity(cfg.num_bs);
    for j in 0..cfg.num_bs {
        if association.served(j).is_empty() {
            return Err(Error::EmptyCell(j));
        }
        let (phi, w) = design_cell(channels, cfg, j, association.served(j), mode, &mut stats)?;
        phases.push(phi);
        beamformers.push(w);
    }
    Ok(AssociationOutcome { association, phases, beamformers, picks: Vec::new(), stats })
}

/// Stage I: one benchmark user per BS by strongest direct channel, then the
/// passive/active design of every singleton cell.
pub fn stage1_benchmark(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    mode: PassiveMode<'_>,
) -> Result<AssociationOutcome> {
    check_dimensions(channels, cfg)?;
    if cfg.num_users < cfg.num_bs {
        return Err(ConfigError {
            violations: vec![Violation::TooFewUsers { users: cfg.num_users, bss: cfg.num_bs }],
        }
        .into());
    }
    let mut assoc = AssociationState::new(cfg.num_bs, cfg.num_users);
    for j in 0..cfg.num_bs {
        let mut best: Option<(usize, f64)> = None;
        for &k in assoc.unassigned() {
            let gain = channels.direct_gain(j, k);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        let (k, _) = best.expect("K >= J leaves a user for every BS");
        assoc.assign(j, k)?;
    }
    design_all_cells(assoc, channels, cfg, mode)
}

fn score_cell(bs: usize, user: usize, cell_channels: &[DVector<C64>], cfg: &SystemConfig) -> CandidateScore {
    let infeasible = CandidateScore { bs, user, score: 0.0, feasible: false };
    if cell_channels.len() > cfg.cell_capacity() {
        return infeasible;
    }
    let Ok(beams) = zf_beamformers(cell_channels, cfg.p_max, cfg.num_users) else {
        return infeasible;
    };
    let target = cell_channels.len() - 1;
    let score = sinr_in_cell(target, cell_channels, &beams, cfg.noise_power);
    CandidateScore { bs, user, score, feasible: true }
}

/// SINR user `k` would get if BS `j` served `A_j + {k}` with ZF under its
/// current profile `phi_j`.
pub fn stage2_candidate_sinr(
    bs: usize,
    user: usize,
    assoc: &AssociationState,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    phi: &PhaseProfile,
) -> Result<CandidateScore> {
    if let Some(current) = assoc.serving_bs(user) {
        return Err(Error::AlreadyAssigned { user, bs: current });
    }
    let mut users = assoc.served(bs).to_vec();
    users.push(user);
    if users.len() > cfg.cell_capacity() {
        return Ok(CandidateScore { bs, user, score: 0.0, feasible: false });
    }
    let cell = CellProblem::new(channels, bs, &users, cfg);
    let eff = cell.effective_channels(phi)?;
    Ok(score_cell(bs, user, &eff, cfg))
}

/// Picks the best feasible candidate; ties go to the lowest BS, then user.
pub fn select_candidate(scores: &[CandidateScore]) -> Option<CandidateScore> {
    let mut best: Option<CandidateScore> = None;
    for s in scores.iter().filter(|s| s.feasible) {
        let better = match best {
            None => true,
            Some(b) => s.score > b.score || (s.score == b.score && (s.bs, s.user) < (b.bs, b.user)),
        };
        if better {
            best = Some(*s);
        }
    }
    best
}

/// Scores every (BS, unassigned user) pair, BS-major.
pub fn stage2_scores(
    assoc: &AssociationState,
    eff: &EffectiveChannel,
    cfg: &SystemConfig,
) -> Vec<CandidateScore> {
    let mut scores = Vec::with_capacity(cfg.num_bs * assoc.unassigned().len());
    for j in 0..cfg.num_bs {
        let base = eff.for_users(j, assoc.served(j));
        for &k in assoc.unassigned() {
            let mut cell = base.clone();
            cell.push(eff.get(j, k).clone());
            scores.push(score_cell(j, k, &cell, cfg));
        }
    }
    scores
}

/// Stage II: admits the remaining users one at a time until none is left.
pub fn stage2_associate_all(
    mut outcome: AssociationOutcome,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    mode: PassiveMode<'_>,
) -> Result<AssociationOutcome> {
    check_dimensions(channels, cfg)?;
    let mut eff = EffectiveChannel::compute(channels, &outcome.phases)?;
    while !outcome.association.is_complete() {
        let scores = stage2_scores(&outcome.association, &eff, cfg);
        let pick = select_candidate(&scores)
            .ok_or(Error::NoFeasibleCandidate(outcome.association.unassigned().len()))?;
        log::debug!("stage2: BS {} admits user {} (sinr {:.4e})", pick.bs, pick.user, pick.score);
        outcome.association.assign(pick.bs, pick.user)?;
        let served = outcome.association.served(pick.bs).to_vec();
        let (phi, w) = design_cell(channels, cfg, pick.bs, &served, mode, &mut outcome.stats)?;
        eff.update_bs(channels, pick.bs, &phi)?;
        outcome.phases[pick.bs] = phi;
        outcome.beamformers[pick.bs] = w;
        outcome.picks.push(pick);
        outcome.stats.stage2_steps += 1;
    }
    Ok(outcome)
}

/// Result of trying the RIS on each BS in turn.
#[derive(Debug, Clone)]
pub struct RisSearch {
    pub assignment: RisAssignment,
    /// Sum-rate with the RIS tuned for each BS, indexed by BS.
    pub table: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub profiles: Vec<PhaseProfile>,
    pub beamformers: BeamformerSet,
}

/// Evaluates every one-hot RIS assignment: the assisted BS uses its own
/// profile, all others the neutral one. Returns the best (lowest index on ties).
pub fn ris_exhaustive_search(
    outcome: &AssociationOutcome,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    policy: PrecoderPolicy,
) -> Result<RisSearch> {
    check_dimensions(channels, cfg)?;
    let assoc = &outcome.association;
    if !assoc.is_complete() {
        return Err(Error::IncompleteAssociation(assoc.unassigned().len()));
    }
    let neutral = PhaseProfile::neutral(cfg.ris_elements);
    let per_user_power = cfg.per_user_power();
    let mut best: Option<RisSearch> = None;
    let mut table = Vec::with_capacity(cfg.num_bs);
    for assisted in 0..cfg.num_bs {
        let profiles: Vec<PhaseProfile> = (0..cfg.num_bs)
            .map(|j| if j == assisted { outcome.phases[j].clone() } else { neutral.clone() })
            .collect();
        let eff = EffectiveChannel::compute(channels, &profiles)?;
        let w = match policy {
            PrecoderPolicy::Recompute => (0..cfg.num_bs)
                .map(|j| zf_beamformers(&eff.for_users(j, assoc.served(j)), cfg.p_max, cfg.num_users))
                .collect::<Result<Vec<_>>>()?,
            PrecoderPolicy::Reuse => outcome.beamformers.clone(),
        };
        let beams = BeamformerSet { per_user_power, w };
        let (rates, total) = sum_rate(assoc, &eff, &beams, cfg.noise_power)?;
        table.push(total);
        if best.as_ref().is_none_or(|b| total > b.table[0]) {
            best = Some(RisSearch {
                assignment: RisAssignment::new(assisted, cfg.num_bs)?,
                // Holds the running best until the table is complete.
                table: vec![total],
                per_user_rate: rates,
                profiles,
                beamformers: beams,
            });
        }
    }
    let mut best = best.expect("at least one BS");
    best.table = table;
    Ok(best)
}

/// Runs the exhaustive RIS search and packages the final solution.
pub fn complete_solution(
    outcome: AssociationOutcome,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    policy: PrecoderPolicy,
) -> Result<NetworkSolution> {
    let search = ris_exhaustive_search(&outcome, channels, cfg, policy)?;
    let sum_rate = search.table[search.assignment.assisted_bs()];
    Ok(NetworkSolution {
        association: outcome.association,
        ris: search.assignment,
        beamformers: search.beamformers,
        phase_profiles: search.profiles,
        ris_candidates: search.table,
        per_user_rate: search.per_user_rate,
        sum_rate,
        stats: outcome.stats,
    })
}

/// Two-stage association with the given passive mode, then RIS assignment.
pub fn solve_with(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    mode: PassiveMode<'_>,
    policy: PrecoderPolicy,
) -> Result<NetworkSolution> {
    let outcome = stage1_benchmark(channels, cfg, mode)?;
    let outcome = stage2_associate_all(outcome, channels, cfg, mode)?;
    complete_solution(outcome, channels, cfg, policy)
}

/// The full algorithm: association, alternating active/passive beamforming,
/// and exhaustive RIS assignment.
pub fn solve(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    settings: &SolverSettings,
) -> Result<NetworkSolution> {
    solve_with(cfg, channels, PassiveMode::Optimize(*settings), PrecoderPolicy::Recompute)
}
