mod common;

use common::small_config;
use proptest::prelude::*;
use risnet::association::*;
use risnet::experiments::{drop_phases, gain_based_association};
use risnet::metrics::{rate, sinr, EffectiveChannel};
use risnet::precoder::zf_beamformers;
use risnet::ris_optimizer::{optimize_bs, CellProblem};
use risnet::system_model::{AssociationState, PhaseProfile, SystemConfig};
use risnet::{solve, ChannelSet, SolverSettings};

fn configs() -> impl Strategy<Value = (SystemConfig, u64)> {
    (1usize..=3, 0usize..4, 2usize..5, prop::sample::select(vec![4usize, 8]), any::<u64>())
        .prop_map(|(j, extra, m, n, seed)| (small_config(j, (j + extra).min(j * m), m, n), seed))
}

/// Recomputes the sum-rate of `profiles` from scratch: fresh effective
/// channels, fresh ZF, rates summed in user order.
fn reference_sum_rate(
    assoc: &AssociationState,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    profiles: &[PhaseProfile],
) -> f64 {
    let eff = EffectiveChannel::compute(channels, profiles).unwrap();
    let w = (0..cfg.num_bs)
        .map(|j| zf_beamformers(&eff.for_users(j, assoc.served(j)), cfg.p_max, cfg.num_users).unwrap())
        .collect();
    let beams = risnet::BeamformerSet { per_user_power: cfg.per_user_power(), w };
    (0..cfg.num_users).map(|k| rate(sinr(k, assoc, &eff, &beams, cfg.noise_power).unwrap())).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_satisfy_every_constraint((cfg, seed) in configs()) {
        let ch = ChannelSet::for_drop(&cfg, seed);
        let sol = solve(&cfg, &ch, &SolverSettings::default()).unwrap();
        prop_assert!(sol.audit(&cfg).is_ok(), "{:?}", sol.audit(&cfg));
        prop_assert!((sol.total_power() - cfg.p_max).abs() <= 1e-9 * cfg.p_max);
        let u = sol.association.matrix();
        for k in 0..cfg.num_users {
            prop_assert_eq!(u.iter().map(|row| row[k] as usize).sum::<usize>(), 1);
        }
        for row in &u {
            prop_assert!(row.contains(&1));
            prop_assert!(row.iter().filter(|&&x| x == 1).count() <= cfg.bs_antennas);
        }
        prop_assert_eq!(sol.ris.vector().iter().map(|&x| x as usize).sum::<usize>(), 1);
        for (j, p) in sol.phase_profiles.iter().enumerate() {
            prop_assert!(p.modulus_error() < 1e-12);
            if j != sol.ris.assisted_bs() {
                prop_assert_eq!(p, &PhaseProfile::neutral(cfg.ris_elements));
            }
        }
    }

    #[test]
    fn ris_choice_is_the_table_maximum((cfg, seed) in configs()) {
        let ch = ChannelSet::for_drop(&cfg, seed);
        let sol = solve(&cfg, &ch, &SolverSettings::default()).unwrap();
        let best = sol.ris_candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(sol.sum_rate, best);
        prop_assert_eq!(sol.ris_candidates.len(), cfg.num_bs);
        let first_best = sol.ris_candidates.iter().position(|&x| x == best).unwrap();
        prop_assert_eq!(sol.ris.assisted_bs(), first_best);
        let reference = reference_sum_rate(&sol.association, &ch, &cfg, &sol.phase_profiles);
        prop_assert!((reference - sol.sum_rate).abs() <= 1e-9 * reference);
    }

    #[test]
    fn gain_based_keeps_strongest_bs_unless_repaired((cfg, seed) in configs()) {
        let ch = ChannelSet::for_drop(&cfg, seed);
        let out = gain_based_association(&ch, &cfg).unwrap();
        prop_assert!(out.association.check(true).is_ok());
        for k in 0..cfg.num_users {
            if out.repaired.contains(&k) {
                continue;
            }
            let j = out.association.serving_bs(k).unwrap();
            for other in 0..cfg.num_bs {
                prop_assert!(ch.direct_gain(j, k) >= ch.direct_gain(other, k));
            }
        }
        for j in 0..cfg.num_bs {
            prop_assert!(out.association.served(j).len() <= cfg.bs_antennas);
        }
    }
}

/// Replays both stages step by step with independently recomputed scores.
fn replay(cfg: &SystemConfig, ch: &ChannelSet, mode: PassiveMode<'_>) {
    let outcome = solve_stages(cfg, ch, mode);
    let mut assoc = AssociationState::new(cfg.num_bs, cfg.num_users);
    for j in 0..cfg.num_bs {
        let k = *assoc
            .unassigned()
            .iter()
            .max_by(|&&a, &&b| ch.direct_gain(j, a).total_cmp(&ch.direct_gain(j, b)).then(b.cmp(&a)))
            .unwrap();
        assoc.assign(j, k).unwrap();
    }
    let design = |assoc: &AssociationState, j: usize| match mode {
        PassiveMode::Optimize(s) => {
            optimize_bs(&CellProblem::new(ch, j, assoc.served(j), cfg), &s).unwrap().phi
        }
        PassiveMode::Fixed(p) => p[j].clone(),
    };
    let mut phases: Vec<PhaseProfile> = (0..cfg.num_bs).map(|j| design(&assoc, j)).collect();
    for pick in &outcome.picks {
        let mut scores = Vec::new();
        for (j, phi) in phases.iter().enumerate() {
            for &k in assoc.unassigned() {
                scores.push(stage2_candidate_sinr(j, k, &assoc, ch, cfg, phi).unwrap());
            }
        }
        let expected = select_candidate(&scores).unwrap();
        assert_eq!((expected.bs, expected.user), (pick.bs, pick.user));
        assert!((expected.score - pick.score).abs() <= 1e-9 * expected.score);
        assoc.assign(pick.bs, pick.user).unwrap();
        phases[pick.bs] = design(&assoc, pick.bs);
    }
    assert!(assoc.is_complete());
    assert_eq!(assoc, outcome.association);
    assert_eq!(phases, outcome.phases);
}

fn solve_stages(cfg: &SystemConfig, ch: &ChannelSet, mode: PassiveMode<'_>) -> AssociationOutcome {
    let outcome = stage1_benchmark(ch, cfg, mode).unwrap();
    stage2_associate_all(outcome, ch, cfg, mode).unwrap()
}

#[test]
fn stage_two_replays_with_fixed_phases() {
    let cfg = small_config(3, 7, 4, 8);
    for seed in 0..5 {
        let ch = ChannelSet::for_drop(&cfg, seed);
        let phases = drop_phases(&cfg, seed);
        replay(&cfg, &ch, PassiveMode::Fixed(&phases));
    }
}

#[test]
fn stage_two_replays_with_optimized_phases() {
    let cfg = small_config(2, 5, 4, 8);
    for seed in 0..3 {
        let ch = ChannelSet::for_drop(&cfg, seed);
        replay(&cfg, &ch, PassiveMode::Optimize(SolverSettings::default()));
    }
}

#[test]
fn reuse_policy_keeps_designed_beams() {
    let cfg = small_config(2, 4, 4, 8);
    let ch = ChannelSet::for_drop(&cfg, 3);
    let mode = PassiveMode::Optimize(SolverSettings::default());
    let outcome = solve_stages(&cfg, &ch, mode);
    let search = ris_exhaustive_search(&outcome, &ch, &cfg, PrecoderPolicy::Reuse).unwrap();
    assert_eq!(search.beamformers.w, outcome.beamformers);
}

#[test]
fn infeasible_scenarios_are_rejected() {
    let cfg = small_config(2, 1, 4, 4);
    let ch = ChannelSet::for_drop(&cfg, 1);
    assert!(solve(&cfg, &ch, &SolverSettings::default()).is_err());
    let other = ChannelSet::for_drop(&small_config(2, 3, 4, 4), 1);
    assert!(solve(&small_config(2, 2, 4, 4), &other, &SolverSettings::default()).is_err());
}
