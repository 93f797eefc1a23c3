//! Monte Carlo comparison of association schemes and RIS situations.

mod output;
mod plan;
mod runner;

use std::fmt;
use std::str::FromStr;

use crate::association::{complete_solution, design_all_cells, solve_with, PassiveMode, PrecoderPolicy};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::ris_optimizer::SolverSettings;
use crate::system_model::{AssociationState, NetworkSolution, PhaseProfile, SystemConfig};

pub use output::{emit_outputs, format_sci, write_csv, OutputFiles, CSV_HEADER};
pub use plan::{load_plan, parse_plan, ExperimentPlan, SweepVar};
pub use runner::{drop_phases, drop_seed, run_plan, ResultRow, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssociationScheme {
    Proposed,
    GainBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RisSituation {
    /// RIS phases designed by the passive beamforming optimizer.
    Optimized,
    /// Uniformly random RIS phases.
    Random,
    /// No RIS path at all.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Method {
    pub association: AssociationScheme,
    pub ris: RisSituation,
}

impl Method {
    pub const fn new(association: AssociationScheme, ris: RisSituation) -> Self {
        Method { association, ris }
    }

    pub const ALL: [Method; 6] = [
        Method::new(AssociationScheme::Proposed, RisSituation::Optimized),
        Method::new(AssociationScheme::Proposed, RisSituation::Random),
        Method::new(AssociationScheme::Proposed, RisSituation::None),
        Method::new(AssociationScheme::GainBased, RisSituation::Optimized),
        Method::new(AssociationScheme::GainBased, RisSituation::Random),
        Method::new(AssociationScheme::GainBased, RisSituation::None),
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.association {
            AssociationScheme::Proposed => "proposed",
            AssociationScheme::GainBased => "gain_based",
        };
        let r = match self.ris {
            RisSituation::Optimized => "ris_optimized",
            RisSituation::Random => "ris_random",
            RisSituation::None => "ris_none",
        };
        write!(f, "{a}/{r}")
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Plan(format!("unknown method {s:?}")))
    }
}

/// Outcome of the direct-gain association rule.
#[derive(Debug, Clone)]
pub struct GainBasedAssociation {
    pub association: AssociationState,
    /// Users moved away from their strongest BS to make the association feasible.
    pub repaired: Vec<usize>,
}

/// Each user joins the BS with the strongest direct channel (lowest index on
/// ties). Afterwards, cells over the antenna count shed their weakest users
/// to the strongest BS with room, and empty cells take the weakest-attached
/// user among cells with more than one user, until every BS serves someone.
pub fn gain_based_association(channels: &ChannelSet, cfg: &SystemConfig) -> Result<GainBasedAssociation> {
    let (nj, nk) = (cfg.num_bs, cfg.num_users);
    if nk < nj || channels.num_bs() != nj || channels.num_users() != nk {
        return Err(Error::Dimension(format!(
            "gain-based association for J={nj}, K={nk} on channels with J={}, K={}",
            channels.num_bs(),
            channels.num_users()
        )));
    }
    let gain = |j: usize, k: usize| channels.direct_gain(j, k);
    let mut serving: Vec<usize> = (0..nk)
        .map(|k| (1..nj).fold(0, |best, j| if gain(j, k) > gain(best, k) { j } else { best }))
        .collect();
    let mut repaired = Vec::new();
    let load = |serving: &[usize], j: usize| serving.iter().filter(|&&s| s == j).count();
    let weakest = |serving: &[usize], pred: &dyn Fn(usize) -> bool| {
        (0..nk).filter(|&k| pred(k)).min_by(|&a, &b| gain(serving[a], a).total_cmp(&gain(serving[b], b)))
    };

    let capacity = cfg.cell_capacity();
    while let Some(j) = (0..nj).find(|&j| load(&serving, j) > capacity) {
        let k = weakest(&serving, &|k| serving[k] == j).expect("overloaded cell has users");
        let target = (0..nj)
            .filter(|&t| t != j && load(&serving, t) < capacity)
            .max_by(|&a, &b| gain(a, k).total_cmp(&gain(b, k)).then(b.cmp(&a)))
            .ok_or(Error::NoFeasibleCandidate(1))?;
        serving[k] = target;
        repaired.push(k);
    }
    while let Some(empty) = (0..nj).find(|&j| load(&serving, j) == 0) {
        let snapshot = serving.clone();
        let k =
            weakest(&snapshot, &|k| load(&snapshot, snapshot[k]) > 1).expect("K >= J leaves a shared cell");
        serving[k] = empty;
        repaired.push(k);
    }
    Ok(GainBasedAssociation { association: AssociationState::from_serving(nj, &serving)?, repaired })
}

/// Sum-rate and full solution of one method on one drop.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub sum_rate: f64,
    pub solution: NetworkSolution,
}

/// Runs `method` on `channels`. `random_phases` holds one profile per BS and
/// is only read by the random-RIS situation.
pub fn run_method(
    method: Method,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    settings: &SolverSettings,
    policy: PrecoderPolicy,
    random_phases: &[PhaseProfile],
) -> Result<MethodRun> {
    let neutral = vec![PhaseProfile::neutral(cfg.ris_elements); cfg.num_bs];
    let stripped;
    let (channels, mode) = match method.ris {
        RisSituation::Optimized => (channels, PassiveMode::Optimize(*settings)),
        RisSituation::Random => {
            if random_phases.len() != cfg.num_bs {
                return Err(Error::Dimension(format!(
                    "{} random profiles for {} BSs",
                    random_phases.len(),
                    cfg.num_bs
                )));
            }
            (channels, PassiveMode::Fixed(random_phases))
        }
        RisSituation::None => {
            stripped = channels.without_ris();
            (&stripped, PassiveMode::Fixed(&neutral))
        }
    };
    let solution = match method.association {
        AssociationScheme::Proposed => solve_with(cfg, channels, mode, policy)?,
        AssociationScheme::GainBased => {
            let assoc = gain_based_association(channels, cfg)?.association;
            let outcome = design_all_cells(assoc, channels, cfg, mode)?;
            complete_solution(outcome, channels, cfg, policy)?
        }
    };
    Ok(MethodRun { sum_rate: solution.sum_rate, solution })
}
