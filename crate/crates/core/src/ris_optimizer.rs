//! Passive beamforming for one BS and its served users.
//!
//! The sum-rate of the cell is lifted out of the logarithm with auxiliary
//! ratios `lambda` (tight at `lambda = sinr`), the resulting sum of ratios is
//! decoupled with complex auxiliaries `q` (tight at the closed-form `q`), and
//! what remains is the unit-modulus quadratic program
//!
//! ```text
//! maximize  -psi^H D psi + 2 Re{psi^H v}   s.t. |psi_n| = 1
//! ```
//!
//! solved one element at a time in closed form. The ZF beamformers are
//! refreshed after each sweep.
//!
//! The variable `psi` used by the transform primitives is the elementwise
//! conjugate of the reflection coefficients `phi`: with
//! `a_{i,l} = diag(h_{r,l}^H) G w_i` and `b_{i,l} = h_{d,l}^H w_i`, the
//! identity `b_{i,l} + psi^H a_{i,l} = h_eff_l^H w_i` holds for `psi = conj(phi)`.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{cell_sinrs, effective_channel, rate};
use crate::precoder::zf_beamformers;
use crate::system_model::{PhaseProfile, SystemConfig};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop when the relative change of the cell sum-rate falls below this.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    /// Element sweeps per outer iteration (with `q` held fixed).
    pub phase_sweeps_per_outer: usize,
    /// Early exit between sweeps on relative change of the surrogate.
    pub phase_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { outer_tol: 1e-4, max_outer_iters: 100, phase_sweeps_per_outer: 1, phase_tol: 1e-6 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.outer_tol > 0.0
            && self.phase_tol > 0.0
            && self.max_outer_iters >= 1
            && self.phase_sweeps_per_outer >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Plan(format!("solver settings out of range: {self:?}")))
        }
    }
}

/// Channels from one BS to an ordered set of served users.
#[derive(Debug, Clone)]
pub struct CellProblem<'a> {
    pub bs: usize,
    pub h_direct: Vec<&'a DVector<C64>>,
    pub h_ris: Vec<&'a DVector<C64>>,
    pub g: &'a DMatrix<C64>,
    pub noise_power: f64,
    pub p_max: f64,
    /// Network-wide K, which sets the per-user power.
    pub num_users: usize,
}

impl<'a> CellProblem<'a> {
    pub fn new(channels: &'a ChannelSet, bs: usize, served: &[usize], cfg: &SystemConfig) -> Self {
        CellProblem {
            bs,
            h_direct: served.iter().map(|&k| &channels.h_direct[bs][k]).collect(),
            h_ris: served.iter().map(|&k| &channels.h_ris_user[k]).collect(),
            g: &channels.g_bs_ris[bs],
            noise_power: cfg.noise_power,
            p_max: cfg.p_max,
            num_users: cfg.num_users,
        }
    }

    pub fn len(&self) -> usize {
        self.h_direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_direct.is_empty()
    }

    pub fn ris_elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn effective_channels(&self, phi: &PhaseProfile) -> Result<Vec<DVector<C64>>> {
        self.h_direct
            .iter()
            .zip(&self.h_ris)
            .map(|(hd, hr)| effective_channel(hd, hr, phi.coefficients(), self.g))
            .collect()
    }

    pub fn beamformers(&self, phi: &PhaseProfile) -> Result<Vec<DVector<C64>>> {
        zf_beamformers(&self.effective_channels(phi)?, self.p_max, self.num_users)
    }

    pub fn sinrs(&self, phi: &PhaseProfile, beams: &[DVector<C64>]) -> Result<Vec<f64>> {
        Ok(cell_sinrs(&self.effective_channels(phi)?, beams, self.noise_power))
    }
}

/// Sum of the served users' rates.
pub fn objective_f3(cell: &CellProblem<'_>, phi: &PhaseProfile, beams: &[DVector<C64>]) -> Result<f64> {
    if cell.is_empty() {
        return Err(Error::EmptyCell(cell.bs));
    }
    Ok(cell.sinrs(phi, beams)?.into_iter().map(rate).sum())
}

/// `a[i][l] = diag(h_{r,l}^H) G w_i` and `b[i][l] = h_{d,l}^H w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbTables {
    pub a: Vec<Vec<DVector<C64>>>,
    pub b: Vec<Vec<C64>>,
}

impl AbTables {
    pub fn size(&self) -> usize {
        self.b.len()
    }

    /// `b[i][l] + psi^H a[i][l]`, the effective inner product of user l and beam i.
    pub fn inner(&self, i: usize, l: usize, psi: &DVector<C64>) -> C64 {
        self.b[i][l] + psi.dotc(&self.a[i][l])
    }

    /// `sum_i |b[i][l] + psi^H a[i][l]|^2 + noise`.
    fn received_power(&self, l: usize, psi: &DVector<C64>, noise_power: f64) -> f64 {
        (0..self.size()).map(|i| self.inner(i, l, psi).norm_sqr()).sum::<f64>() + noise_power
    }

    /// Per-user SINR computed from the tables.
    pub fn sinrs(&self, psi: &DVector<C64>, noise_power: f64) -> Vec<f64> {
        (0..self.size())
            .map(|l| {
                let signal = self.inner(l, l, psi).norm_sqr();
                let interference: f64 =
                    (0..self.size()).filter(|&i| i != l).map(|i| self.inner(i, l, psi).norm_sqr()).sum();
                signal / (interference + noise_power)
            })
            .collect()
    }
}

pub fn compute_ab(cell: &CellProblem<'_>, beams: &[DVector<C64>]) -> Result<AbTables> {
    let s = cell.len();
    if beams.len() != s {
        return Err(Error::Dimension(format!("{} beams for {s} users", beams.len())));
    }
    let (n, m) = cell.g.shape();
    if let Some(w) = beams.iter().find(|w| w.len() != m) {
        return Err(Error::Dimension(format!("beam of length {} for {m} antennas", w.len())));
    }
    if let Some(h) = cell.h_ris.iter().find(|h| h.len() != n) {
        return Err(Error::Dimension(format!("RIS channel of length {} for {n} elements", h.len())));
    }
    let mut a = Vec::with_capacity(s);
    let mut b = Vec::with_capacity(s);
    for w in beams {
        let gw = cell.g * w;
        a.push(cell.h_ris.iter().map(|hr| hr.zip_map(&gw, |h, x| h.conj() * x)).collect());
        b.push(cell.h_direct.iter().map(|hd| hd.dotc(w)).collect());
    }
    Ok(AbTables { a, b })
}

/// Optimal auxiliary ratios: `lambda_l = sinr_l`.
pub fn update_lambda(sinrs: &[f64]) -> Vec<f64> {
    sinrs.to_vec()
}

/// Lagrangian-transformed cell objective for given SINRs and ratios.
pub fn lagrangian_objective(sinrs: &[f64], lambda: &[f64]) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    sinrs.iter().zip(lambda).map(|(&g, &l)| (1.0 + l).log2() - (l - (1.0 + l) * g / (1.0 + g)) / ln2).sum()
}

/// `sum_l (1 + lambda_l) sinr_l / (1 + sinr_l)`, the part of the transformed
/// objective that depends on the phases.
pub fn fractional_objective(ab: &AbTables, lambda: &[f64], psi: &DVector<C64>, noise_power: f64) -> f64 {
    (0..ab.size())
        .map(|l| (1.0 + lambda[l]) * ab.inner(l, l, psi).norm_sqr() / ab.received_power(l, psi, noise_power))
        .sum()
}

/// Closed-form quadratic-transform auxiliaries.
pub fn update_q(ab: &AbTables, lambda: &[f64], psi: &DVector<C64>, noise_power: f64) -> Vec<C64> {
    (0..ab.size())
        .map(|l| ab.inner(l, l, psi) * (1.0 + lambda[l]).sqrt() / ab.received_power(l, psi, noise_power))
        .collect()
}

/// Quadratic-transform objective for explicit `q`.
pub fn quadratic_objective(
    ab: &AbTables,
    lambda: &[f64],
    q: &[C64],
    psi: &DVector<C64>,
    noise_power: f64,
) -> f64 {
    (0..ab.size())
        .map(|l| {
            2.0 * (1.0 + lambda[l]).sqrt() * (q[l].conj() * ab.inner(l, l, psi)).re
                - q[l].norm_sqr() * ab.received_power(l, psi, noise_power)
        })
        .sum()
}

/// Builds the quadratic form `(D, v)` of the phase subproblem.
pub fn build_dv(ab: &AbTables, lambda: &[f64], q: &[C64]) -> (DMatrix<C64>, DVector<C64>) {
    let s = ab.size();
    let n = ab.a.first().and_then(|r| r.first()).map_or(0, |a| a.len());
    // D = B B^H with columns |q_l| a_{i,l}.
    let mut cols = DMatrix::<C64>::zeros(n, s * s);
    let mut v = DVector::<C64>::zeros(n);
    for l in 0..s {
        let ql2 = q[l].norm_sqr();
        let ql = ql2.sqrt();
        v.axpy((1.0 + lambda[l]).sqrt() * q[l].conj(), &ab.a[l][l], C64::new(1.0, 0.0));
        for i in 0..s {
            cols.column_mut(l * s + i).copy_from(&(&ab.a[i][l] * C64::from(ql)));
            v.axpy(-ab.b[i][l].conj() * ql2, &ab.a[i][l], C64::new(1.0, 0.0));
        }
    }
    let d = &cols * cols.adjoint();
    // Exact Hermitian symmetry.
    let d = (&d + d.adjoint()) * C64::from(0.5);
    (d, v)
}

/// `-psi^H D psi + 2 Re{psi^H v}`.
pub fn surrogate(d: &DMatrix<C64>, v: &DVector<C64>, psi: &DVector<C64>) -> f64 {
    -psi.dotc(&(d * psi)).re + 2.0 * psi.dotc(v).re
}

fn coupling(n: usize, psi: &DVector<C64>, d: &DMatrix<C64>, v: &DVector<C64>) -> C64 {
    let mut c = v[n];
    for (m, &p) in psi.iter().enumerate() {
        if m != n {
            c -= d[(n, m)] * p;
        }
    }
    c
}

/// The surrogate as a function of element `n` alone, others fixed.
pub fn element_surrogate(
    n: usize,
    value: C64,
    psi: &DVector<C64>,
    d: &DMatrix<C64>,
    v: &DVector<C64>,
) -> f64 {
    let c = coupling(n, psi, d, v);
    -value.norm_sqr() * d[(n, n)].re + 2.0 * (value.conj() * c).re
}

/// Maximizer of [`element_surrogate`] on the unit circle:
/// `exp(j angle(v_n - sum_{m != n} d_{n,m} psi_m))`. A zero argument leaves
/// the element unchanged.
pub fn update_phase_element(n: usize, psi: &DVector<C64>, d: &DMatrix<C64>, v: &DVector<C64>) -> C64 {
    let c = coupling(n, psi, d, v);
    let r = c.norm();
    if r == 0.0 {
        psi[n]
    } else {
        c / r
    }
}

/// One ascending sweep over all elements. Returns the largest element change.
pub fn phase_sweep(psi: &mut DVector<C64>, d: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    let mut d_psi = d * &*psi;
    let mut max_change = 0.0f64;
    for n in 0..psi.len() {
        let c = v[n] - d_psi[n] + d[(n, n)] * psi[n];
        let r = c.norm();
        if r == 0.0 {
            continue;
        }
        let new = c / r;
        let delta = new - psi[n];
        if delta != C64::new(0.0, 0.0) {
            d_psi.axpy(delta, &d.column(n), C64::new(1.0, 0.0));
            psi[n] = new;
            max_change = max_change.max(delta.norm());
        }
    }
    max_change
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Cell sum-rate after the closing beamformer refresh.
    pub objective: f64,
    /// Cell sum-rate with the iteration's starting beamformers, before and
    /// after the phase update.
    pub before_phase: f64,
    pub after_phase: f64,
    pub max_phase_change: f64,
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub phi: PhaseProfile,
    pub beams: Vec<DVector<C64>>,
    /// Cell sum-rate at the starting profile with its ZF beamformers.
    pub initial_objective: f64,
    pub history: Vec<IterationRecord>,
}

impl CellSolution {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn objective(&self) -> f64 {
        self.history.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// Initial objective followed by the objective after every iteration.
    pub fn objective_history(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective).chain(self.history.iter().map(|r| r.objective)).collect()
    }
}

/// Alternates lambda, q, phase sweep and ZF refresh starting from the neutral
/// profile until the cell sum-rate settles.
pub fn optimize_bs(cell: &CellProblem<'_>, settings: &SolverSettings) -> Result<CellSolution> {
    optimize_bs_from(cell, PhaseProfile::neutral(cell.ris_elements()), settings)
}

pub fn optimize_bs_from(
    cell: &CellProblem<'_>,
    initial: PhaseProfile,
    settings: &SolverSettings,
) -> Result<CellSolution> {
    settings.validate()?;
    if cell.is_empty() {
        return Err(Error::EmptyCell(cell.bs));
    }
    if initial.len() != cell.ris_elements() {
        return Err(Error::Dimension(format!(
            "initial profile of length {} for {} elements",
            initial.len(),
            cell.ris_elements()
        )));
    }
    let sigma2 = cell.noise_power;
    let mut phi = initial;
    let mut beams = cell.beamformers(&phi)?;
    let initial_objective = objective_f3(cell, &phi, &beams)?;
    let mut prev = initial_objective;
    let mut history = Vec::new();

    for iter in 1..=settings.max_outer_iters {
        let ab = compute_ab(cell, &beams)?;
        let mut psi = phi.coefficients().map(|c| c.conj());
        let lambda = update_lambda(&ab.sinrs(&psi, sigma2));
        let q = update_q(&ab, &lambda, &psi, sigma2);
        let (d, v) = build_dv(&ab, &lambda, &q);

        let start = psi.clone();
        let mut f5 = surrogate(&d, &v, &psi);
        for _ in 0..settings.phase_sweeps_per_outer {
            phase_sweep(&mut psi, &d, &v);
            let next = surrogate(&d, &v, &psi);
            let settled = (next - f5).abs() <= settings.phase_tol * f5.abs().max(f64::MIN_POSITIVE);
            f5 = next;
            if settled {
                break;
            }
        }
        let max_phase_change = psi.iter().zip(start.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);

        let before_phase = prev;
        phi = PhaseProfile::from_coefficients(psi.map(|c| c.conj()));
        let after_phase = objective_f3(cell, &phi, &beams)?;
        beams = cell.beamformers(&phi)?;
        let objective = objective_f3(cell, &phi, &beams)?;
        log::trace!("bs={},{iter},{objective:.12e},{max_phase_change:.6e}", cell.bs);
        history.push(IterationRecord { iter, objective, before_phase, after_phase, max_phase_change });

        let change = (objective - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = objective;
        if change < settings.outer_tol {
            break;
        }
    }
    Ok(CellSolution { phi, beams, initial_objective, history })
}
