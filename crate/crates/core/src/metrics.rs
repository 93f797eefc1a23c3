//! Effective channels, SINR and rates.
//!
//! The effective channel `h_eff` of a BS-user pair is stored as a column
//! vector whose conjugate transpose is the row channel
//! `h_d^H + h_r^H diag(phi) G`. Inner products with a beamformer are then
//! `h_eff.dotc(w)`.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::precoder::BeamformerSet;
use crate::system_model::{AssociationState, PhaseProfile};
use crate::C64;

/// Cells larger than this use compensated summation for interference.
const COMPENSATED_ABOVE: usize = 16;

/// `h_d + G^H (conj(phi) .* h_r)`, the column form of the effective channel.
pub fn effective_channel(
    h_d: &DVector<C64>,
    h_r: &DVector<C64>,
    phi: &DVector<C64>,
    g: &DMatrix<C64>,
) -> Result<DVector<C64>> {
    let (n, m) = g.shape();
    if h_d.len() != m || h_r.len() != n || phi.len() != n {
        return Err(Error::Dimension(format!(
            "effective channel: h_d {}, h_r {}, phi {}, G {n}x{m}",
            h_d.len(),
            h_r.len(),
            phi.len()
        )));
    }
    let weighted = phi.zip_map(h_r, |p, h| p.conj() * h);
    Ok(h_d + g.ad_mul(&weighted))
}

/// Effective channels of every BS-user pair under one phase profile per BS.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    h_tilde: Vec<Vec<DVector<C64>>>,
}

impl EffectiveChannel {
    pub fn compute(channels: &ChannelSet, profiles: &[PhaseProfile]) -> Result<Self> {
        if profiles.len() != channels.num_bs() {
            return Err(Error::Dimension(format!(
                "{} phase profiles for {} BSs",
                profiles.len(),
                channels.num_bs()
            )));
        }
        let h_tilde =
            (0..channels.num_bs()).map(|j| Self::row(channels, j, &profiles[j])).collect::<Result<_>>()?;
        Ok(EffectiveChannel { h_tilde })
    }

    fn row(channels: &ChannelSet, j: usize, profile: &PhaseProfile) -> Result<Vec<DVector<C64>>> {
        (0..channels.num_users())
            .map(|k| {
                effective_channel(
                    &channels.h_direct[j][k],
                    &channels.h_ris_user[k],
                    profile.coefficients(),
                    &channels.g_bs_ris[j],
                )
            })
            .collect()
    }

    /// Recomputes the channels of one BS after its profile changed.
    pub fn update_bs(&mut self, channels: &ChannelSet, j: usize, profile: &PhaseProfile) -> Result<()> {
        self.h_tilde[j] = Self::row(channels, j, profile)?;
        Ok(())
    }

    pub fn get(&self, bs: usize, user: usize) -> &DVector<C64> {
        &self.h_tilde[bs][user]
    }

    /// Effective channels from `bs` to `users`, in order.
    pub fn for_users(&self, bs: usize, users: &[usize]) -> Vec<DVector<C64>> {
        users.iter().map(|&k| self.h_tilde[bs][k].clone()).collect()
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn interference_sum(terms: impl Iterator<Item = f64>, cell_size: usize) -> f64 {
    if cell_size > COMPENSATED_ABOVE {
        compensated_sum(terms)
    } else {
        terms.sum()
    }
}

/// SINR of the user at position `target` in a cell, given the ordered
/// effective channels and beamformers of every user in that cell.
pub fn sinr_in_cell(
    target: usize,
    channels: &[DVector<C64>],
    beams: &[DVector<C64>],
    noise_power: f64,
) -> f64 {
    let h = &channels[target];
    let signal = h.dotc(&beams[target]).norm_sqr();
    let interference = interference_sum(
        beams.iter().enumerate().filter(|&(i, _)| i != target).map(|(_, w)| h.dotc(w).norm_sqr()),
        beams.len(),
    );
    signal / (interference + noise_power)
}

/// SINR of every user in a cell, ordered like `channels`.
pub fn cell_sinrs(channels: &[DVector<C64>], beams: &[DVector<C64>], noise_power: f64) -> Vec<f64> {
    (0..channels.len()).map(|l| sinr_in_cell(l, channels, beams, noise_power)).collect()
}

/// SINR of user `k` at its serving BS. Only that BS's beams interfere.
pub fn sinr(
    k: usize,
    assoc: &AssociationState,
    eff: &EffectiveChannel,
    beams: &BeamformerSet,
    noise_power: f64,
) -> Result<f64> {
    let j = assoc.serving_bs(k).ok_or(Error::UnassignedUser(k))?;
    let served = assoc.served(j);
    let pos = served.iter().position(|&u| u == k).ok_or(Error::UnassignedUser(k))?;
    let w = &beams.w[j];
    if w.len() != served.len() {
        return Err(Error::Dimension(format!("BS {j}: {} beamformers for {} users", w.len(), served.len())));
    }
    let h = eff.get(j, k);
    let signal = h.dotc(&w[pos]).norm_sqr();
    let interference = interference_sum(
        w.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, wi)| h.dotc(wi).norm_sqr()),
        w.len(),
    );
    Ok(signal / (interference + noise_power))
}

/// Achievable rate `log2(1 + sinr)` in bit/s/Hz.
pub fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// Per-user rates and their sum over a complete association.
pub fn sum_rate(
    assoc: &AssociationState,
    eff: &EffectiveChannel,
    beams: &BeamformerSet,
    noise_power: f64,
) -> Result<(Vec<f64>, f64)> {
    if !assoc.is_complete() {
        return Err(Error::IncompleteAssociation(assoc.unassigned().len()));
    }
    let rates = (0..assoc.num_users())
        .map(|k| sinr(k, assoc, eff, beams, noise_power).map(rate))
        .collect::<Result<Vec<_>>>()?;
    let total = rates.iter().sum();
    Ok((rates, total))
}
