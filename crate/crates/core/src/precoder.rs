//! Normalized zero-forcing with equal per-user power.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Relative spectral cutoff, scaled by `max(M, S)`.
const RANK_RTOL: f64 = 1e-12;

/// Beamformers of every BS, `w[j]` ordered like the BS's served set.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub per_user_power: f64,
    pub w: Vec<Vec<DVector<C64>>>,
}

/// `P_max / K`, kept regardless of how many users a BS actually serves.
pub fn per_user_power(p_max: f64, num_users: usize) -> f64 {
    p_max / num_users as f64
}

/// Moore-Penrose pseudo-inverse of a tall `M x S` matrix of stacked
/// effective channels. Row `k` of the result is `f_k`, with `f_k h_i = 1`
/// for `i == k` and `0` otherwise.
///
/// Fails when the numerical rank, counting singular values at or above
/// `sigma_max * 1e-12 * max(M, S)`, is below `S`.
pub fn pseudo_inverse(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (m, s) = h.shape();
    if s > m {
        return Err(Error::RankDeficient { rank: m, required: s });
    }
    if s == 0 {
        return Ok(DMatrix::zeros(0, m));
    }
    let svd = h.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    let cutoff = sigma_max * RANK_RTOL * m.max(s) as f64;
    let rank = sigma.iter().filter(|&&x| x >= cutoff && x > 0.0).count();
    if rank < s {
        return Err(Error::RankDeficient { rank, required: s });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    // pinv = V diag(1/sigma) U^H
    let mut v = v_t.adjoint();
    for (c, &x) in sigma.iter().enumerate() {
        v.column_mut(c).scale_mut(1.0 / x);
    }
    Ok(v * u.adjoint())
}

/// ZF beamformers for the users whose effective channels are `eff`, in the
/// same order: `w_k = sqrt(P_max / K) f_k^H / ||f_k||`.
pub fn zf_beamformers(eff: &[DVector<C64>], p_max: f64, num_users: usize) -> Result<Vec<DVector<C64>>> {
    let Some(first) = eff.first() else {
        return Ok(Vec::new());
    };
    let m = first.len();
    if let Some(bad) = eff.iter().find(|h| h.len() != m) {
        return Err(Error::Dimension(format!("channel of length {} among length {m}", bad.len())));
    }
    let h = DMatrix::from_columns(eff);
    let pinv = pseudo_inverse(&h)?;
    let amp = per_user_power(p_max, num_users).sqrt();
    Ok(pinv
        .row_iter()
        .map(|f| {
            let w = f.adjoint();
            let norm = w.norm();
            w * C64::from(amp / norm)
        })
        .collect())
}
