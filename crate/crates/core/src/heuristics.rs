//! Low-complexity baseline beamformers.

use crate::error::{invalid, Result};
use crate::model::{Beamformer, ChannelSet, NoiseMatrices, PowerBudget, SystemParams};
use crate::recip::{matched_phases, wrap_phase};

fn equal_power_mags(nm: &NoiseMatrices, p_r: f64) -> Vec<f64> {
    let share = p_r / nm.d.len() as f64;
    nm.d.iter().map(|&d| (share / d).sqrt()).collect()
}

fn max_power_mags(nm: &NoiseMatrices, p: &[f64]) -> Vec<f64> {
    p.iter().zip(&nm.d).map(|(&pi, &d)| (pi / d).sqrt()).collect()
}

/// Every relay spends `P_R/K` with the matched phase. Reciprocal channels
/// only.
pub fn equal_power_bf(ch: &ChannelSet, sp: &SystemParams, p_r: f64) -> Result<Beamformer> {
    PowerBudget::Sum(p_r).validate(ch.k())?;
    let phases = matched_phases(ch)?;
    let nm = NoiseMatrices::new(ch, sp)?;
    Ok(Beamformer::from_polar(&equal_power_mags(&nm, p_r), &phases))
}

/// Every relay spends its full cap with the matched phase. Reciprocal
/// channels only.
pub fn max_power_bf(ch: &ChannelSet, sp: &SystemParams, p: &[f64]) -> Result<Beamformer> {
    PowerBudget::Individual(p.to_vec()).validate(ch.k())?;
    let phases = matched_phases(ch)?;
    let nm = NoiseMatrices::new(ch, sp)?;
    Ok(Beamformer::from_polar(&max_power_mags(&nm, p), &phases))
}

/// Per-relay phase choice for arbitrary channels: each relay aligns with
/// whichever composite channel (`h2 h1r` towards S1, `h1 h2r` towards S2)
/// gives it the larger single-relay SNR at its own magnitude. Magnitudes
/// follow the equal-power rule under a sum budget and the max-power rule
/// under per-relay caps.
pub fn greedy_phase_bf(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget) -> Result<Beamformer> {
    budget.validate(ch.k())?;
    let nm = NoiseMatrices::new(ch, sp)?;
    let mags = match budget {
        PowerBudget::Sum(p_r) => equal_power_mags(&nm, *p_r),
        PowerBudget::Individual(p) => max_power_mags(&nm, p),
    };
    let sig = sp.sigma_relay();
    let phases = (0..ch.k())
        .map(|i| {
            let (h1, h2, h1r, h2r) = (ch.h1()[i], ch.h2()[i], ch.h1r()[i], ch.h2r()[i]);
            let x2 = mags[i] * mags[i];
            let q1 = x2 * sp.p_s2() * (h2 * h1r).norm_sqr() / (sp.sigma_s1_sq() + x2 * h1r.norm_sqr() * sig[i]);
            let q2 = x2 * sp.p_s1() * (h1 * h2r).norm_sqr() / (sp.sigma_s2_sq() + x2 * h2r.norm_sqr() * sig[i]);
            if q1 >= q2 {
                wrap_phase(-(h2.arg() + h1r.arg()))
            } else {
                wrap_phase(-(h1.arg() + h2r.arg()))
            }
        })
        .collect::<Vec<_>>();
    if mags.iter().any(|m| !m.is_finite()) {
        return Err(invalid("budget", "produced non-finite magnitudes"));
    }
    Ok(Beamformer::from_polar(&mags, &phases))
}

/// Baseline for a budget: equal power (sum) or max power (individual) on
/// reciprocal channels, greedy phases otherwise.
pub fn baseline_bf(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget) -> Result<Beamformer> {
    if !ch.is_reciprocal() {
        return greedy_phase_bf(ch, sp, budget);
    }
    match budget {
        PowerBudget::Sum(p_r) => equal_power_bf(ch, sp, *p_r),
        PowerBudget::Individual(p) => max_power_bf(ch, sp, p),
    }
}
