// SPDX-License-Identifier: MIT OR Apache-2.0

//! Window grids of the aggregated tests.

use crate::calibration::GridWindow;
use crate::error::{invalid, Error, Result};

use super::spec::GridPreset;

/// `⌈x⌉`, absorbing rounding error just above an integer.
pub fn ceil_robust(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// `⌊log₂ L⌋`, defined for `L ≥ 3`.
pub fn log2_floor(scale: f64) -> Result<usize> {
    if !(scale >= 3.0 && scale.is_finite()) {
        return Err(Error::UnsupportedScale { scale, reason: "dyadic grids require L ≥ 3".into() });
    }
    Ok((scale.log2() + 1e-12).floor() as usize)
}

/// `⌈L⌉`, defined for `L ≥ 1`.
pub fn ceil_scale(scale: f64) -> Result<usize> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::UnsupportedScale { scale, reason: "full grids require L ≥ 1".into() });
    }
    Ok(ceil_robust(scale))
}

/// `M_L = ⌈L / log L⌉`, defined for `L ≥ 3`.
pub fn m_l(scale: f64) -> Result<usize> {
    if !(scale >= 3.0 && scale.is_finite()) {
        return Err(Error::UnsupportedScale { scale, reason: "the M_L grid requires L ≥ 3".into() });
    }
    Ok(ceil_robust(scale / scale.ln()))
}

/// Windows `(τ*, τ* + (1−τ*)2⁻ᵏ]`, `k = 1..⌊log₂ L⌋`.
pub fn dyadic_lengths(tau_star: f64, scale: f64) -> Result<Vec<GridWindow>> {
    let k_max = log2_floor(scale)?;
    Ok((1..=k_max)
        .map(|k| {
            let rho = (1.0 - tau_star) * 0.5f64.powi(k as i32);
            GridWindow { tau1: tau_star, tau2: (tau_star + rho).min(1.0), rho }
        })
        .collect())
}

/// Jump window `(τ, 1]` given `τ` and `ρ = 1 − τ`.
fn jump(tau: f64, rho: f64) -> GridWindow {
    GridWindow { tau1: tau, tau2: 1.0, rho }
}

/// `(1 − 2⁻ᵏ, 1]` for `k` in a range.
fn dyadic_jumps(ks: impl Iterator<Item = usize>) -> impl Iterator<Item = GridWindow> {
    ks.map(|k| {
        let rho = 0.5f64.powi(k as i32);
        jump(1.0 - rho, rho)
    })
}

/// `(2⁻ᵏ, 1]` for `k` in a range.
fn dyadic_early_jumps(ks: impl Iterator<Item = usize>) -> impl Iterator<Item = GridWindow> {
    ks.map(|k| {
        let tau = 0.5f64.powi(k as i32);
        jump(tau, 1.0 - tau)
    })
}

/// `(k/10, 1]`, `k = 1..9`.
fn regular_jumps() -> Vec<GridWindow> {
    (1..=9).map(|k| GridWindow::on_grid(k, 10 - k, 10)).collect()
}

/// Jump windows for a known baseline.
pub fn jump_windows_known(preset: GridPreset, scale: f64) -> Result<Vec<GridWindow>> {
    Ok(match preset {
        GridPreset::Default => dyadic_jumps(1..=log2_floor(scale)?).collect(),
        GridPreset::ThetaD => dyadic_jumps(1..=6).collect(),
        GridPreset::ThetaR | GridPreset::ThetaRU => regular_jumps(),
        GridPreset::ThetaDU => dyadic_early_jumps(2..=6).chain(dyadic_jumps(1..=6)).collect(),
        other => return Err(invalid(format!("grid {} is not a set of jump locations", other.id()))),
    })
}

/// Jump windows for an unknown baseline; the default is `𝒟_L`.
pub fn jump_windows_cond(preset: GridPreset, scale: f64) -> Result<Vec<GridWindow>> {
    match preset {
        GridPreset::Default => {
            let k = log2_floor(scale)?;
            Ok(dyadic_early_jumps(2..=k).chain(dyadic_jumps(1..=k)).collect())
        }
        other => jump_windows_known(other, scale),
    }
}

/// All windows `(k/m, (k+k′)/m]` with `0 ≤ k < m`, `1 ≤ k′ ≤ m − k`, optionally
/// without `(0, 1]`.
pub fn full_grid(m: usize, exclude_unit: bool) -> Vec<GridWindow> {
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for k in 0..m {
        for kp in 1..=(m - k) {
            if exclude_unit && k == 0 && kp == m {
                continue;
            }
            out.push(GridWindow::on_grid(k, kp, m));
        }
    }
    out
}

/// Window grid of the full-grid families.
pub fn full_grid_windows(preset: GridPreset, conditional_quad: bool, scale: f64) -> Result<Vec<GridWindow>> {
    Ok(match preset {
        GridPreset::Default if conditional_quad => full_grid(m_l(scale)?, true),
        GridPreset::Default => full_grid(ceil_scale(scale)?, false),
        GridPreset::Theta | GridPreset::Theta1 => full_grid(100, conditional_quad),
        GridPreset::Theta2 => full_grid(22, true),
        other => return Err(invalid(format!("grid {} is not a window grid", other.id()))),
    })
}

/// Windows `(k/M, k/M + ℓ*]` for `k = 0..⌈(1−ℓ*)M⌉−1`.
pub fn scan_grid(ell_star: f64, m: usize) -> Vec<GridWindow> {
    let count = ceil_robust((1.0 - ell_star) * m as f64).max(1);
    (0..count)
        .map(|k| {
            let tau1 = k as f64 / m as f64;
            GridWindow { tau1, tau2: (tau1 + ell_star).min(1.0), rho: ell_star }
        })
        .collect()
}

/// `M = ⌈2/ℓ*⌉`.
pub fn scan_m_known(ell_star: f64) -> usize {
    ceil_robust(2.0 / ell_star)
}

/// `M = ⌈2/(ℓ*(1−ℓ*))⌉`.
pub fn scan_m_cond(ell_star: f64) -> usize {
    ceil_robust(2.0 / (ell_star * (1.0 - ell_star)))
}

/// Human-readable description of a grid.
pub fn describe(windows: &[GridWindow]) -> String {
    match windows {
        [] => "empty grid".into(),
        [w] => format!("({}, {}]", w.tau1, w.tau2),
        [first, .., last] => format!(
            "{} windows from ({}, {}] to ({}, {}]",
            windows.len(),
            first.tau1,
            first.tau2,
            last.tau1,
            last.tau2
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(log2_floor(100.0).unwrap(), 6);
        assert_eq!(log2_floor(64.0).unwrap(), 6);
        assert!(matches!(log2_floor(2.5), Err(Error::UnsupportedScale { .. })));
        assert_eq!(m_l(100.0).unwrap(), 22);
        assert_eq!(full_grid(100, false).len(), 5050);
        assert_eq!(full_grid(22, true).len(), 22 * 23 / 2 - 1);
        assert_eq!(jump_windows_cond(GridPreset::Default, 100.0).unwrap().len(), 2 * 6 - 1);
        assert_eq!(jump_windows_known(GridPreset::ThetaDU, 100.0).unwrap().len(), 11);
        assert_eq!(scan_m_known(0.4), 5);
        assert_eq!(scan_grid(0.4, 5).len(), 3);
        assert_eq!(scan_m_cond(0.5), 8);
    }

    #[test]
    fn windows_lie_in_unit_interval() {
        for w in full_grid(37, false).iter().chain(&scan_grid(0.3, scan_m_cond(0.3))) {
            w.validate().unwrap();
            assert!((w.tau2 - w.tau1 - w.rho).abs() < 1e-12);
        }
        let d = dyadic_lengths(0.3, 100.0).unwrap();
        assert_eq!(d.len(), 6);
        assert!((d[0].rho - 0.35).abs() < 1e-15);
    }
}
