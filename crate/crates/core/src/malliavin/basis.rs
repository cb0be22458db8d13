//! Projection of a gradient onto the trigonometric Hilbert basis.

use super::direction::CameronMartin;
use super::functional::{carre_du_champ, MalliavinGradient};

/// `‖DF − Σ_{i ≤ 2K} ⟨DF, m_i⟩ m_i‖_{L²}` for the normalized cosine and sine
/// directions of frequencies `1..=K`. By Parseval this is
/// `sqrt(Γ[F] − Σ ⟨DF, m_i⟩²)`; `DF` has zero mean so constants are not needed.
pub fn basis_projection_check(gradient: &MalliavinGradient, k: u32) -> f64 {
    let total = carre_du_champ(gradient, gradient).expect("a gradient matches its own path");
    if total == 0.0 {
        return 0.0;
    }
    let horizon = gradient.horizon;
    let mut captured = 0.0;
    for freq in 1..=k {
        for dir in [
            CameronMartin::cosine(horizon, freq),
            CameronMartin::sine(horizon, freq),
        ] {
            let dir = dir.expect("positive frequency and horizon");
            captured += gradient.directional(&dir).powi(2);
        }
    }
    (total - captured).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malliavin::functional::{grad_smooth, CappedJumpTime, JumpCount};
    use crate::simulate::HawkesPath;

    #[test]
    fn first_jump_residual_is_small_and_monotone() {
        let p = HawkesPath::new(5.0, vec![1.7, 2.4, 3.0]).unwrap();
        let g = grad_smooth(&CappedJumpTime(1), &p).unwrap();
        let norm = g.l2_norm_sq_piecewise().sqrt();
        let mut last = f64::INFINITY;
        for k in [1, 2, 4, 8, 16, 32, 64, 128, 256] {
            let r = basis_projection_check(&g, k);
            assert!(r <= last);
            last = r;
        }
        assert!(last <= 0.05 * norm, "residual {last} vs norm {norm}");
    }

    #[test]
    fn jump_count_residual_is_zero() {
        let p = HawkesPath::new(5.0, vec![1.7, 2.4]).unwrap();
        let g = grad_smooth(&JumpCount, &p).unwrap();
        assert_eq!(basis_projection_check(&g, 4), 0.0);
    }
}
