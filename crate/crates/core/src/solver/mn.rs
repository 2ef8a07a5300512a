use serde::Serialize;

use crate::error::{Error, Result};

/// Constants of the fixed-point construction: trajectories in `E` grow at
/// most like `M alpha_plus`, the graph is `N`-Lipschitz, and `T` contracts
/// with factor `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MNConstants {
    pub m: f64,
    pub n: f64,
    /// `M (1 + N)`.
    pub c: f64,
    /// `(sigma + tau) max(1 + N, M)`.
    pub q: f64,
    /// `|sigma - (M - 1) / (M (1 + N))|`.
    pub sigma_residual: f64,
    /// `|tau - N / (M (1 + N))|`.
    pub tau_residual: f64,
}

const IDENTITY_TOL: f64 = 1e-12;

/// Solves `sigma = (M - 1) / (M (1 + N))`, `tau = N / (M (1 + N))`.
///
/// Eliminating `N` gives `tau M^2 - (1 + tau - sigma) M + 1 = 0`; the smaller
/// root is taken in the cancellation-free form `2 / (b + sqrt(b^2 - 4 tau))`.
/// `tau = 0` reduces to `M = 1 / (1 - sigma)`, `N = 0`.
pub fn solve_mn(sigma: f64, tau: f64) -> Result<MNConstants> {
    if !(sigma >= 0.0 && tau >= 0.0) || !sigma.is_finite() || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "sigma and tau must be finite and non-negative, got {sigma}, {tau}"
        )));
    }
    if sigma + tau >= 0.5 {
        return Err(Error::Inadmissible { sigma, tau });
    }
    let (m, n) = if tau == 0.0 {
        (1.0 / (1.0 - sigma), 0.0)
    } else {
        let b = 1.0 + tau - sigma;
        let m = 2.0 / (b + (b * b - 4.0 * tau).sqrt());
        (m, tau * m / (1.0 - tau * m))
    };
    let denom = m * (1.0 + n);
    let sigma_residual = (sigma - (m - 1.0) / denom).abs();
    let tau_residual = (tau - n / denom).abs();
    if sigma_residual > IDENTITY_TOL || tau_residual > IDENTITY_TOL {
        return Err(Error::Invalid(format!(
            "M/N identities not met: residuals {sigma_residual:e}, {tau_residual:e}"
        )));
    }
    Ok(MNConstants {
        m,
        n,
        c: denom,
        q: (sigma + tau) * (1.0 + n).max(m),
        sigma_residual,
        tau_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_case() {
        let c = solve_mn(0.2, 0.2).unwrap();
        assert!((c.m - (5.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((c.n - 0.381966011250105).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tau() {
        let c = solve_mn(0.25, 0.0).unwrap();
        assert_eq!(c.m, 4.0 / 3.0);
        assert_eq!(c.n, 0.0);
        let z = solve_mn(0.0, 0.0).unwrap();
        assert_eq!((z.m, z.n, z.q), (1.0, 0.0, 0.0));
    }

    #[test]
    fn inadmissible() {
        assert!(matches!(solve_mn(0.3, 0.2), Err(Error::Inadmissible { .. })));
        assert!(solve_mn(-0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn identities_hold(s in 0.0f64..0.5, frac in 0.0f64..1.0) {
            let t = (0.5 - s) * frac * 0.999;
            let c = solve_mn(s, t).unwrap();
            prop_assert!(c.m >= 1.0 && c.m < 2.0);
            prop_assert!(c.n >= 0.0 && c.n < 1.0);
            prop_assert!(c.q < 1.0);
            prop_assert!(c.c > 0.0 && c.c < 4.0);
        }
    }
}
