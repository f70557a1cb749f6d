use super::{FluxSolution, TmaGeometry};
use crate::{Result, MU0};

struct Series {
    mmf: f64,
    r_magnet: f64,
    r_gap: f64,
}

fn series(geom: &TmaGeometry, b_r: f64, x: f64) -> Series {
    let mu = MU0 * geom.mu_rec;
    Series {
        mmf: b_r * geom.l_m / mu,
        r_magnet: geom.l_m / (mu * geom.a_m),
        r_gap: (geom.g0 - x) * geom.n_gaps as f64 / (MU0 * geom.effective_area()),
    }
}

/// Series circuit: soft magnet (recoil line) against the working gaps.
pub fn solve_circuit_tma(geom: &TmaGeometry, b_r: f64, x: f64) -> Result<FluxSolution> {
    geom.validate()?;
    geom.check_position(x)?;
    let c = series(geom, b_r, x);
    let phi = c.mmf / (c.r_magnet + c.r_gap);
    let b_m = phi / geom.a_m;
    Ok(FluxSolution {
        phi_tm: phi,
        phi_g1: phi,
        phi_g2: phi,
        phi_bias1: 0.0,
        phi_bias2: 0.0,
        h_m: (b_m - b_r) / (MU0 * geom.mu_rec),
        b_m,
    })
}

/// Maxwell-stress pull over all working faces, positive closing the gap.
pub fn force_tma(sol: &FluxSolution, geom: &TmaGeometry) -> f64 {
    geom.n_gaps as f64 * sol.phi_g1 * sol.phi_g1 / (2.0 * MU0 * geom.effective_area())
}

/// Co-energy of the linear circuit at fixed magnet MMF, J.
pub fn coenergy_tma(geom: &TmaGeometry, b_r: f64, x: f64) -> Result<f64> {
    let sol = solve_circuit_tma(geom, b_r, x)?;
    Ok(0.5 * series(geom, b_r, x).mmf * sol.phi_tm)
}
