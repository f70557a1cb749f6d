use super::{FluxSolution, HtmaGeometry};
use crate::{Result, MU0};

struct Network {
    r_g1: f64,
    r_g2: f64,
    r_m: f64,
    r_b: f64,
    mmf_tm: f64,
    mmf_bias: f64,
}

impl Network {
    fn new(geom: &HtmaGeometry, b_r: f64, x: f64) -> Self {
        let core = &geom.core;
        let mu = MU0 * core.mu_rec;
        let area = core.effective_area();
        Self {
            r_g1: (core.g0 - x) / (MU0 * area),
            r_g2: (core.g0 + x) / (MU0 * area),
            r_m: core.l_m / (mu * core.a_m),
            r_b: geom.l_bias / (mu * geom.a_bias),
            mmf_tm: b_r * core.l_m / mu,
            mmf_bias: geom.b_r_bias * geom.l_bias / mu,
        }
    }

    // Nodal analysis with the mover and back iron as reference (potential 0)
    // and the two pole potentials as unknowns.
    fn solve(&self) -> FluxSolution {
        let (g1, g2, gm, gb) = (1.0 / self.r_g1, 1.0 / self.r_g2, 1.0 / self.r_m, 1.0 / self.r_b);
        let a11 = gb + gm + g1;
        let a22 = gb + gm + g2;
        let a12 = -gm;
        let r1 = self.mmf_bias * gb + self.mmf_tm * gm;
        let r2 = self.mmf_bias * gb - self.mmf_tm * gm;
        let det = a11 * a22 - a12 * a12;
        let u1 = (r1 * a22 - a12 * r2) / det;
        let u2 = (a11 * r2 - a12 * r1) / det;
        let phi_tm = (u2 - u1 + self.mmf_tm) * gm;
        FluxSolution {
            phi_tm,
            phi_g1: u1 * g1,
            phi_g2: u2 * g2,
            phi_bias1: (self.mmf_bias - u1) * gb,
            phi_bias2: (self.mmf_bias - u2) * gb,
            h_m: 0.0,
            b_m: 0.0,
        }
    }
}

/// Three-source network: tunable magnet between the poles, one bias magnet
/// from the back iron to each pole, gaps from the poles to the mover.
pub fn solve_circuit_htma(geom: &HtmaGeometry, b_r: f64, x: f64) -> Result<FluxSolution> {
    geom.validate()?;
    geom.core.check_position(x)?;
    let mut sol = Network::new(geom, b_r, x).solve();
    sol.b_m = sol.phi_tm / geom.core.a_m;
    sol.h_m = (sol.b_m - b_r) / (MU0 * geom.core.mu_rec);
    Ok(sol)
}

/// Net Maxwell-stress force on the mover, positive toward gap 1.
pub fn force_htma(sol: &FluxSolution, geom: &HtmaGeometry) -> f64 {
    (sol.phi_g1 * sol.phi_g1 - sol.phi_g2 * sol.phi_g2) / (2.0 * MU0 * geom.core.effective_area())
}

/// Co-energy of the linear network at fixed magnet MMFs, J.
pub fn coenergy_htma(geom: &HtmaGeometry, b_r: f64, x: f64) -> Result<f64> {
    let sol = solve_circuit_htma(geom, b_r, x)?;
    let n = Network::new(geom, b_r, x);
    Ok(0.5 * (n.mmf_tm * sol.phi_tm + n.mmf_bias * (sol.phi_bias1 + sol.phi_bias2)))
}
