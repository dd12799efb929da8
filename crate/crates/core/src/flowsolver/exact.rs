//! Closed-form Kovasznay flow.

use std::f64::consts::PI;

/// Decay rate `λ = Re/2 − sqrt(Re²/4 + 4π²)`.
pub fn kovasznay_lambda(re: f64) -> f64 {
    re / 2.0 - (re * re / 4.0 + 4.0 * PI * PI).sqrt()
}

/// Velocity and pressure of Kovasznay flow at `(x, y)`.
pub fn kovasznay_exact(x: f64, y: f64, re: f64, p0: f64) -> (f64, f64, f64) {
    let l = kovasznay_lambda(re);
    let e = (l * x).exp();
    let (s, c) = (2.0 * PI * y).sin_cos();
    (1.0 - e * c, l / (2.0 * PI) * e * s, p0 - 0.5 * (2.0 * l * x).exp())
}

/// Velocity gradient `g[i][j] = ∂v_i/∂x_j` of Kovasznay flow.
pub fn kovasznay_gradient(x: f64, y: f64, re: f64) -> [[f64; 2]; 2] {
    let l = kovasznay_lambda(re);
    let e = (l * x).exp();
    let (s, c) = (2.0 * PI * y).sin_cos();
    [[-l * e * c, 2.0 * PI * e * s], [l * l / (2.0 * PI) * e * s, l * e * c]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_at_re40() {
        assert!((kovasznay_lambda(40.0) - (-0.963_740_5)).abs() < 1e-7);
    }

    #[test]
    fn origin_line_value() {
        let (vx, _, _) = kovasznay_exact(0.0, 0.5, 40.0, 0.0);
        assert!((vx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn divergence_free_and_gradient_by_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = 1e-5;
        for _ in 0..200 {
            let (x, y) = (rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..1.5));
            let fx = |x: f64, y: f64| kovasznay_exact(x, y, 40.0, 0.0);
            let dudx = (fx(x + d, y).0 - fx(x - d, y).0) / (2.0 * d);
            let dvdy = (fx(x, y + d).1 - fx(x, y - d).1) / (2.0 * d);
            assert!((dudx + dvdy).abs() < 1e-6);
            let g = kovasznay_gradient(x, y, 40.0);
            assert!((g[0][0] - dudx).abs() < 1e-6);
            assert!((g[1][1] - dvdy).abs() < 1e-6);
            let dudy = (fx(x, y + d).0 - fx(x, y - d).0) / (2.0 * d);
            let dvdx = (fx(x + d, y).1 - fx(x - d, y).1) / (2.0 * d);
            assert!((g[0][1] - dudy).abs() < 1e-6 && (g[1][0] - dvdx).abs() < 1e-6);
        }
    }

    #[test]
    fn satisfies_momentum_balance() {
        // Steady NS with ρ = 1, μ = 1/Re checked by central differences.
        let re = 40.0;
        let d = 1e-4;
        let f = |x: f64, y: f64| kovasznay_exact(x, y, re, 0.3);
        for &(x, y) in &[(0.1, 0.2), (-0.3, 0.7), (0.8, -0.2)] {
            let (u, v, _) = f(x, y);
            let g = kovasznay_gradient(x, y, re);
            let lap_u = (f(x + d, y).0 + f(x - d, y).0 + f(x, y + d).0 + f(x, y - d).0 - 4.0 * u) / (d * d);
            let dpdx = (f(x + d, y).2 - f(x - d, y).2) / (2.0 * d);
            let r = u * g[0][0] + v * g[0][1] + dpdx - lap_u / re;
            assert!(r.abs() < 1e-5, "{r}");
        }
    }
}
