//! Stationary-phase approximation of the diffracted field above the upper
//! crack (`y ≥ N+1`) and below the lower one (`y ≤ 0`), and a brute-force
//! quadrature of the same contour integrals used as its oracle.
//!
//! With `z = e^{−iξ}` and `ξ_P = −k cosΘ` the inversion integrals read
//!
//! ```text
//! y ≥ N+1:  u = −(A C₀/2π) ∫ 𝒦 e^{−iηN} e^{iξM} e^{iRφ₂} / ((1 − e^{i(ξ−ξ_P)})(1 − e^{iη})) dξ
//! y ≤ 0:    u = +(A C₀/2π) ∫ 𝒢 e^{iη} e^{iRφ₁} / ((1 − e^{i(ξ−ξ_P)})(1 − e^{iη})) dξ
//! ```
//!
//! with `φ₂ = η sinθ − ξ cosθ`, `φ₁ = −η sinθ − ξ cosθ`, ξ running over
//! `[−π, π]`.

use crate::contour::{self, Side};
use crate::kernel::KernelError;
use crate::mat2::Vec2;
use crate::wh::{SpectralSolution, WhError};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

/// Far-field validity threshold on `R ξ_h`.
pub const NEAR_FIELD_LIMIT: f64 = 10.0;

/// Half-width of the excluded band around the pole directions `±Θ`.
pub const POLE_BAND: f64 = 5.0 * PI / 180.0;

/// Half-width of the excluded band around multiples of 90°.
pub const QUADRANT_BAND: f64 = 2.0 * PI / 180.0;

/// Distance of `2θ` from an odd multiple of `π/2` below which the closed form
/// for the saddle is bypassed.
const SEC_SINGULAR_BAND: f64 = 4.0 * PI / 180.0;

/// Saddle equations are considered solved below this residual.
pub const SADDLE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FarFieldError {
    #[error("far field needs 0 < ω₁ < 2, got {0}")]
    FrequencyOutOfRange(f64),
    #[error("θ = {0} lies on the crack line")]
    OnCrackLine(f64),
    #[error("no admissible saddle point for θ = {0}")]
    NoSaddle(f64),
    #[error("second derivative of the phase vanishes at θ = {0}")]
    Degenerate(f64),
    #[error("y = {0} lies between the cracks")]
    InStrip(f64),
    #[error(transparent)]
    Wh(#[from] WhError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, FarFieldError>;

/// Which half-plane formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseBranch {
    /// `φ₁`, below the lower crack, `θ ∈ (π, 2π)`.
    Lower,
    /// `φ₂`, above the upper crack, `θ ∈ (0, π)`.
    Upper,
}

/// `ϖ = 2 − ω²/2`.
pub fn varpi(omega1: f64) -> f64 {
    2.0 - 0.5 * omega1 * omega1
}

/// `ξ_h ∈ (0, π)` with `z_h = e^{±iξ_h}` for real frequency.
pub fn xi_h(omega1: f64) -> f64 {
    (1.0 - 0.5 * omega1 * omega1).acos()
}

/// `sin ξ / √(1 − (ϖ − cos ξ)²)`, the left side of both saddle equations.
pub fn saddle_lhs(xi: f64, omega1: f64) -> f64 {
    let c = varpi(omega1) - xi.cos();
    xi.sin() / (1.0 - c * c).sqrt()
}

/// Residual of the saddle equation for the branch selected by `θ`.
pub fn saddle_residual(xi: f64, theta: f64, omega1: f64) -> f64 {
    let theta = normalize_angle(theta);
    let cot = theta.cos() / theta.sin();
    let lhs = saddle_lhs(xi, omega1);
    if theta < PI {
        (lhs + cot).abs()
    } else {
        (lhs - cot).abs()
    }
}

/// `θ` reduced to `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

/// Saddle point of the phase at one observation angle, for real `ω₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleData {
    pub theta: f64,
    pub branch: PhaseBranch,
    pub xi_s: f64,
    /// `η(ξ_s) = arccos(ϖ − cos ξ_s)`.
    pub eta_s: f64,
    /// `φ''(ξ_s)` for the branch's phase.
    pub phi_second: f64,
    /// Residual of the saddle equation.
    pub residual: f64,
    /// Whether the closed form was bypassed by root bracketing.
    pub bracketed: bool,
}

fn eta_real(xi: f64, omega1: f64) -> f64 {
    (varpi(omega1) - xi.cos()).clamp(-1.0, 1.0).acos()
}

/// `η''` of `η = arccos(ϖ − cos ξ)`.
fn eta_second(xi: f64, ce: f64, se: f64) -> f64 {
    -xi.cos() / se - xi.sin().powi(2) * ce / se.powi(3)
}

/// Candidate values of `Ξ = arccos ½(ϖ + τ)` from both signs in `τ`.
fn closed_form_candidates(theta: f64, omega1: f64) -> Vec<f64> {
    let w = varpi(omega1);
    let s2 = (2.0 * theta).sin();
    let c2 = (2.0 * theta).cos();
    let root = (w * w * s2 * s2 + 4.0 * c2 * c2).sqrt();
    [1.0, -1.0]
        .iter()
        .filter_map(|&sgn| {
            let tau = (w + sgn * root) / c2;
            let c = 0.5 * (w + tau);
            (c.is_finite() && c.abs() <= 1.0).then(|| c.acos())
        })
        .collect()
}

/// Root of `saddle_lhs(ξ) = target` on `(0, ξ_h)` by bisection.
fn bracket_root(target: f64, omega1: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, xi_h(omega1));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = saddle_lhs(mid, omega1);
        if v.is_nan() || v > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Saddle point `ξ_s(θ)` with the quadrant sign rules:
/// upper branch `−Ξ` for `θ < π/2`, `+Ξ` for `θ > π/2`;
/// lower branch `+Ξ` for `θ < 3π/2`, `−Ξ` for `θ > 3π/2`.
pub fn saddle_point(theta: f64, omega1: f64) -> Result<SaddleData> {
    if !(omega1 > 0.0 && omega1 < 2.0) {
        return Err(FarFieldError::FrequencyOutOfRange(omega1));
    }
    let th = normalize_angle(theta);
    if th.sin().abs() < 1e-12 {
        return Err(FarFieldError::OnCrackLine(theta));
    }
    let branch = if th < PI { PhaseBranch::Upper } else { PhaseBranch::Lower };
    let sign = match branch {
        PhaseBranch::Upper if th < FRAC_PI_2 => -1.0,
        PhaseBranch::Upper => 1.0,
        PhaseBranch::Lower if th < 3.0 * FRAC_PI_2 => 1.0,
        PhaseBranch::Lower => -1.0,
    };
    let target = (th.cos() / th.sin()).abs();
    let near_singular = ((2.0 * th).cos()).abs() < SEC_SINGULAR_BAND.sin();

    let mut best: Option<(f64, f64)> = None;
    if !near_singular {
        for big_xi in closed_form_candidates(th, omega1) {
            let xi = sign * big_xi;
            let r = saddle_residual(xi, th, omega1);
            if best.is_none_or(|(_, br)| r < br) {
                best = Some((xi, r));
            }
        }
    }
    let mut bracketed = false;
    let (xi_s, residual) = match best {
        Some((xi, r)) if r < SADDLE_TOL => (xi, r),
        _ => {
            bracketed = true;
            let xi = sign * bracket_root(target, omega1);
            (xi, saddle_residual(xi, th, omega1))
        }
    };
    // Near the branch point the equation is steep in ξ and the attainable
    // residual grows with |cot θ|³.
    if !(residual < SADDLE_TOL * target.max(1.0).powi(3)) {
        return Err(FarFieldError::NoSaddle(theta));
    }
    let eta_s = eta_real(xi_s, omega1);
    let (ce, se) = (eta_s.cos(), eta_s.sin());
    let e2 = eta_second(xi_s, ce, se);
    let phi_second = match branch {
        PhaseBranch::Upper => e2 * th.sin(),
        PhaseBranch::Lower => -e2 * th.sin(),
    };
    if !(phi_second.abs() > 1e-14) || !phi_second.is_finite() {
        return Err(FarFieldError::Degenerate(theta));
    }
    Ok(SaddleData {
        theta: th,
        branch,
        xi_s,
        eta_s,
        phi_second,
        residual,
        bracketed,
    })
}

/// Stationary-phase value at one polar position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldSample {
    pub theta: f64,
    pub r: f64,
    pub value: Complex64,
    pub saddle: SaddleData,
    /// `R ξ_h` below `NEAR_FIELD_LIMIT`.
    pub near_field: bool,
    /// Within `POLE_BAND` of the incident or reflected direction.
    pub near_pole: bool,
    /// Position falls between `y = 0` and `y = N+1`.
    pub in_strip: bool,
    /// `|e^{iRφ(ξ_s)}|`, the damping carried by the complex frequency.
    pub damping: f64,
}

/// Far-field evaluator bound to one spectral solution.
#[derive(Debug, Clone)]
pub struct FarField<'a> {
    solution: &'a SpectralSolution,
    /// `K₋⁻¹(z_P) f`.
    w: Vec2,
}

impl<'a> FarField<'a> {
    pub fn new(solution: &'a SpectralSolution) -> Result<Self> {
        let omega1 = solution.symbols().branching().omega().omega1();
        if !(omega1 > 0.0 && omega1 < 2.0) {
            return Err(FarFieldError::FrequencyOutOfRange(omega1));
        }
        let fk = solution.factorized_kernel();
        let w = fk.k_minus_inv(solution.wave().z_p())? * solution.f_vector();
        Ok(FarField { solution, w })
    }

    fn omega1(&self) -> f64 {
        self.solution.symbols().branching().omega().omega1()
    }

    /// `K₋(z) K₋⁻¹(z_P) f`; its second entry is `𝒦`, its first `𝒢`.
    fn k_minus_w(&self, z: Complex64) -> Result<Vec2> {
        Ok(self.solution.factorized_kernel().k_minus(z)? * self.w)
    }

    /// `𝒦(z) = aᵀ K₋(z) K₋⁻¹(z_P) f`, `a = (0, 1)`.
    pub fn amplitude_k(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.k_minus_w(z)?.0[1])
    }

    /// `𝒢(z) = bᵀ K₋(z) K₋⁻¹(z_P) f`, `b = (1, 0)`.
    pub fn amplitude_g(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.k_minus_w(z)?.0[0])
    }

    /// Complex `η(z) = −i log λ(z)` at the damped frequency.
    fn eta(&self, z: Complex64) -> Complex64 {
        -Complex64::i() * self.solution.kernel().branching().eval(z).lambda.ln()
    }

    /// Non-exponential part of the integrand at `ξ` for the given branch,
    /// including the `∓A C₀/2π` prefactor.
    fn amplitude(&self, branch: PhaseBranch, xi: Complex64, z: Complex64, eta: Complex64, kw: Vec2) -> Complex64 {
        let i = Complex64::i();
        let wave = self.solution.wave();
        let g = self.solution.geometry();
        let pre = wave.amplitude() * wave.c0() / (2.0 * PI);
        let denom = (1.0 - wave.z_p() / z) * (1.0 - (i * eta).exp());
        match branch {
            PhaseBranch::Upper => {
                -pre * kw.0[1] * (-i * eta * g.n() as f64).exp() * (i * xi * g.m() as f64).exp() / denom
            }
            PhaseBranch::Lower => pre * kw.0[0] * (i * eta).exp() / denom,
        }
    }

    fn phase(branch: PhaseBranch, xi: Complex64, eta: Complex64, x: f64, y: f64) -> Complex64 {
        // R φ₂ = η y − ξ x and R φ₁ = −η y − ξ x, with y the signed ordinate.
        match branch {
            PhaseBranch::Upper => eta * y - xi * x,
            PhaseBranch::Lower => -eta * y - xi * x,
        }
    }

    /// Stationary-phase approximation at `(R, θ)`. The saddle is located
    /// with real `ω₁`; amplitude and phase use the damped frequency.
    pub fn far_field(&self, theta: f64, r: f64) -> Result<FarFieldSample> {
        let omega1 = self.omega1();
        let saddle = saddle_point(theta, omega1)?;
        let th = saddle.theta;
        let (x, y) = (r * th.cos(), r * th.sin());
        let xi = Complex64::new(saddle.xi_s, 0.0);
        let z = (-Complex64::i() * xi).exp();
        let eta = self.eta(z);
        let kw = self.k_minus_w(z)?;
        let amp = self.amplitude(saddle.branch, xi, z, eta, kw);
        let phase = Self::phase(saddle.branch, xi, eta, x, y);
        let spread = (2.0 * PI / (r * saddle.phi_second.abs())).sqrt()
            * Complex64::from_polar(1.0, FRAC_PI_4 * saddle.phi_second.signum());
        let oscillation = (Complex64::i() * phase).exp();
        let value = amp * oscillation * spread;

        let theta_inc = normalize_angle(self.solution.wave().theta());
        let near_pole = [theta_inc, normalize_angle(-theta_inc)]
            .iter()
            .any(|&p| angular_distance(th, p) < POLE_BAND);
        let n = self.solution.geometry().n() as f64;
        let in_strip = match saddle.branch {
            PhaseBranch::Upper => y < n + 1.0,
            PhaseBranch::Lower => y > 0.0,
        };
        Ok(FarFieldSample {
            theta: th,
            r,
            value,
            saddle,
            near_field: r * xi_h(omega1) < NEAR_FIELD_LIMIT,
            near_pole,
            in_strip,
            damping: oscillation.norm(),
        })
    }

    /// Direct trapezoidal quadrature of the `ξ`-integral at a real point
    /// `(x, y)` outside the strip, on `n_quad` nodes (a power of two not
    /// below the kernel's node count).
    pub fn quadrature(&self, x: f64, y: f64, n_quad: usize) -> Result<Complex64> {
        let n = self.solution.geometry().n() as f64;
        let branch = if y >= n + 1.0 {
            PhaseBranch::Upper
        } else if y <= 0.0 {
            PhaseBranch::Lower
        } else {
            return Err(FarFieldError::InStrip(y));
        };
        let kw = self.k_minus_w_resampled(n_quad);
        let h = 2.0 * PI / n_quad as f64;
        let i = Complex64::i();
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..n_quad {
            let xi = Complex64::new(-PI + h * j as f64, 0.0);
            let node = (n_quad / 2 + n_quad - j) % n_quad;
            let z = contour::node(n_quad, node);
            let eta = self.eta(z);
            let phase = Self::phase(branch, xi, eta, x, y);
            sum += self.amplitude(branch, xi, z, eta, kw[node]) * (i * phase).exp();
        }
        Ok(sum * h)
    }

    /// `K₋(z)K₋⁻¹(z_P)f` on the `n_out`-node grid, interpolated from the
    /// kernel grid.
    fn k_minus_w_resampled(&self, n_out: usize) -> Vec<Vec2> {
        let km = self.solution.factorized_kernel().on_circle(Side::Minus, 1.0, 0.0);
        let comp = |c: usize| {
            let s: Vec<Complex64> = km.iter().map(|m| (*m * self.w).0[c]).collect();
            contour::resample(&s, n_out.max(s.len()))
        };
        let (a, b) = (comp(0), comp(1));
        a.into_iter().zip(b).map(|(p, q)| Vec2::new(p, q)).collect()
    }
}

/// Unsigned angular distance on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Whether `θ` lies within `QUADRANT_BAND` of a multiple of 90°.
pub fn in_quadrant_band(theta: f64) -> bool {
    let t = normalize_angle(theta);
    (0..=4).any(|k| (t - k as f64 * FRAC_PI_2).abs() <= QUADRANT_BAND + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ComplexFrequency, CrackGeometry, IncidentWave};
    use std::sync::OnceLock;

    const W1: f64 = 0.35;

    fn solution(m: i64) -> SpectralSolution {
        let w = ComplexFrequency::new(W1, 1e-3).unwrap();
        let wave = IncidentWave::new(&w, PI / 4.0, Complex64::new(1.0, 0.0)).unwrap();
        SpectralSolution::solve(&w, &wave, &CrackGeometry::new(4, m).unwrap(), Some(65536), true).unwrap()
    }

    fn base() -> &'static SpectralSolution {
        static S: OnceLock<SpectralSolution> = OnceLock::new();
        S.get_or_init(|| solution(0))
    }

    #[test]
    fn saddle_on_the_normal_is_zero() {
        let s = saddle_point(FRAC_PI_2, W1).unwrap();
        assert!(s.xi_s.abs() < 1e-12);
        let c = closed_form_candidates(FRAC_PI_2, W1);
        assert!(c.iter().any(|x| x.abs() < 1e-7), "{c:?}");
    }

    #[test]
    fn saddle_migrates_to_branch_point() {
        let xh = xi_h(W1);
        let mut last = 0.0;
        for deg in [150.0, 170.0, 178.0, 179.9] {
            let s = saddle_point(f64::to_radians(deg), W1).unwrap();
            assert!(s.xi_s > last && s.xi_s < xh);
            last = s.xi_s;
        }
        assert!(xh - last < 1e-3);
    }

    #[test]
    fn saddle_residuals_on_angle_grid() {
        let mut bracketed = 0;
        for k in 0..181 {
            let theta = (2.0 * k as f64).to_radians();
            if in_quadrant_band(theta) {
                continue;
            }
            let s = saddle_point(theta, W1).unwrap();
            assert!(s.residual < SADDLE_TOL, "θ = {}°: {}", 2 * k, s.residual);
            assert!(s.xi_s.abs() <= xi_h(W1));
            bracketed += s.bracketed as usize;
        }
        // Only the neighbourhoods of the odd multiples of 45° need bracketing.
        assert!(bracketed > 0 && bracketed < 30, "{bracketed}");
    }

    #[test]
    fn quadrant_sign_rules_and_continuity() {
        for (lo, hi, sign) in [(2.5, 87.5, -1.0), (92.5, 177.5, 1.0), (182.5, 267.5, 1.0), (272.5, 357.5, -1.0)] {
            let mut prev: Option<f64> = None;
            let steps = 200;
            for k in 0..=steps {
                let deg: f64 = lo + (hi - lo) * k as f64 / steps as f64;
                let s = saddle_point(deg.to_radians(), W1).unwrap();
                assert!(s.xi_s * sign > 0.0, "θ = {deg}");
                if let Some(p) = prev {
                    assert!((s.xi_s - p).abs() < 0.05, "jump at θ = {deg}");
                }
                prev = Some(s.xi_s);
            }
        }
    }

    #[test]
    fn closed_form_matches_bracketing_away_from_singularity() {
        for deg in [20.0f64, 70.0, 110.0, 160.0, 200.0, 250.0, 290.0, 340.0] {
            let th = deg.to_radians();
            let s = saddle_point(th, W1).unwrap();
            assert!(!s.bracketed);
            let b = bracket_root((th.cos() / th.sin()).abs(), W1);
            assert!((s.xi_s.abs() - b).abs() < 1e-10, "θ = {deg}");
        }
    }

    #[test]
    fn phase_is_stationary_at_saddle() {
        let ff = FarField::new(base()).unwrap();
        let _ = ff;
        for deg in [60.0f64, 120.0, 240.0, 300.0] {
            let th = deg.to_radians();
            let s = saddle_point(th, W1).unwrap();
            let phi = |xi: f64| {
                let e = eta_real(xi, W1);
                match s.branch {
                    PhaseBranch::Upper => e * th.sin() - xi * th.cos(),
                    PhaseBranch::Lower => -e * th.sin() - xi * th.cos(),
                }
            };
            let h = 1e-5;
            let d1 = (phi(s.xi_s + h) - phi(s.xi_s - h)) / (2.0 * h);
            let d2 = (phi(s.xi_s + h) - 2.0 * phi(s.xi_s) + phi(s.xi_s - h)) / (h * h);
            assert!(d1.abs() < 1e-8, "θ = {deg}: {d1}");
            assert!((d2 - s.phi_second).abs() < 1e-4 * s.phi_second.abs().max(1.0), "θ = {deg}");
            if s.branch == PhaseBranch::Upper {
                assert!(s.phi_second < 0.0);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        assert!(matches!(saddle_point(1.0, 2.3), Err(FarFieldError::FrequencyOutOfRange(_))));
        assert!(matches!(saddle_point(PI, 0.5), Err(FarFieldError::OnCrackLine(_))));
    }

    #[test]
    fn selectors_pick_rows() {
        let ff = FarField::new(base()).unwrap();
        let z = Complex64::from_polar(1.0, 0.4);
        let kw = ff.k_minus_w(z).unwrap();
        assert_eq!(ff.amplitude_k(z).unwrap(), kw.0[1]);
        assert_eq!(ff.amplitude_g(z).unwrap(), kw.0[0]);
        assert_eq!(ff.amplitude_k(z).unwrap() + ff.amplitude_g(z).unwrap(), kw.0[0] + kw.0[1]);
    }

    #[test]
    fn amplitudes_match_scalar_reduction_without_offset() {
        use crate::scalar_factors::GIndex;
        let s = base();
        let ff = FarField::new(s).unwrap();
        let k = s.kernel();
        let zp = s.wave().z_p();
        let f = s.f_vector();
        let g = |w: GIndex, z: Complex64| k.g_factors().eval(w, Side::Minus, z);
        for j in 0..16 {
            let z = Complex64::from_polar(1.0, 0.39 * j as f64 + 0.1);
            let l = k.l_factor(z, Side::Minus) / k.l_factor(zp, Side::Minus);
            let r1 = g(GIndex::One, z) / g(GIndex::One, zp) * (f.0[0] + f.0[1]);
            let r2 = g(GIndex::Two, z) / g(GIndex::Two, zp) * (f.0[0] - f.0[1]);
            let kk = l * 0.5 * (r1 - r2);
            let gg = l * 0.5 * (r1 + r2);
            assert!((ff.amplitude_k(z).unwrap() - kk).norm() < 1e-9 * kk.norm().max(1.0));
            assert!((ff.amplitude_g(z).unwrap() - gg).norm() < 1e-9 * gg.norm().max(1.0));
        }
    }

    #[test]
    fn amplitude_is_continuous_along_circle() {
        let ff = FarField::new(base()).unwrap();
        let n = 2000;
        let vals: Vec<Complex64> = (0..=n)
            .map(|j| {
                let xi = -PI + 2.0 * PI * j as f64 / n as f64;
                ff.amplitude_k((-Complex64::i() * xi).exp()).unwrap()
            })
            .collect();
        let steps: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        for j in 1..steps.len() - 1 {
            let local = steps[j - 1].max(steps[j + 1]).max(1e-12);
            assert!(steps[j] < 10.0 * local + 1e-9, "jump at {j}");
        }
    }

    #[test]
    fn quadrature_reproduces_lattice_inversion() {
        let s = base();
        let ff = FarField::new(s).unwrap();
        let pts = [(7, 9), (-4, 12), (3, -5), (-10, -2)];
        let exact = s.field_at(&pts).unwrap();
        for (p, e) in pts.iter().zip(&exact) {
            let q = ff.quadrature(p.0 as f64, p.1 as f64, 1 << 17).unwrap();
            assert!((q - e).norm() < 1e-9 * e.norm().max(1e-6), "{p:?}: {q} vs {e}");
        }
        assert!(matches!(ff.quadrature(0.0, 2.0, 1 << 17), Err(FarFieldError::InStrip(_))));
    }

    #[test]
    fn stationary_phase_matches_quadrature() {
        // Away from the pole directions the error is a few percent at R = 200
        // and falls like 1/R. At 15° from a pole it is larger at R = 200 but
        // falls at the same rate.
        let s = base();
        let ff = FarField::new(s).unwrap();
        for (deg, limit) in [(120.0f64, 0.05), (240.0, 0.05), (60.0, 0.25), (300.0, 0.25)] {
            let th = deg.to_radians();
            let errs: Vec<f64> = [200.0, 400.0, 800.0]
                .iter()
                .map(|&r| {
                    let sp = ff.far_field(th, r).unwrap();
                    assert!(!sp.near_pole && !sp.in_strip && !sp.near_field);
                    let q = ff.quadrature(r * th.cos(), r * th.sin(), 1 << 20).unwrap();
                    (sp.value - q).norm() / q.norm()
                })
                .collect();
            assert!(errs[0] < limit, "θ = {deg}: {errs:?}");
            assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "θ = {deg}: {errs:?}");
        }
    }

    #[test]
    fn quadrature_decays_like_inverse_square_root() {
        let s = base();
        let ff = FarField::new(s).unwrap();
        let th = 120f64.to_radians();
        let amp = |r: f64| {
            let sp = ff.far_field(th, r).unwrap();
            let q = ff.quadrature(r * th.cos(), r * th.sin(), 1 << 20).unwrap();
            q.norm() * r.sqrt() / sp.damping
        };
        let ratio = amp(800.0) / amp(200.0);
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn no_forcing_no_far_field() {
        let w = ComplexFrequency::new(W1, 1e-3).unwrap();
        let wave = IncidentWave::new(&w, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let s = SpectralSolution::solve(&w, &wave, &CrackGeometry::new(4, 0).unwrap(), Some(4096), true).unwrap();
        let ff = FarField::new(&s).unwrap();
        assert_eq!(ff.far_field(1.0, 100.0).unwrap().value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pole_band_flags() {
        let ff = FarField::new(base()).unwrap();
        assert!(ff.far_field(47f64.to_radians(), 100.0).unwrap().near_pole);
        assert!(ff.far_field(316f64.to_radians(), 100.0).unwrap().near_pole);
        assert!(!ff.far_field(60f64.to_radians(), 100.0).unwrap().near_pole);
        assert!(ff.far_field(60f64.to_radians(), 10.0).unwrap().near_field);
        assert!(ff.far_field(2f64.to_radians(), 100.0).unwrap().in_strip);
    }
}
