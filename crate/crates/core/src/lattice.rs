//! Lattice symbols: dispersion, the branch functions h, r, λ and η, branch
//! points, the annulus of analyticity and incident-wave quantities.
//!
//! Conventions. The lattice transform is `u^F(z) = Σ_x u_x z^{-x}`; the
//! incident wave is `A e^{i(k cosΘ x + k sinΘ y)}` with `k = k₁ + i k₂`,
//! `k₂ > 0`. The branch functions are built from factored square roots
//!
//! ```text
//! h(z) = s · zh^{-1/2} √(1 − zh/z) √(1 − zh z),   r(z) = zr^{-1/2} √(1 − zr/z) √(1 − zr z)
//! ```
//!
//! whose cuts are the segments `[0, zh]`, `[0, zr]` and the rays from
//! `1/zh`, `1/zr` to infinity. None of them meets the unit circle. The sign
//! `s = ±1` is fixed once so that `|λ(−1)| < 1`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 100;
const BISECTION_ITER: usize = 200;

/// Distance from a branch cut below which evaluation is refused.
pub const DELTA_CUT: f64 = 1e-10;

/// Largest frequency supported by the square lattice.
pub const PASS_BAND_EDGE: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),
    #[error("incidence angle {0} is outside (-pi, pi]")]
    InvalidAngle(f64),
    #[error("omega1 = {omega1} admits no propagating wave in direction {theta} rad")]
    PassBand { omega1: f64, theta: f64 },
    #[error("wavenumber iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("wavenumber has k2 = {0:e}, expected a decaying wave")]
    NonDecaying(f64),
    #[error("the symbol is singular at z = 0")]
    ZeroArgument,
    #[error("z = {z} lies within {distance:e} of a branch cut")]
    BranchCut { z: Complex64, distance: f64 },
    #[error("z = {z} is too close to the incident pole")]
    NearPole { z: Complex64 },
    #[error("invalid crack geometry: {0}")]
    InvalidGeometry(String),
    #[error("annulus of analyticity is empty: inner radius {inner}, outer radius {outer}")]
    EmptyAnnulus { inner: f64, outer: f64 },
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// `ω = ω₁ + iω₂` with a small positive dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFrequency {
    omega1: f64,
    omega2: f64,
}

impl ComplexFrequency {
    pub fn new(omega1: f64, omega2: f64) -> Result<Self> {
        if !omega1.is_finite() || omega1 <= 0.0 {
            return Err(LatticeError::InvalidFrequency(format!(
                "omega1 must be positive, got {omega1}"
            )));
        }
        if !omega2.is_finite() || omega2 <= 0.0 || omega2 > 0.1 {
            return Err(LatticeError::InvalidFrequency(format!(
                "omega2 must lie in (0, 0.1], got {omega2}"
            )));
        }
        Ok(ComplexFrequency { omega1, omega2 })
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn omega(&self) -> Complex64 {
        Complex64::new(self.omega1, self.omega2)
    }

    pub fn omega_sq(&self) -> Complex64 {
        let w = self.omega();
        w * w
    }
}

/// Row separation `N` and column offset `M` of the two cracks.
///
/// The lower crack breaks the bonds `(x,0)–(x,1)` for `x ≥ 0`, the upper one
/// the bonds `(x,N)–(x,N+1)` for `x ≥ M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrackGeometry {
    n: i64,
    m: i64,
}

impl CrackGeometry {
    pub fn new(n: i64, m: i64) -> Result<Self> {
        if n < 1 {
            return Err(LatticeError::InvalidGeometry(format!(
                "row separation N must be at least 1, got {n}"
            )));
        }
        Ok(CrackGeometry { n, m })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// Whether the vertical bond above `(x, y)` is broken.
    pub fn bond_above_is_broken(&self, x: i64, y: i64) -> bool {
        (y == 0 && x >= 0) || (y == self.n && x >= self.m)
    }
}

/// `Q(z) = 4 − z − 1/z − ω²`.
pub fn symbol_q(z: Complex64, omega: &ComplexFrequency) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(LatticeError::ZeroArgument);
    }
    Ok(q_unchecked(z, omega.omega_sq()))
}

#[inline]
pub(crate) fn q_unchecked(z: Complex64, omega_sq: Complex64) -> Complex64 {
    Complex64::new(4.0, 0.0) - z - z.inv() - omega_sq
}

/// Root of `z + 1/z = s` with modulus below one (the smaller root).
pub(crate) fn inner_root(s: Complex64) -> Complex64 {
    let disc = (s * s - 4.0).sqrt();
    let a = (s + disc) * 0.5;
    let b = (s - disc) * 0.5;
    if a.norm() <= b.norm() {
        a
    } else {
        b
    }
}

/// Branch points `(zh, zr)`: the roots inside the unit circle of
/// `z + 1/z = 2 − ω²` and `z + 1/z = 6 − ω²`.
pub fn branch_points(omega: &ComplexFrequency) -> (Complex64, Complex64) {
    let w2 = omega.omega_sq();
    (
        inner_root(Complex64::new(2.0, 0.0) - w2),
        inner_root(Complex64::new(6.0, 0.0) - w2),
    )
}

/// Residual `|ω² − 4(sin²(kx/2) + sin²(ky/2))|` for a wavenumber along `theta`.
pub fn dispersion_residual(omega: &ComplexFrequency, k: Complex64, theta: f64) -> f64 {
    dispersion_fn(omega.omega_sq(), k, theta.cos(), theta.sin()).norm()
}

fn dispersion_fn(omega_sq: Complex64, k: Complex64, c: f64, s: f64) -> Complex64 {
    let a = (k * c * 0.5).sin();
    let b = (k * s * 0.5).sin();
    omega_sq - (a * a + b * b) * 4.0
}

/// Solve the square-lattice dispersion relation along direction `theta`.
///
/// The real-frequency root is bracketed by bisection on the first monotone
/// branch of the dispersion surface, then refined by Newton's method in ℂ
/// for the complex frequency.
pub fn solve_wavenumber(omega: &ComplexFrequency, theta: f64) -> Result<Complex64> {
    if !(theta > -PI && theta <= PI) {
        return Err(LatticeError::InvalidAngle(theta));
    }
    let w1 = omega.omega1();
    if w1 >= PASS_BAND_EDGE {
        return Err(LatticeError::PassBand { omega1: w1, theta });
    }
    let (c, s) = (theta.cos(), theta.sin());
    let real_f = |k: f64| {
        let a = (0.5 * k * c).sin();
        let b = (0.5 * k * s).sin();
        4.0 * (a * a + b * b) - w1 * w1
    };
    let k_top = PI / c.abs().max(s.abs());
    if real_f(k_top) < 0.0 {
        return Err(LatticeError::PassBand { omega1: w1, theta });
    }
    let (mut lo, mut hi) = (0.0, k_top);
    for _ in 0..BISECTION_ITER {
        let mid = 0.5 * (lo + hi);
        if real_f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * k_top {
            break;
        }
    }

    let w2 = omega.omega_sq();
    let mut k = Complex64::new(0.5 * (lo + hi), 0.0);
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let f = dispersion_fn(w2, k, c, s);
        let df = -((k * c).sin() * c + (k * s).sin() * s) * 2.0;
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        k -= step;
        if step.norm() <= NEWTON_TOL * k.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    let residual = dispersion_fn(w2, k, c, s).norm();
    if !converged || residual >= 1e-12 {
        return Err(LatticeError::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    if k.im <= 0.0 {
        return Err(LatticeError::NonDecaying(k.im));
    }
    Ok(k)
}

/// Plane incident wave `A e^{i(kx x + ky y)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    amplitude: Complex64,
    theta: f64,
    k: Complex64,
    kx: Complex64,
    ky: Complex64,
    z_p: Complex64,
}

impl IncidentWave {
    pub fn new(omega: &ComplexFrequency, theta: f64, amplitude: Complex64) -> Result<Self> {
        let k = solve_wavenumber(omega, theta)?;
        let kx = k * theta.cos();
        let ky = k * theta.sin();
        let z_p = (Complex64::i() * kx).exp();
        Ok(IncidentWave {
            amplitude,
            theta,
            k,
            kx,
            ky,
            z_p,
        })
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn kx(&self) -> Complex64 {
        self.kx
    }

    pub fn ky(&self) -> Complex64 {
        self.ky
    }

    /// Pole `z_P = e^{ik cosΘ}` of the one-sided transform of the incident COD.
    pub fn z_p(&self) -> Complex64 {
        self.z_p
    }

    /// `C₀ = 1 − e^{ik sinΘ}`.
    pub fn c0(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) - (Complex64::i() * self.ky).exp()
    }

    /// Incident displacement at a lattice node (including the amplitude).
    pub fn displacement(&self, x: i64, y: i64) -> Complex64 {
        self.amplitude * (Complex64::i() * (self.kx * x as f64 + self.ky * y as f64)).exp()
    }

    /// Phase factor `e^{ik(N sinΘ + M cosΘ)}` of the second component of `f`.
    pub fn upper_phase(&self, geometry: &CrackGeometry) -> Complex64 {
        (Complex64::i() * (self.ky * geometry.n() as f64 + self.kx * geometry.m() as f64)).exp()
    }
}

/// Incident crack opening displacement `v^i_{row,x}`.
///
/// Row 1 is `u^i_{x,1} − u^i_{x,0}`, row 2 is `u^i_{x+M,N+1} − u^i_{x+M,N}`.
pub fn incident_cod(wave: &IncidentWave, geometry: &CrackGeometry, x: i64, row: u8) -> Complex64 {
    let i = Complex64::i();
    let base = wave.amplitude()
        * (i * wave.kx() * x as f64).exp()
        * ((i * wave.ky()).exp() - 1.0);
    match row {
        1 => base,
        _ => base * wave.upper_phase(geometry),
    }
}

/// `δ(z) = z / (z − z_P)`, the one-sided transform of `z_P^x`, `x ≥ 0`.
pub fn delta_plus(z: Complex64, z_p: Complex64) -> Result<Complex64> {
    if (z - z_p).norm() < 1e-12 * z.norm().max(1.0) {
        return Err(LatticeError::NearPole { z });
    }
    Ok(z / (z - z_p))
}

/// Values of the branch functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchValues {
    pub q: Complex64,
    pub h: Complex64,
    pub r: Complex64,
    pub lambda: Complex64,
}

/// Branch points of `Q ∓ 2` and the fixed branches of `h`, `r`, `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branching {
    omega: ComplexFrequency,
    omega_sq: Complex64,
    zh: Complex64,
    zr: Complex64,
    zh_isqrt: Complex64,
    zr_isqrt: Complex64,
    h_sign: f64,
}

impl Branching {
    pub fn new(omega: &ComplexFrequency) -> Self {
        let (zh, zr) = branch_points(omega);
        let mut b = Branching {
            omega: *omega,
            omega_sq: omega.omega_sq(),
            zh,
            zr,
            zh_isqrt: zh.sqrt().inv(),
            zr_isqrt: zr.sqrt().inv(),
            h_sign: 1.0,
        };
        let reference = b.eval(Complex64::new(-1.0, 0.0));
        if reference.lambda.norm() >= 1.0 {
            b.h_sign = -1.0;
        }
        b
    }

    pub fn omega(&self) -> &ComplexFrequency {
        &self.omega
    }

    pub fn omega_sq(&self) -> Complex64 {
        self.omega_sq
    }

    pub fn zh(&self) -> Complex64 {
        self.zh
    }

    pub fn zr(&self) -> Complex64 {
        self.zr
    }

    /// Sign applied to the factored square root defining `h`.
    pub fn h_sign(&self) -> f64 {
        self.h_sign
    }

    /// `R_L = max(|zh|, |zr|)`.
    pub fn r_l(&self) -> f64 {
        self.zh.norm().max(self.zr.norm())
    }

    /// Distance from `z` to the union of the branch cuts.
    pub fn cut_distance(&self, z: Complex64) -> f64 {
        let mut d = f64::INFINITY;
        for w in [self.zh, self.zr] {
            d = d.min(segment_distance(z, w));
            d = d.min(ray_distance(z, w.inv()));
        }
        d
    }

    /// Evaluate `Q, h, r, λ`, refusing points on a branch cut.
    ///
    /// Points within `DELTA_CUT` of a branch point itself are accepted: the
    /// functions are continuous there.
    pub fn try_eval(&self, z: Complex64) -> Result<BranchValues> {
        if z.norm() == 0.0 {
            return Err(LatticeError::ZeroArgument);
        }
        let near_point = [self.zh, self.zr, self.zh.inv(), self.zr.inv()]
            .iter()
            .any(|&p| (z - p).norm() <= DELTA_CUT);
        if !near_point {
            let d = self.cut_distance(z);
            if d < DELTA_CUT {
                return Err(LatticeError::BranchCut { z, distance: d });
            }
        }
        Ok(self.eval(z))
    }

    /// Evaluate `Q, h, r, λ` without the cut check. Intended for points in
    /// the annulus `R_L < |z| < 1/R_L`.
    #[inline]
    pub fn eval(&self, z: Complex64) -> BranchValues {
        let one = Complex64::new(1.0, 0.0);
        let zi = z.inv();
        let h = self.zh_isqrt
            * (one - self.zh * zi).sqrt()
            * (one - self.zh * z).sqrt()
            * self.h_sign;
        let r = self.zr_isqrt * (one - self.zr * zi).sqrt() * (one - self.zr * z).sqrt();
        let lambda = (r - h) / (r + h);
        BranchValues {
            q: Complex64::new(4.0, 0.0) - z - zi - self.omega_sq,
            h,
            r,
            lambda,
        }
    }

    pub fn lambda(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.try_eval(z)?.lambda)
    }

    pub fn h(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.try_eval(z)?.h)
    }

    pub fn r(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.try_eval(z)?.r)
    }

    /// `η = −i log λ` (principal logarithm). On the unit circle `λ` stays in
    /// the open upper half plane, so this branch is continuous along it.
    pub fn eta(&self, z: Complex64) -> Result<Complex64> {
        Ok(eta_of_lambda(self.try_eval(z)?.lambda))
    }
}

#[inline]
pub(crate) fn eta_of_lambda(lambda: Complex64) -> Complex64 {
    -Complex64::i() * lambda.ln()
}

fn segment_distance(z: Complex64, w: Complex64) -> f64 {
    let t = ((z * w.conj()).re / w.norm_sqr()).clamp(0.0, 1.0);
    (z - w * t).norm()
}

fn ray_distance(z: Complex64, p: Complex64) -> f64 {
    let t = ((z * p.conj()).re / p.norm_sqr()).max(1.0);
    (z - p * t).norm()
}

/// Branch structure together with the incident-wave annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSymbols {
    branching: Branching,
    r_plus: f64,
    r_minus: f64,
    c_l: Complex64,
}

impl LatticeSymbols {
    /// Fails when the annulus `max(R₊, R_L) < |z| < min(R₋, 1/R_L)` does not
    /// contain the unit circle; this happens for `cosΘ ≤ 0`.
    pub fn new(omega: &ComplexFrequency, wave: &IncidentWave) -> Result<Self> {
        let branching = Branching::new(omega);
        let k2 = wave.k().im;
        let r_plus = (-k2 * wave.theta().cos()).exp();
        let r_minus = k2.exp();
        let r_l = branching.r_l();
        let inner = r_plus.max(r_l);
        let outer = r_minus.min(1.0 / r_l);
        if !(inner < 1.0 && 1.0 < outer) {
            return Err(LatticeError::EmptyAnnulus { inner, outer });
        }
        // C_L² must equal the constant in h/r for L₊L₋ = h/r to hold.
        let c_l = (branching.zr.sqrt() / branching.zh.sqrt() * branching.h_sign).sqrt();
        Ok(LatticeSymbols {
            branching,
            r_plus,
            r_minus,
            c_l,
        })
    }

    pub fn branching(&self) -> &Branching {
        &self.branching
    }

    pub fn zh(&self) -> Complex64 {
        self.branching.zh
    }

    pub fn zr(&self) -> Complex64 {
        self.branching.zr
    }

    pub fn r_plus(&self) -> f64 {
        self.r_plus
    }

    pub fn r_minus(&self) -> f64 {
        self.r_minus
    }

    pub fn r_l(&self) -> f64 {
        self.branching.r_l()
    }

    /// Constant of the explicit `L₊` factor, a fourth root of `zr/zh`.
    pub fn c_l(&self) -> Complex64 {
        self.c_l
    }

    /// Inner radius `max(R₊, R_L)` of the annulus `𝒜`.
    pub fn inner_radius(&self) -> f64 {
        self.r_plus.max(self.r_l())
    }

    /// Outer radius `min(R₋, 1/R_L)` of the annulus `𝒜`.
    pub fn outer_radius(&self) -> f64 {
        self.r_minus.min(1.0 / self.r_l())
    }

    /// Smallest distance from the unit circle to the boundary of `𝒜`.
    pub fn margin(&self) -> f64 {
        (1.0 - self.inner_radius()).min(self.outer_radius() - 1.0)
    }
}
