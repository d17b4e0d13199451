//! Scalar Wiener–Hopf factors: the explicit `L±`, the elementary factors
//! `𝓕±` and `J±`, and the factorization of `G₁ = 1 + λ^N`, `G₂ = 1 − λ^N`.
//!
//! For even `N` the symbols are written through Chebyshev polynomials of
//! `Q/2` as products of elementary quadratic factors times `λ^{N/2}`, whose
//! split comes from the logarithm `i(N/2)η`. For odd `N`, or on request, the
//! factors come straight from the multiplicative split of `1 ± λ^N`.

use crate::contour::{self, ContourError, FourierPlan, Side, SplitFunction};
use crate::lattice::{inner_root, Branching, ComplexFrequency, LatticeError};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("closed-form factors need an even row separation, got N = {0}")]
    OddSeparation(i64),
    #[error("z = {z} is outside the domain of the {side:?} factor")]
    OutsideDomain { z: Complex64, side: Side },
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

pub type Result<T> = std::result::Result<T, FactorError>;

/// Selects `G₁ = 1 + λ^N` or `G₂ = 1 − λ^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GIndex {
    One,
    Two,
}

/// Explicit factors `L₊(z) = C_L √(1 − zh/z) / √(1 − zr/z)`, `L₋(z) = L₊(1/z)`.
///
/// `c_l` must satisfy `C_L² = s √zr / √zh` with `s` the sign of `h`; then
/// `L₊ L₋ = h / r`.
pub fn factor_l(branching: &Branching, c_l: Complex64, z: Complex64, side: Side) -> Result<Complex64> {
    let r_l = branching.r_l();
    let ok = match side {
        Side::Plus => z.norm() > r_l,
        Side::Minus => z.norm() * r_l < 1.0,
    };
    if !ok {
        return Err(FactorError::OutsideDomain { z, side });
    }
    Ok(factor_l_unchecked(branching, c_l, z, side))
}

#[inline]
pub(crate) fn factor_l_unchecked(branching: &Branching, c_l: Complex64, z: Complex64, side: Side) -> Complex64 {
    let w = match side {
        Side::Plus => z.inv(),
        Side::Minus => z,
    };
    let one = Complex64::new(1.0, 0.0);
    c_l * (one - branching.zh() * w).sqrt() / (one - branching.zr() * w).sqrt()
}

/// `C_L` for a given branching: the fourth root of `zr/zh` compatible with
/// the sign of `h`.
pub fn l_constant(branching: &Branching) -> Complex64 {
    (branching.zr().sqrt() / branching.zh().sqrt() * branching.h_sign()).sqrt()
}

/// Root inside the unit circle of `Q(z) − 2 + 4 sin²(φ/2) = 0`.
pub fn z_f(phi: f64, omega: &ComplexFrequency) -> Complex64 {
    let s = (0.5 * phi).sin();
    inner_root(Complex64::new(2.0 + 4.0 * s * s, 0.0) - omega.omega_sq())
}

/// `𝓕(z; z_F) = z_F^{-1} (1 − z_F z)(1 − z_F/z)`.
pub fn function_f(z: Complex64, zf: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    zf.inv() * (one - zf * z) * (one - zf * z.inv())
}

/// `𝓕±(z; z_F) = z_F^{-1/2} (1 − z_F z^{∓1})`.
pub fn factor_f_elementary(z: Complex64, zf: Complex64, side: Side) -> Complex64 {
    let w = match side {
        Side::Plus => z.inv(),
        Side::Minus => z,
    };
    zf.sqrt().inv() * (Complex64::new(1.0, 0.0) - zf * w)
}

/// Chebyshev polynomial of the first kind by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: Complex64) -> Complex64 {
    let (mut a, mut b) = (Complex64::new(1.0, 0.0), x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = x * b * 2.0 - a;
        a = b;
        b = c;
    }
    b
}

/// Chebyshev polynomial of the second kind by the three-term recurrence.
pub fn chebyshev_u(n: usize, x: Complex64) -> Complex64 {
    let (mut a, mut b) = (Complex64::new(1.0, 0.0), x * 2.0);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = x * b * 2.0 - a;
        a = b;
        b = c;
    }
    b
}

/// `1 ± λ^N` evaluated directly.
pub fn g_direct(branching: &Branching, n_rows: i64, z: Complex64, which: GIndex) -> Complex64 {
    let ln = branching.eval(z).lambda.powi(n_rows as i32);
    match which {
        GIndex::One => 1.0 + ln,
        GIndex::Two => 1.0 - ln,
    }
}

/// `G₁ = 2λ^𝒩 T_𝒩(Q/2)` and `G₂ = λ^𝒩 r h U_{𝒩−1}(Q/2)` with `𝒩 = N/2`.
pub fn g_chebyshev(branching: &Branching, n_rows: i64, z: Complex64, which: GIndex) -> Result<Complex64> {
    if n_rows % 2 != 0 {
        return Err(FactorError::OddSeparation(n_rows));
    }
    let half = (n_rows / 2) as usize;
    let v = branching.eval(z);
    let lk = v.lambda.powi(half as i32);
    let x = v.q * 0.5;
    Ok(match which {
        GIndex::One => lk * chebyshev_t(half, x) * 2.0,
        GIndex::Two => lk * v.r * v.h * chebyshev_u(half - 1, x),
    })
}

/// Roots and splits of the even-`N` product factorization.
#[derive(Debug, Clone)]
pub struct ElementaryFactorSet {
    branching: Branching,
    n_rows: i64,
    zf1: Vec<Complex64>,
    zf2: Vec<Complex64>,
    k_split: SplitFunction,
    c_j: Complex64,
}

impl ElementaryFactorSet {
    pub fn new(branching: &Branching, n_rows: i64, node_count: usize) -> Result<Self> {
        let plan = FourierPlan::new(node_count);
        Self::with_plan(branching, n_rows, &plan)
    }

    pub(crate) fn with_plan(branching: &Branching, n_rows: i64, plan: &FourierPlan) -> Result<Self> {
        if n_rows % 2 != 0 || n_rows < 2 {
            return Err(FactorError::OddSeparation(n_rows));
        }
        let half = n_rows / 2;
        let omega = branching.omega();
        let zf1 = (1..=half)
            .map(|n| z_f((2 * n - 1) as f64 * PI / (2 * half) as f64, omega))
            .collect();
        let zf2 = (1..half).map(|n| z_f(n as f64 * PI / half as f64, omega)).collect();

        let n = plan.len();
        if n < contour::MIN_NODES || !n.is_power_of_two() {
            return Err(ContourError::InvalidNodeCount(n).into());
        }
        // log K = i𝒩η with η = −i log λ continuous on the circle.
        let log_k: Vec<Complex64> = (0..n)
            .map(|j| branching.eval(contour::node(n, j)).lambda.ln() * half as f64)
            .collect();
        let k_split = contour::split_from_log_with(plan, &log_k);
        let c_j = (branching.zr().sqrt().inv() * branching.zh().sqrt().inv() * branching.h_sign()).sqrt();
        Ok(ElementaryFactorSet {
            branching: *branching,
            n_rows,
            zf1,
            zf2,
            k_split,
            c_j,
        })
    }

    pub fn n_rows(&self) -> i64 {
        self.n_rows
    }

    /// `z_F(φ_{n−1})`, `φ_{n−1} = (2n−1)π/(2𝒩)`, `n = 1..𝒩`.
    pub fn zf_list1(&self) -> &[Complex64] {
        &self.zf1
    }

    /// `z_F(nπ/𝒩)`, `n = 1..𝒩−1`.
    pub fn zf_list2(&self) -> &[Complex64] {
        &self.zf2
    }

    /// Split of `K = λ^𝒩`.
    pub fn k_split(&self) -> &SplitFunction {
        &self.k_split
    }

    /// `J±` with `J₊ J₋ = r h`.
    pub fn j_factor(&self, z: Complex64, side: Side) -> Complex64 {
        let w = match side {
            Side::Plus => z.inv(),
            Side::Minus => z,
        };
        let one = Complex64::new(1.0, 0.0);
        self.c_j * (one - self.branching.zr() * w).sqrt() * (one - self.branching.zh() * w).sqrt()
    }

    fn zf(&self, which: GIndex) -> &[Complex64] {
        match which {
            GIndex::One => &self.zf1,
            GIndex::Two => &self.zf2,
        }
    }

    /// Closed product form `λ^𝒩 ∏ 𝓕` (times `r h` for `G₂`).
    pub fn g_product(&self, z: Complex64, which: GIndex) -> Complex64 {
        let v = self.branching.eval(z);
        let mut g = v.lambda.powi((self.n_rows / 2) as i32);
        for &zf in self.zf(which) {
            g *= function_f(z, zf);
        }
        if which == GIndex::Two {
            g *= v.r * v.h;
        }
        g
    }

    /// Everything in a factor except `K±`.
    fn algebraic_part(&self, z: Complex64, which: GIndex, side: Side) -> Complex64 {
        let mut g = Complex64::new(1.0, 0.0);
        for &zf in self.zf(which) {
            g *= factor_f_elementary(z, zf, side);
        }
        if which == GIndex::Two {
            g *= self.j_factor(z, side);
        }
        g
    }

    pub fn g_factor(&self, z: Complex64, which: GIndex, side: Side) -> Complex64 {
        self.k_split.eval(side, z) * self.algebraic_part(z, which, side)
    }

    pub fn g_on_circle(&self, which: GIndex, side: Side, radius: f64, phase: f64) -> Vec<Complex64> {
        let k = self.k_split.on_circle(side, radius, phase);
        let n = k.len();
        k.into_iter()
            .enumerate()
            .map(|(j, kv)| {
                let z = Complex64::from_polar(radius, phase + 2.0 * PI * j as f64 / n as f64);
                kv * self.algebraic_part(z, which, side)
            })
            .collect()
    }
}

/// Factors `G_{j±}` of `1 ± λ^N`, from the product form or the numeric split.
#[derive(Debug, Clone)]
pub enum GFactors {
    Closed(ElementaryFactorSet),
    Numeric { g1: SplitFunction, g2: SplitFunction },
}

impl GFactors {
    /// Closed form when `N` is even and `prefer_closed` is set, numeric split
    /// otherwise.
    pub fn new(branching: &Branching, n_rows: i64, node_count: usize, prefer_closed: bool) -> Result<Self> {
        let plan = FourierPlan::new(node_count);
        Self::with_plan(branching, n_rows, &plan, prefer_closed)
    }

    pub(crate) fn with_plan(branching: &Branching, n_rows: i64, plan: &FourierPlan, prefer_closed: bool) -> Result<Self> {
        if prefer_closed && n_rows % 2 == 0 {
            return Ok(GFactors::Closed(ElementaryFactorSet::with_plan(branching, n_rows, plan)?));
        }
        let n = plan.len();
        if n < contour::MIN_NODES || !n.is_power_of_two() {
            return Err(ContourError::InvalidNodeCount(n).into());
        }
        let ln: Vec<Complex64> = (0..n)
            .map(|j| branching.eval(contour::node(n, j)).lambda.powi(n_rows as i32))
            .collect();
        let g1: Vec<Complex64> = ln.iter().map(|&l| 1.0 + l).collect();
        let g2: Vec<Complex64> = ln.iter().map(|&l| 1.0 - l).collect();
        Ok(GFactors::Numeric {
            g1: contour::multiplicative_split_with(plan, &g1)?,
            g2: contour::multiplicative_split_with(plan, &g2)?,
        })
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, GFactors::Closed(_))
    }

    pub fn eval(&self, which: GIndex, side: Side, z: Complex64) -> Complex64 {
        match self {
            GFactors::Closed(set) => set.g_factor(z, which, side),
            GFactors::Numeric { g1, g2 } => match which {
                GIndex::One => g1.eval(side, z),
                GIndex::Two => g2.eval(side, z),
            },
        }
    }

    pub fn on_circle(&self, which: GIndex, side: Side, radius: f64, phase: f64) -> Vec<Complex64> {
        match self {
            GFactors::Closed(set) => set.g_on_circle(which, side, radius, phase),
            GFactors::Numeric { g1, g2 } => match which {
                GIndex::One => g1.on_circle(side, radius, phase),
                GIndex::Two => g2.on_circle(side, radius, phase),
            },
        }
    }

    /// Relative size of the unresolved Laurent tail of the numeric splits.
    pub fn tail_estimate(&self) -> f64 {
        match self {
            GFactors::Closed(set) => set.k_split.tail_estimate(),
            GFactors::Numeric { g1, g2 } => g1.tail_estimate().max(g2.tail_estimate()),
        }
    }
}
