//! Calculus on the unit circle: sampled functions, Laurent coefficients,
//! Cauchy projections and additive / multiplicative splits.
//!
//! A function sampled at the `n` nodes `e^{2πij/n}` is represented by its
//! trapezoidal-rule Laurent coefficients `c_m`, `−n/2 ≤ m < n/2`. The plus
//! projection keeps `m < 0` (analytic outside the circle, zero at infinity)
//! and the minus projection keeps `m ≥ 0`, so constants go to the minus side.
//! This is the same pair of projectors as `±(1/2πi)∮ f(α)/(z−α) dα`.

use crate::mat2::Mat2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Smallest accepted node count.
pub const MIN_NODES: usize = 256;

/// Coefficients below this fraction of the largest one are treated as
/// rounding noise when a series is projected onto one side.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Default minimum distance of an evaluation point from the unit circle.
pub const DEFAULT_DELTA_OFF: f64 = 1e-3;

/// Largest `|winding number|` accepted by a multiplicative split.
pub const WINDING_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("node count {0} must be a power of two and at least {MIN_NODES}")]
    InvalidNodeCount(usize),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("z = {z} is {distance:e} from the unit circle, closer than {delta_off:e}")]
    TooClose { z: Complex64, distance: f64, delta_off: f64 },
    #[error("function vanishes on the contour at node {index}")]
    ZeroOnContour { index: usize },
    #[error("winding number {winding} is not zero")]
    NonzeroWinding { winding: f64 },
    #[error("grids have different node counts ({0} and {1})")]
    NodeCountMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, ContourError>;

/// Which half of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Analytic outside the circle.
    Plus,
    /// Analytic inside the circle.
    Minus,
}

/// Whether a split is a sum or a product of its halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Additive,
    Multiplicative,
}

/// Node `j` of an `n`-point uniform grid on the unit circle.
#[inline]
pub fn node(n: usize, j: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)
}

fn check_node_count(n: usize) -> Result<()> {
    if n < MIN_NODES || !n.is_power_of_two() {
        return Err(ContourError::InvalidNodeCount(n));
    }
    Ok(())
}

/// Forward and inverse FFT plans for one node count.
#[derive(Clone)]
pub struct FourierPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan").field("n", &self.n).finish()
    }
}

impl FourierPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FourierPlan {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Laurent coefficients `c_m = (1/n) Σ_j f_j e^{−2πijm/n}`, stored at
    /// index `m mod n`.
    pub fn coefficients(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Values `Σ_m c_m e^{2πijm/n}` at the nodes.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }
}

/// Band-limited interpolation of grid samples onto a finer uniform grid of
/// `n_out` nodes, by zero-padding the Laurent coefficients.
pub fn resample(samples: &[Complex64], n_out: usize) -> Vec<Complex64> {
    let n = samples.len();
    assert!(n_out >= n, "resample only refines the grid");
    let c = FourierPlan::new(n).coefficients(samples);
    let mut padded = vec![Complex64::new(0.0, 0.0); n_out];
    for (idx, &v) in c.iter().enumerate() {
        let m = if idx < n / 2 { idx as i64 } else { idx as i64 - n as i64 };
        padded[m.rem_euclid(n_out as i64) as usize] = v;
    }
    FourierPlan::new(n_out).synthesize(&padded)
}

/// Samples of a scalar function at the uniform nodes of the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    samples: Vec<Complex64>,
}

impl ContourGrid {
    pub fn from_samples(samples: Vec<Complex64>) -> Result<Self> {
        check_node_count(samples.len())?;
        if let Some(index) = samples.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(ContourError::NonFinite { index });
        }
        Ok(ContourGrid { samples })
    }

    /// Sample `f` at `n` nodes.
    pub fn sample(n: usize, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        check_node_count(n)?;
        Self::from_samples((0..n).map(|j| f(node(n, j))).collect())
    }

    pub fn node_count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn node(&self, j: usize) -> Complex64 {
        node(self.samples.len(), j)
    }
}

/// Samples of a 2×2 matrix function, stored entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGrid {
    entries: [ContourGrid; 4],
}

impl MatrixGrid {
    pub fn from_matrices(values: &[Mat2]) -> Result<Self> {
        let entry = |i: usize, j: usize| {
            ContourGrid::from_samples(values.iter().map(|m| m.0[i][j]).collect())
        };
        Ok(MatrixGrid {
            entries: [entry(0, 0)?, entry(0, 1)?, entry(1, 0)?, entry(1, 1)?],
        })
    }

    pub fn sample(n: usize, f: impl Fn(Complex64) -> Mat2) -> Result<Self> {
        check_node_count(n)?;
        let values: Vec<Mat2> = (0..n).map(|j| f(node(n, j))).collect();
        Self::from_matrices(&values)
    }

    pub fn node_count(&self) -> usize {
        self.entries[0].node_count()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ContourGrid {
        &self.entries[2 * i + j]
    }
}

/// Truncated Laurent series `Σ_{m=−n/2}^{n/2−1} c_m z^m`.
#[derive(Debug, Clone)]
pub struct LaurentSeries {
    coeffs: Vec<Complex64>,
    plan: FourierPlan,
}

impl LaurentSeries {
    pub fn from_grid(grid: &ContourGrid) -> Self {
        let plan = FourierPlan::new(grid.node_count());
        Self::from_samples_with(&plan, grid.samples())
    }

    pub(crate) fn from_samples_with(plan: &FourierPlan, samples: &[Complex64]) -> Self {
        LaurentSeries {
            coeffs: plan.coefficients(samples),
            plan: plan.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `z^m`; zero outside the stored range.
    pub fn coefficient(&self, m: i64) -> Complex64 {
        let n = self.coeffs.len() as i64;
        if m < -n / 2 || m >= n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[m.rem_euclid(n) as usize]
    }

    /// Keep only the powers belonging to one side.
    pub fn project(&self, side: Side) -> LaurentSeries {
        let n = self.coeffs.len();
        let half = n / 2;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let negative_power = idx >= half;
                match (side, negative_power) {
                    (Side::Plus, true) | (Side::Minus, false) => c,
                    _ => Complex64::new(0.0, 0.0),
                }
            })
            .collect();
        let mut out = LaurentSeries {
            coeffs,
            plan: self.plan.clone(),
        };
        out.trim_noise(self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm())));
        out
    }

    /// Zero the outermost coefficients lying below the rounding floor of the
    /// transform. Left in place they are amplified by `r^{|m|}` when a half is
    /// evaluated on a circle on its far side of the contour.
    fn trim_noise(&mut self, scale: f64) {
        let floor = NOISE_FLOOR * scale;
        let n = self.coeffs.len();
        let half = n / 2;
        let last_nonneg = (0..half).rev().find(|&m| self.coeffs[m].norm() > floor);
        let start = last_nonneg.map_or(0, |m| m + 1);
        for c in &mut self.coeffs[start..half] {
            *c = Complex64::new(0.0, 0.0);
        }
        let last_neg = (1..=half).rev().find(|&p| self.coeffs[n - p].norm() > floor);
        let keep = last_neg.unwrap_or(0);
        for p in keep + 1..=half {
            self.coeffs[n - p] = Complex64::new(0.0, 0.0);
        }
    }

    /// Evaluate at an arbitrary nonzero point by Horner's rule on the
    /// nonnegative and negative powers separately.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let n = self.coeffs.len();
        let half = n / 2;
        let mut nonneg = Complex64::new(0.0, 0.0);
        for m in (0..half).rev() {
            nonneg = nonneg * z + self.coeffs[m];
        }
        let w = z.inv();
        let mut neg = Complex64::new(0.0, 0.0);
        // Negative power −p is stored at index n − p, p = 1..=n/2.
        for p in (1..=half).rev() {
            neg = (neg + self.coeffs[n - p]) * w;
        }
        nonneg + neg
    }

    /// Values at the grid nodes.
    pub fn eval_on_grid(&self) -> Vec<Complex64> {
        self.plan.synthesize(&self.coeffs)
    }

    /// Values at `radius · e^{i(phase + 2πj/n)}`, `j = 0..n`.
    pub fn eval_on_circle(&self, radius: f64, phase: f64) -> Vec<Complex64> {
        if radius == 1.0 && phase == 0.0 {
            return self.eval_on_grid();
        }
        let n = self.coeffs.len() as i64;
        let scaled: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                if c == Complex64::new(0.0, 0.0) {
                    // Projected halves carry exact zeros whose weight may overflow.
                    return c;
                }
                let m = if (idx as i64) < n / 2 { idx as i64 } else { idx as i64 - n };
                c * Complex64::from_polar(radius.powi(m as i32), phase * m as f64)
            })
            .collect();
        self.plan.synthesize(&scaled)
    }

    /// Size of the coefficients in the outer eighth of each half, relative to
    /// the largest coefficient: a proxy for the aliasing error of the grid.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.coeffs.len();
        let half = n / 2;
        let width = (n / 16).max(1);
        let scale = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let tail = (half - width..half + width)
            .map(|i| self.coeffs[i].norm())
            .fold(0.0f64, f64::max);
        tail / scale
    }
}

/// A function written as the sum or product of a plus and a minus part.
#[derive(Debug, Clone)]
pub struct SplitFunction {
    kind: SplitKind,
    plus: LaurentSeries,
    minus: LaurentSeries,
    tail: f64,
}

impl SplitFunction {
    fn from_series(kind: SplitKind, series: LaurentSeries) -> Self {
        SplitFunction {
            kind,
            tail: series.tail_estimate(),
            plus: series.project(Side::Plus),
            minus: series.project(Side::Minus),
        }
    }

    pub fn kind(&self) -> SplitKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.plus.node_count()
    }

    /// Relative size of the highest resolved coefficients.
    pub fn tail_estimate(&self) -> f64 {
        self.tail
    }

    /// Series of the plus part (of the logarithm, for a multiplicative split).
    pub fn plus_series(&self) -> &LaurentSeries {
        &self.plus
    }

    /// Series of the minus part (of the logarithm, for a multiplicative split).
    pub fn minus_series(&self) -> &LaurentSeries {
        &self.minus
    }

    fn finish(&self, v: Complex64) -> Complex64 {
        match self.kind {
            SplitKind::Additive => v,
            SplitKind::Multiplicative => v.exp(),
        }
    }

    pub fn eval(&self, side: Side, z: Complex64) -> Complex64 {
        match side {
            Side::Plus => self.plus(z),
            Side::Minus => self.minus(z),
        }
    }

    pub fn plus(&self, z: Complex64) -> Complex64 {
        self.finish(self.plus.eval(z))
    }

    pub fn minus(&self, z: Complex64) -> Complex64 {
        self.finish(self.minus.eval(z))
    }

    /// Boundary values of one part at the grid nodes.
    pub fn on_grid(&self, side: Side) -> Vec<Complex64> {
        let series = match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        };
        series.eval_on_grid().into_iter().map(|v| self.finish(v)).collect()
    }

    /// Values of one part on a rotated, scaled copy of the grid.
    pub fn on_circle(&self, side: Side, radius: f64, phase: f64) -> Vec<Complex64> {
        let series = match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        };
        series
            .eval_on_circle(radius, phase)
            .into_iter()
            .map(|v| self.finish(v))
            .collect()
    }
}

/// Entrywise additive split of a 2×2 matrix function.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    entries: [SplitFunction; 4],
}

impl SplitMatrix {
    pub fn entry(&self, i: usize, j: usize) -> &SplitFunction {
        &self.entries[2 * i + j]
    }

    pub fn eval(&self, side: Side, z: Complex64) -> Mat2 {
        let e = |k: usize| self.entries[k].eval(side, z);
        Mat2::new(e(0), e(1), e(2), e(3))
    }

    pub fn plus(&self, z: Complex64) -> Mat2 {
        self.eval(Side::Plus, z)
    }

    pub fn minus(&self, z: Complex64) -> Mat2 {
        self.eval(Side::Minus, z)
    }

    pub fn on_circle(&self, side: Side, radius: f64, phase: f64) -> Vec<Mat2> {
        let cols: Vec<Vec<Complex64>> = self
            .entries
            .iter()
            .map(|e| e.on_circle(side, radius, phase))
            .collect();
        (0..cols[0].len())
            .map(|j| Mat2::new(cols[0][j], cols[1][j], cols[2][j], cols[3][j]))
            .collect()
    }

    pub fn on_grid(&self, side: Side) -> Vec<Mat2> {
        self.on_circle(side, 1.0, 0.0)
    }

    pub fn tail_estimate(&self) -> f64 {
        self.entries.iter().map(|e| e.tail_estimate()).fold(0.0, f64::max)
    }
}

/// Result of a single Cauchy projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub value: Complex64,
    /// Set when the requested side is evaluated across the contour, i.e. as
    /// an analytic continuation.
    pub continued: bool,
}

fn check_off_contour(z: Complex64, delta_off: f64) -> Result<bool> {
    let distance = (z.norm() - 1.0).abs();
    if distance < delta_off {
        return Err(ContourError::TooClose { z, distance, delta_off });
    }
    Ok(z.norm() > 1.0)
}

/// `±(1/2πi)∮ f(α)/(z − α) dα` for the sampled `f`, evaluated through its
/// trapezoidal Laurent coefficients.
pub fn cauchy_project(grid: &ContourGrid, z: Complex64, side: Side, delta_off: f64) -> Result<Projection> {
    let outside = check_off_contour(z, delta_off)?;
    let series = LaurentSeries::from_grid(grid).project(side);
    Ok(Projection {
        value: series.eval(z),
        continued: outside != (side == Side::Plus),
    })
}

/// Matrix version of [`cauchy_project`].
pub fn cauchy_project_matrix(grid: &MatrixGrid, z: Complex64, side: Side, delta_off: f64) -> Result<(Mat2, bool)> {
    let mut out = Mat2::zero();
    let mut continued = false;
    for i in 0..2 {
        for j in 0..2 {
            let p = cauchy_project(grid.entry(i, j), z, side, delta_off)?;
            out.0[i][j] = p.value;
            continued = p.continued;
        }
    }
    Ok((out, continued))
}

/// Trapezoidal rule applied to the Cauchy integral itself. Slowly convergent
/// near the contour; kept as an independent reference.
pub fn cauchy_quadrature(grid: &ContourGrid, z: Complex64, side: Side) -> Complex64 {
    let n = grid.node_count();
    let sum: Complex64 = grid
        .samples()
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let a = node(n, j);
            f * a / (z - a)
        })
        .sum();
    let v = sum / n as f64;
    match side {
        Side::Plus => v,
        Side::Minus => -v,
    }
}

/// Winding number about the origin, by accumulating the principal argument
/// of consecutive sample ratios.
pub fn winding_number(samples: &[Complex64]) -> f64 {
    let n = samples.len();
    let total: f64 = (0..n)
        .map(|j| (samples[(j + 1) % n] / samples[j]).arg())
        .sum();
    total / (2.0 * PI)
}

/// Continuous logarithm of nonvanishing samples with zero winding number.
fn continuous_log(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    if let Some(index) = samples.iter().position(|c| c.norm() == 0.0) {
        return Err(ContourError::ZeroOnContour { index });
    }
    let winding = winding_number(samples);
    if winding.abs() > WINDING_TOL {
        return Err(ContourError::NonzeroWinding { winding });
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut arg = samples[0].arg();
    out.push(Complex64::new(samples[0].norm().ln(), arg));
    for j in 1..samples.len() {
        arg += (samples[j] / samples[j - 1]).arg();
        out.push(Complex64::new(samples[j].norm().ln(), arg));
    }
    Ok(out)
}

/// Split `f = f₊ + f₋`.
pub fn additive_split(grid: &ContourGrid) -> SplitFunction {
    SplitFunction::from_series(SplitKind::Additive, LaurentSeries::from_grid(grid))
}

pub(crate) fn additive_split_with(plan: &FourierPlan, samples: &[Complex64]) -> SplitFunction {
    SplitFunction::from_series(SplitKind::Additive, LaurentSeries::from_samples_with(plan, samples))
}

/// Split `g = g₊ g₋` with `g₊(∞) = 1`, through the additive split of a
/// continuous `log g`.
pub fn multiplicative_split(grid: &ContourGrid) -> Result<SplitFunction> {
    let plan = FourierPlan::new(grid.node_count());
    multiplicative_split_with(&plan, grid.samples())
}

pub(crate) fn multiplicative_split_with(plan: &FourierPlan, samples: &[Complex64]) -> Result<SplitFunction> {
    let log = continuous_log(samples)?;
    Ok(SplitFunction::from_series(
        SplitKind::Multiplicative,
        LaurentSeries::from_samples_with(plan, &log),
    ))
}

/// Multiplicative split whose logarithm is supplied directly, for symbols
/// with a known continuous logarithm.
pub(crate) fn split_from_log_with(plan: &FourierPlan, log_samples: &[Complex64]) -> SplitFunction {
    SplitFunction::from_series(
        SplitKind::Multiplicative,
        LaurentSeries::from_samples_with(plan, log_samples),
    )
}

/// Entrywise additive split of a matrix function.
pub fn additive_split_matrix(grid: &MatrixGrid) -> SplitMatrix {
    let plan = FourierPlan::new(grid.node_count());
    let e = |i: usize, j: usize| additive_split_with(&plan, grid.entry(i, j).samples());
    SplitMatrix {
        entries: [e(0, 0), e(0, 1), e(1, 0), e(1, 1)],
    }
}

pub(crate) fn additive_split_matrix_with(plan: &FourierPlan, values: &[Mat2]) -> SplitMatrix {
    let e = |i: usize, j: usize| {
        let s: Vec<Complex64> = values.iter().map(|m| m.0[i][j]).collect();
        additive_split_with(plan, &s)
    };
    SplitMatrix {
        entries: [e(0, 0), e(0, 1), e(1, 0), e(1, 1)],
    }
}
