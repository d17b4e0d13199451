//! Solution of the coupled Wiener–Hopf equations and inversion of the row
//! transforms back to lattice displacements.
//!
//! With `v^i = −A C₀ δ(z) f`, `δ = z/(z − z_P)`, the equations read
//! `v₋ + K v₊ + (K − I) v^i = 0`. The factorized kernel gives
//! `v₋ = K₋C₋`, `v₊ = K₊⁻¹C₊` where
//! `C₋ = (K₋⁻¹(z) − K₋⁻¹(z_P)) v^i` and `C₊ = (K₋⁻¹(z_P) − K₊(z)) v^i`.

use crate::contour::{self, Side};
use crate::kernel::{self, FactorizedKernel, Kernel, KernelError};
use crate::lattice::{Branching, ComplexFrequency, CrackGeometry, IncidentWave, LatticeError, LatticeSymbols};
use crate::mat2::{Mat2, Vec2};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Relative size of `λ^{N−1} − λ^{1−N}` below which the interior rows are
/// declared resonant.
pub const RESONANCE_TOL: f64 = 1e-10;

/// Relative change between successive node counts accepted as converged.
pub const INVERSION_TOL: f64 = 1e-8;

/// Number of annulus probes used for the residual gates.
pub const WH_PROBES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WhError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("the interior-row elimination needs N >= 2, got N = {0}")]
    SeparationTooSmall(i64),
    #[error("waveguide denominator vanishes at z = {0}")]
    Resonance(Complex64),
    #[error("K₋ is singular at the pole z_P = {0}")]
    SingularAtPole(Complex64),
    #[error("interior rows are singular at z = {0}")]
    SingularRows(Complex64),
}

pub type Result<T> = std::result::Result<T, WhError>;

/// Row transforms on the crack faces at one point `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRows {
    pub lambda: Complex64,
    /// `u₀^F`
    pub u0: Complex64,
    /// `u₁^F`
    pub u1: Complex64,
    /// `u_N^F`
    pub un: Complex64,
    /// `u_{N+1}^F`
    pub un1: Complex64,
}

/// Spectral solution `v₋`, `v₊` together with the data needed for the
/// row transforms.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    fk: FactorizedKernel,
    wave: IncidentWave,
    symbols: LatticeSymbols,
    f: Vec2,
    km_inv_zp: Mat2,
}

impl SpectralSolution {
    pub fn new(fk: FactorizedKernel, omega: &ComplexFrequency, wave: &IncidentWave) -> Result<Self> {
        let geometry = *fk.kernel().geometry();
        if geometry.n() < 2 {
            return Err(WhError::SeparationTooSmall(geometry.n()));
        }
        let symbols = LatticeSymbols::new(omega, wave)?;
        let z_p = wave.z_p();
        let km_inv_zp = fk
            .k_minus(z_p)?
            .inverse()
            .ok_or(WhError::SingularAtPole(z_p))?;
        let f = Vec2::new(Complex64::new(1.0, 0.0), wave.upper_phase(&geometry));
        Ok(SpectralSolution {
            fk,
            wave: *wave,
            symbols,
            f,
            km_inv_zp,
        })
    }

    /// Builds the kernel with `node_count` nodes (automatic when `None`),
    /// factorizes it and solves.
    pub fn solve(
        omega: &ComplexFrequency,
        wave: &IncidentWave,
        geometry: &CrackGeometry,
        node_count: Option<usize>,
        prefer_closed: bool,
    ) -> Result<Self> {
        let symbols = LatticeSymbols::new(omega, wave)?;
        let n = node_count.unwrap_or_else(|| kernel::auto_node_count_for(&symbols));
        let k = Kernel::new(&Branching::new(omega), geometry, n, prefer_closed)?;
        Self::new(k.factorize()?, omega, wave)
    }

    pub fn factorized_kernel(&self) -> &FactorizedKernel {
        &self.fk
    }

    pub fn kernel(&self) -> &Kernel {
        self.fk.kernel()
    }

    pub fn geometry(&self) -> &CrackGeometry {
        self.fk.kernel().geometry()
    }

    pub fn symbols(&self) -> &LatticeSymbols {
        &self.symbols
    }

    pub fn wave(&self) -> &IncidentWave {
        &self.wave
    }

    pub fn node_count(&self) -> usize {
        self.fk.kernel().node_count()
    }

    /// `f = (1, e^{ik(N sinΘ + M cosΘ)})`.
    pub fn f_vector(&self) -> Vec2 {
        self.f
    }

    /// Offset of the annulus probes from the unit circle.
    pub fn probe_offset(&self) -> f64 {
        self.fk.probe_radius().min(0.25 * self.symbols.margin())
    }

    /// Probe points spread over `|z| ∈ {1 − δ, 1, 1 + δ}`.
    pub fn annulus_probes(&self) -> Vec<Complex64> {
        let d = self.probe_offset();
        (0..WH_PROBES)
            .map(|p| {
                let radius = 1.0 + d * ((p % 3) as f64 - 1.0);
                Complex64::from_polar(radius, 2.0 * PI * (p as f64 + 0.37) / WH_PROBES as f64)
            })
            .collect()
    }

    fn scalar_incident(&self, z: Complex64) -> Complex64 {
        -self.wave.amplitude() * self.wave.c0() * z / (z - self.wave.z_p())
    }

    /// `v^i(z) = −A C₀ δ(z) f`.
    pub fn v_incident(&self, z: Complex64) -> Vec2 {
        self.f.scale(self.scalar_incident(z))
    }

    /// `C = (K₋⁻¹ − K₊) v^i`.
    pub fn c_total(&self, z: Complex64) -> Result<Vec2> {
        let vi = self.v_incident(z);
        Ok(self.fk.k_minus_inv(z)? * vi - self.fk.k_plus(z)? * vi)
    }

    pub fn c_minus(&self, z: Complex64) -> Result<Vec2> {
        Ok((self.fk.k_minus_inv(z)? - self.km_inv_zp) * self.v_incident(z))
    }

    pub fn c_plus(&self, z: Complex64) -> Result<Vec2> {
        Ok((self.km_inv_zp - self.fk.k_plus(z)?) * self.v_incident(z))
    }

    /// `v₋ = K₋C₋ = (I − K₋(z)K₋⁻¹(z_P)) v^i`, regular at `z_P`.
    pub fn v_minus(&self, z: Complex64) -> Result<Vec2> {
        let km = self.fk.k_minus(z)?;
        Ok(self.v_minus_from(z, &km))
    }

    fn v_minus_from(&self, z: Complex64, km: &Mat2) -> Vec2 {
        let w = self.km_inv_zp * self.f;
        let s = self.scalar_incident(z);
        (self.f - *km * w).scale(s)
    }

    /// `v₊ = K₊⁻¹C₊`.
    pub fn v_plus(&self, z: Complex64) -> Result<Vec2> {
        Ok(self.fk.k_plus_inv(z)? * self.c_plus(z)?)
    }

    /// Forcing of the coupled equations, `(K − I) v^i`.
    pub fn forcing(&self, z: Complex64) -> Vec2 {
        (self.kernel().eval_k(z) - Mat2::identity()) * self.v_incident(z)
    }

    /// `v₋ + K v₊ + (K − I) v^i`.
    pub fn wh_residual(&self, z: Complex64) -> Result<Vec2> {
        let k = self.kernel().eval_k(z);
        Ok(self.v_minus(z)? + k * self.v_plus(z)? + self.forcing(z))
    }

    /// `sup_p ‖v₋ + K v₊ + (K − I) v^i‖` and `sup_p ‖v^i‖` over the annulus probes.
    pub fn wh_residual_sup(&self) -> Result<(f64, f64)> {
        let mut res = 0.0f64;
        let mut vi = 0.0f64;
        for z in self.annulus_probes() {
            res = res.max(self.wh_residual(z)?.norm_max());
            vi = vi.max(self.v_incident(z).norm_max());
        }
        Ok((res, vi))
    }

    fn rows_from(&self, z: Complex64, lambda: Complex64, q: Complex64, v_minus: Vec2) -> Result<BoundaryRows> {
        let n = self.geometry().n();
        let zm = z.powi(self.geometry().m() as i32);
        let vi = self.v_incident(z);
        let denom = lambda.inv() - 1.0;
        let u0 = (v_minus.0[0] - vi.0[0]) / denom;
        let un1 = (vi.0[1] - v_minus.0[1]) / (zm * denom);
        // Interior rows from the transformed equations on rows 1 and N.
        let d = lambda.powi(n as i32 - 1) - lambda.powi(1 - n as i32);
        if (lambda.powi(2 * n as i32 - 2) - 1.0).norm() < RESONANCE_TOL {
            return Err(WhError::Resonance(z));
        }
        let a = q - 1.0 - (lambda.powi(n as i32 - 2) - lambda.powi(2 - n as i32)) / d;
        let b = -(lambda - lambda.inv()) / d;
        let rhs_n = (v_minus.0[1] - vi.0[1]) / zm;
        let rhs_1 = vi.0[0] - v_minus.0[0];
        let det = a * a - b * b;
        if det.norm() < RESONANCE_TOL * (a.norm() + b.norm()).powi(2) {
            return Err(WhError::SingularRows(z));
        }
        let un = (a * rhs_n - b * rhs_1) / det;
        let u1 = (a * rhs_1 - b * rhs_n) / det;
        Ok(BoundaryRows { lambda, u0, u1, un, un1 })
    }

    /// `u₀^F, u₁^F, u_N^F, u_{N+1}^F` at `z`.
    pub fn boundary_rows(&self, z: Complex64) -> Result<BoundaryRows> {
        let bv = self.kernel().branching().eval(z);
        let vm = self.v_minus(z)?;
        self.rows_from(z, bv.lambda, bv.q, vm)
    }

    /// `u_y^F(z)` for any row.
    pub fn row_transform(&self, y: i64, z: Complex64) -> Result<Complex64> {
        Ok(row_value(&self.boundary_rows(z)?, self.geometry().n(), y))
    }

    /// `u_y^F` at the nodes of the kernel grid, one vector per requested row.
    pub fn rows_on_grid(&self, ys: &[i64]) -> Result<Vec<Vec<Complex64>>> {
        let n = self.node_count();
        let km = self.fk.on_circle(Side::Minus, 1.0, 0.0);
        let rows: Vec<BoundaryRows> = (0..n)
            .map(|j| {
                let z = contour::node(n, j);
                let bv = self.kernel().branching().eval(z);
                let vm = self.v_minus_from(z, &km[j]);
                self.rows_from(z, bv.lambda, bv.q, vm)
            })
            .collect::<Result<_>>()?;
        let big_n = self.geometry().n();
        Ok(ys
            .iter()
            .map(|&y| rows.iter().map(|r| row_value(r, big_n, y)).collect())
            .collect())
    }

    /// Scattered displacements `u_{x,y}` for `x ∈ [x_min, x_max]` on each
    /// requested row, by the trapezoidal rule on the unit circle.
    pub fn field_rows(&self, ys: &[i64], x_min: i64, x_max: i64) -> Result<Vec<Vec<Complex64>>> {
        let n = self.node_count();
        let plan = contour::FourierPlan::new(n);
        let rows = self.rows_on_grid(ys)?;
        Ok(rows
            .into_iter()
            .map(|samples| {
                // u_y^F = Σ u_x z^{−x}: u_x is the coefficient of z^{−x}.
                let c = plan.coefficients(&samples);
                (x_min..=x_max)
                    .map(|x| c[(-x).rem_euclid(n as i64) as usize])
                    .collect()
            })
            .collect())
    }

    /// Scattered displacement at arbitrary lattice points.
    pub fn field_at(&self, points: &[(i64, i64)]) -> Result<Vec<Complex64>> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let mut ys: Vec<i64> = points.iter().map(|p| p.1).collect();
        ys.sort_unstable();
        ys.dedup();
        let x_min = points.iter().map(|p| p.0).min().unwrap();
        let x_max = points.iter().map(|p| p.0).max().unwrap();
        let rows = self.field_rows(&ys, x_min, x_max)?;
        Ok(points
            .iter()
            .map(|&(x, y)| {
                let r = ys.binary_search(&y).unwrap();
                rows[r][(x - x_min) as usize]
            })
            .collect())
    }
}

/// `u_y^F` from the boundary rows: decaying continuations outside the strip
/// and `A₁λ^y + A₂λ^{−y}` inside it.
pub fn row_value(rows: &BoundaryRows, n: i64, y: i64) -> Complex64 {
    let l = rows.lambda;
    if y >= n + 1 {
        rows.un1 * l.powi((y - n - 1) as i32)
    } else if y <= 0 {
        rows.u0 * l.powi((-y) as i32)
    } else if y == 1 {
        rows.u1
    } else if y == n {
        rows.un
    } else {
        let d = l.powi(n as i32 - 1) - l.powi(1 - n as i32);
        let a1 = (rows.un / l - rows.u1 * l.powi(-(n as i32))) / d;
        let a2 = (rows.u1 * l.powi(n as i32) - rows.un * l) / d;
        a1 * l.powi(y as i32) + a2 * l.powi(-(y as i32))
    }
}

/// Scattered field at lattice points together with its convergence record.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub points: Vec<(i64, i64)>,
    pub values: Vec<Complex64>,
    /// Radius of the inversion contour.
    pub radius: f64,
    pub node_count: usize,
    /// Relative change against the previous node count, per point.
    pub change: Vec<f64>,
    pub converged: Vec<bool>,
}

/// Inverts the field at `points`, doubling the node count from `start`
/// until successive estimates agree to `INVERSION_TOL` relative to the
/// largest value, or `cap` is reached.
pub fn invert_field(
    omega: &ComplexFrequency,
    wave: &IncidentWave,
    geometry: &CrackGeometry,
    points: &[(i64, i64)],
    start: Option<usize>,
    cap: usize,
    prefer_closed: bool,
) -> Result<PhysicalField> {
    let symbols = LatticeSymbols::new(omega, wave)?;
    let mut n = start.unwrap_or_else(|| kernel::auto_node_count_for(&symbols));
    let mut previous = SpectralSolution::solve(omega, wave, geometry, Some(n), prefer_closed)?.field_at(points)?;
    loop {
        let next_n = 2 * n;
        if next_n > cap {
            let len = points.len();
            return Ok(PhysicalField {
                points: points.to_vec(),
                values: previous,
                radius: 1.0,
                node_count: n,
                change: vec![f64::NAN; len],
                converged: vec![false; len],
            });
        }
        let next = SpectralSolution::solve(omega, wave, geometry, Some(next_n), prefer_closed)?.field_at(points)?;
        let scale = next.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(f64::MIN_POSITIVE);
        let change: Vec<f64> = next.iter().zip(&previous).map(|(a, b)| (a - b).norm() / scale).collect();
        let converged: Vec<bool> = change.iter().map(|&c| c < INVERSION_TOL).collect();
        n = next_n;
        if converged.iter().all(|&c| c) {
            return Ok(PhysicalField {
                points: points.to_vec(),
                values: next,
                radius: 1.0,
                node_count: n,
                change,
                converged,
            });
        }
        previous = next;
    }
}
