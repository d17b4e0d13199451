//! Finite-grid solver for the scattered field.
//!
//! The scattered displacement `u` satisfies, at every node `p`,
//!
//! ```text
//! Σ_{q intact} (u_q − u_p) + (ω² + iγ(d)) u_p = Σ_{q broken} (u^i_q − u^i_p)
//! ```
//!
//! where the right side collects the incident field across severed bonds.
//! `γ(d) = σ_max (d/N_pml)²` is an on-site sponge at depth `d` into the
//! outer layer, and nodes beyond the grid are held at zero.
//!
//! The grid spans `x ∈ [−N_grid, N_grid]` and
//! `y ∈ [y_c − N_grid, y_c + N_grid]` with `y_c = ⌊(N+1)/2⌋`, so the
//! cracks sit in the middle.

use crate::lattice::{ComplexFrequency, CrackGeometry, IncidentWave};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use std::io::{self, Read, Write};
use thiserror::Error;

/// Largest accepted half-width.
pub const MAX_GRID: usize = 1000;

/// Required relative residual of the linear solve.
pub const SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DirectError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid half-width {0} exceeds the cap {MAX_GRID}")]
    TooLarge(usize),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve residual {0:e} exceeds tolerance")]
    NotConverged(f64),
    #[error("radius {radius} leaves the undamped region (half-width {limit})")]
    RadiusOutOfRange { radius: f64, limit: usize },
    #[error("malformed field dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, DirectError>;

/// Size of the grid and its absorbing layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_grid: usize,
    pub n_pml: usize,
    pub sigma_max: f64,
    pub circle_radius: f64,
}

impl GridSpec {
    pub fn new(n_grid: usize, n_pml: usize, sigma_max: f64, circle_radius: f64) -> Result<Self> {
        if n_grid > MAX_GRID {
            return Err(DirectError::TooLarge(n_grid));
        }
        if n_grid == 0 || n_pml == 0 || n_pml >= n_grid {
            return Err(DirectError::InvalidGrid(format!(
                "need 0 < Npml < Ngrid, got Ngrid = {n_grid}, Npml = {n_pml}"
            )));
        }
        if !(sigma_max > 0.0 && sigma_max.is_finite()) {
            return Err(DirectError::InvalidGrid(format!("sigmaMax must be positive, got {sigma_max}")));
        }
        if !(circle_radius > 0.0 && circle_radius + (n_pml as f64) < n_grid as f64) {
            return Err(DirectError::InvalidGrid(format!(
                "need 0 < circleRadius < Ngrid − Npml = {}, got {circle_radius}",
                n_grid - n_pml
            )));
        }
        Ok(GridSpec { n_grid, n_pml, sigma_max, circle_radius })
    }

    /// Ngrid = 200, Npml = 60, σ_max = 1, radius 70.
    pub fn desk_scale() -> Self {
        GridSpec { n_grid: 200, n_pml: 60, sigma_max: 1.0, circle_radius: 70.0 }
    }

    /// Ngrid = 448, Npml = 270, σ_max = 1, radius 70.
    pub fn paper_scale() -> Self {
        GridSpec { n_grid: 448, n_pml: 270, sigma_max: 1.0, circle_radius: 70.0 }
    }

    pub fn side(&self) -> usize {
        2 * self.n_grid + 1
    }

    /// Half-width of the undamped core.
    pub fn core(&self) -> usize {
        self.n_grid - self.n_pml
    }
}

/// Node indexing for a grid centred at `(0, y_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub n_grid: i64,
    pub y_center: i64,
}

impl GridLayout {
    pub fn new(n_grid: usize, geometry: &CrackGeometry) -> Self {
        GridLayout { n_grid: n_grid as i64, y_center: (geometry.n() + 1).div_euclid(2) }
    }

    pub fn side(&self) -> usize {
        (2 * self.n_grid + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x.abs() <= self.n_grid && (y - self.y_center).abs() <= self.n_grid
    }

    /// Row-major index, `y` outermost.
    pub fn index(&self, x: i64, y: i64) -> Option<usize> {
        self.contains(x, y).then(|| {
            let side = self.side() as i64;
            ((y - self.y_center + self.n_grid) * side + x + self.n_grid) as usize
        })
    }

    pub fn coords(&self, idx: usize) -> (i64, i64) {
        let side = self.side();
        let (row, col) = (idx / side, idx % side);
        (col as i64 - self.n_grid, row as i64 - self.n_grid + self.y_center)
    }

    /// Depth into the layer measured from the core boundary.
    pub fn depth(&self, x: i64, y: i64, core: i64) -> i64 {
        (x.abs() - core).max((y - self.y_center).abs() - core).max(0)
    }
}

const NEIGHBOURS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Whether the bond from `(x, y)` to `(x + dx, y + dy)` is severed.
fn bond_broken(geometry: Option<&CrackGeometry>, x: i64, y: i64, dx: i64, dy: i64) -> bool {
    match (geometry, dy) {
        (Some(g), 1) => g.bond_above_is_broken(x, y),
        (Some(g), -1) => g.bond_above_is_broken(x, y - 1),
        _ => {
            let _ = dx;
            false
        }
    }
}

/// Assembled sparse system `S u = b`.
#[derive(Debug, Clone)]
pub struct DirectSystem {
    pub spec: GridSpec,
    pub layout: GridLayout,
    pub omega: ComplexFrequency,
    pub theta: f64,
    pub geometry: CrackGeometry,
    pub triplets: Vec<Triplet<usize, usize, Complex64>>,
    pub rhs: Vec<Complex64>,
}

impl DirectSystem {
    pub fn rows(&self) -> usize {
        self.layout.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.triplets.len()
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, Complex64>> {
        let n = self.rows();
        SparseColMat::try_new_from_triplets(n, n, &self.triplets)
            .map_err(|e| DirectError::Factorization(format!("{e:?}")))
    }

    /// `S u − b` computed from the stored triplets.
    pub fn residual(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut r: Vec<Complex64> = self.rhs.iter().map(|b| -b).collect();
        for t in &self.triplets {
            r[t.row] += t.val * u[t.col];
        }
        r
    }
}

/// Stencil matrix for the given bond pattern (`None` means an intact
/// lattice). The right side is left at zero.
fn stencil(spec: &GridSpec, layout: &GridLayout, omega: &ComplexFrequency, geometry: Option<&CrackGeometry>) -> Vec<Triplet<usize, usize, Complex64>> {
    let core = spec.core() as i64;
    let w2 = omega.omega_sq();
    let mut triplets = Vec::with_capacity(5 * layout.len());
    for p in 0..layout.len() {
        let (x, y) = layout.coords(p);
        let d = layout.depth(x, y, core) as f64 / spec.n_pml as f64;
        let mut diag = w2 + Complex64::new(0.0, spec.sigma_max * d * d);
        for (dx, dy) in NEIGHBOURS {
            if bond_broken(geometry, x, y, dx, dy) {
                continue;
            }
            diag -= 1.0;
            if let Some(q) = layout.index(x + dx, y + dy) {
                triplets.push(Triplet::new(p, q, Complex64::new(1.0, 0.0)));
            }
        }
        triplets.push(Triplet::new(p, p, diag));
    }
    triplets
}

/// Incident forcing across broken bonds.
fn crack_forcing(layout: &GridLayout, wave: &IncidentWave, geometry: &CrackGeometry) -> Vec<Complex64> {
    (0..layout.len())
        .map(|p| {
            let (x, y) = layout.coords(p);
            let up = wave.displacement(x, y);
            NEIGHBOURS
                .iter()
                .filter(|&&(dx, dy)| bond_broken(Some(geometry), x, y, dx, dy))
                .map(|&(dx, dy)| wave.displacement(x + dx, y + dy) - up)
                .sum()
        })
        .collect()
}

/// Builds the scattered-field system.
pub fn assemble(spec: &GridSpec, omega: &ComplexFrequency, wave: &IncidentWave, geometry: &CrackGeometry) -> DirectSystem {
    let layout = GridLayout::new(spec.n_grid, geometry);
    DirectSystem {
        spec: *spec,
        layout,
        omega: *omega,
        theta: wave.theta(),
        geometry: *geometry,
        triplets: stencil(spec, &layout, omega, Some(geometry)),
        rhs: crack_forcing(&layout, wave, geometry),
    }
}

/// Solves `S u = b` by sparse LU.
pub fn solve_sparse(system: &DirectSystem) -> Result<(Vec<Complex64>, f64)> {
    let n = system.rows();
    let bnorm = system.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); n], 0.0));
    }
    let mat = system.to_sparse()?;
    let lu = mat.sp_lu().map_err(|e| DirectError::Factorization(format!("{e:?}")))?;
    let mut sol = Mat::from_fn(n, 1, |i, _| system.rhs[i]);
    lu.solve_in_place(sol.as_mut());
    let u: Vec<Complex64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let res = system.residual(&u).iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt() / bnorm;
    if !(res < SOLVE_TOL) {
        return Err(DirectError::NotConverged(res));
    }
    Ok((u, res))
}

/// Solved scattered field on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub layout: GridLayout,
    pub omega: Complex64,
    pub theta: f64,
    pub n: i64,
    pub m: i64,
    pub values: Vec<Complex64>,
    /// Relative residual of the linear solve.
    pub solve_residual: f64,
}

/// Assembles and solves in one step.
pub fn solve(spec: &GridSpec, omega: &ComplexFrequency, wave: &IncidentWave, geometry: &CrackGeometry) -> Result<FieldGrid> {
    let system = assemble(spec, omega, wave, geometry);
    let (values, solve_residual) = solve_sparse(&system)?;
    Ok(FieldGrid {
        spec: *spec,
        layout: system.layout,
        omega: omega.omega(),
        theta: wave.theta(),
        n: geometry.n(),
        m: geometry.m(),
        values,
        solve_residual,
    })
}

/// One sample of the field on the extraction circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSample {
    pub theta: f64,
    pub x: i64,
    pub y: i64,
    pub value: Complex64,
}

impl FieldGrid {
    pub fn get(&self, x: i64, y: i64) -> Option<Complex64> {
        self.layout.index(x, y).map(|i| self.values[i])
    }

    pub fn geometry(&self) -> CrackGeometry {
        CrackGeometry::new(self.n, self.m).expect("geometry was valid when solved")
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Residual of the lattice equation at the listed nodes, recomputed from
    /// neighbour values and the incident field, relative to the largest
    /// displacement on the grid. Layer nodes include the sponge term.
    pub fn stencil_residual(&self, wave: &IncidentWave, nodes: &[(i64, i64)]) -> f64 {
        let g = self.geometry();
        let core = self.spec.core() as i64;
        let w2 = self.omega * self.omega;
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for &(x, y) in nodes {
            let Some(up) = self.get(x, y) else { continue };
            let d = self.layout.depth(x, y, core) as f64 / self.spec.n_pml as f64;
            let mut lhs = (w2 + Complex64::new(0.0, self.spec.sigma_max * d * d)) * up;
            let mut rhs = Complex64::new(0.0, 0.0);
            for (dx, dy) in NEIGHBOURS {
                if bond_broken(Some(&g), x, y, dx, dy) {
                    rhs += wave.displacement(x + dx, y + dy) - wave.displacement(x, y);
                } else {
                    lhs += self.get(x + dx, y + dy).unwrap_or_default() - up;
                }
            }
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        worst
    }

    /// Nearest-node samples on a circle about the origin, one every
    /// `step_deg` degrees starting at θ = 0.
    pub fn extract_circle(&self, radius: f64, step_deg: f64) -> Result<Vec<CircleSample>> {
        let core = self.spec.core();
        let count = (360.0 / step_deg).round() as usize;
        (0..count)
            .map(|k| {
                let theta = (k as f64 * step_deg).to_radians();
                let (x, y) = ((radius * theta.cos()).round() as i64, (radius * theta.sin()).round() as i64);
                if x.unsigned_abs() as usize > core || (y - self.layout.y_center).unsigned_abs() as usize > core {
                    return Err(DirectError::RadiusOutOfRange { radius, limit: core });
                }
                Ok(CircleSample { theta, x, y, value: self.get(x, y).expect("inside core") })
            })
            .collect()
    }

    /// Binary dump: `nx, ny` as u64, `ω` (re, im), `Θ`, then `N, M` as i64,
    /// then row-major complex values, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let side = self.layout.side() as u64;
        w.write_all(&side.to_le_bytes())?;
        w.write_all(&side.to_le_bytes())?;
        for f in [self.omega.re, self.omega.im, self.theta] {
            w.write_all(&f.to_le_bytes())?;
        }
        w.write_all(&self.n.to_le_bytes())?;
        w.write_all(&self.m.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Contents of a binary field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub nx: usize,
    pub ny: usize,
    pub omega: Complex64,
    pub theta: f64,
    pub n: i64,
    pub m: i64,
    pub values: Vec<Complex64>,
}

pub fn read_binary<R: Read>(mut r: R) -> Result<FieldDump> {
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let nx = u64::from_le_bytes(next(&mut r)?) as usize;
    let ny = u64::from_le_bytes(next(&mut r)?) as usize;
    if nx > 2 * MAX_GRID + 1 || ny > 2 * MAX_GRID + 1 {
        return Err(DirectError::Format(format!("dimensions {nx}×{ny}")));
    }
    let re = f64::from_le_bytes(next(&mut r)?);
    let im = f64::from_le_bytes(next(&mut r)?);
    let theta = f64::from_le_bytes(next(&mut r)?);
    let n = i64::from_le_bytes(next(&mut r)?);
    let m = i64::from_le_bytes(next(&mut r)?);
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        let a = f64::from_le_bytes(next(&mut r)?);
        let b = f64::from_le_bytes(next(&mut r)?);
        values.push(Complex64::new(a, b));
    }
    Ok(FieldDump { nx, ny, omega: Complex64::new(re, im), theta, n, m, values })
}
