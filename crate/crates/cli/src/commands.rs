//! The subcommands, as functions returning structured reports.

use crate::config::{ConfigError, Physics, RunConfig};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;
use twocrack_core::direct::{self, DirectError, FieldGrid};
use twocrack_core::far_field::{self, FarField, FarFieldError};
use twocrack_core::kernel::{self, Kernel, KernelError};
use twocrack_core::lattice::{Branching, LatticeError, LatticeSymbols};
use twocrack_core::wh::{SpectralSolution, WhError};

/// Kernel residual required for `M = 0`.
pub const EXACTNESS_TOL: f64 = 1e-8;

/// Wiener–Hopf residual required for `M = 0`.
pub const WH_EXACT_TOL: f64 = 1e-8;

/// Interior stencil residual required of the direct solution.
pub const STENCIL_TOL: f64 = 1e-7;

/// Number of nodes on which the stencil residual is re-evaluated.
pub const STENCIL_PROBES: usize = 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Wh(#[from] WhError),
    #[error(transparent)]
    FarField(#[from] FarFieldError),
    #[error(transparent)]
    Direct(#[from] DirectError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Lattice(LatticeError::PassBand { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// One measured quantity checked against a limit.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    /// Whether failure changes the exit status.
    pub enforced: bool,
}

impl Gate {
    pub fn below(name: &str, value: f64, limit: f64, enforced: bool) -> Self {
        Gate { name: name.to_owned(), value, limit, passed: value < limit, enforced }
    }
}

pub fn gates_ok(gates: &[Gate]) -> bool {
    gates.iter().all(|g| g.passed || !g.enforced)
}

/// Complex number as `[re, im]` in JSON.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct C(pub f64, pub f64);

impl From<Complex64> for C {
    fn from(z: Complex64) -> Self {
        C(z.re, z.im)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersionReport {
    pub k: C,
    pub kx: C,
    pub ky: C,
    pub z_p: C,
    pub zh: C,
    pub zr: C,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub margin: f64,
    pub gates: Vec<Gate>,
}

impl DispersionReport {
    /// `(quantity, re, im)` rows.
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        let mut out: Vec<(String, f64, f64)> = [
            ("k", self.k),
            ("k_x", self.kx),
            ("k_y", self.ky),
            ("z_P", self.z_p),
            ("zh", self.zh),
            ("zr", self.zr),
        ]
        .iter()
        .map(|(n, c)| (n.to_string(), c.0, c.1))
        .collect();
        out.push(("inner_radius".into(), self.inner_radius, 0.0));
        out.push(("outer_radius".into(), self.outer_radius, 0.0));
        out.push(("margin".into(), self.margin, 0.0));
        for g in &self.gates {
            out.push((g.name.clone(), g.value, 0.0));
        }
        out
    }
}

pub fn dispersion(cfg: &RunConfig) -> Result<DispersionReport> {
    let p = cfg.physics()?;
    let w2 = p.omega.omega_sq();
    let (kx, ky) = (p.wave.kx(), p.wave.ky());
    let disp = (4.0 - 2.0 * kx.cos() - 2.0 * ky.cos() - w2).norm();
    let sym = LatticeSymbols::new(&p.omega, &p.wave)?;
    let (zh, zr) = (sym.zh(), sym.zr());
    let rh = (zh + zh.inv() - (2.0 - w2)).norm();
    let rr = (zr + zr.inv() - (6.0 - w2)).norm();
    Ok(DispersionReport {
        k: p.wave.k().into(),
        kx: kx.into(),
        ky: ky.into(),
        z_p: p.wave.z_p().into(),
        zh: zh.into(),
        zr: zr.into(),
        inner_radius: sym.inner_radius(),
        outer_radius: sym.outer_radius(),
        margin: sym.margin(),
        gates: vec![
            Gate::below("dispersion_residual", disp, 1e-12, true),
            Gate::below("zh_residual", rh, 1e-12, true),
            Gate::below("zr_residual", rr, 1e-12, true),
        ],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizeReport {
    pub node_count: usize,
    pub closed_form: bool,
    pub notice: Option<String>,
    pub residual_estimate: f64,
    pub probe_offset: f64,
    pub epsilon: f64,
    pub gates: Vec<Gate>,
}

fn node_count(cfg: &RunConfig, p: &Physics) -> Result<usize> {
    Ok(match cfg.node_count {
        Some(n) => n,
        None => kernel::auto_node_count_for(&LatticeSymbols::new(&p.omega, &p.wave)?),
    })
}

fn kernel_for(cfg: &RunConfig, p: &Physics) -> Result<Kernel> {
    let n = node_count(cfg, p)?;
    Ok(Kernel::new(&Branching::new(&p.omega), &p.geometry, n, true)?)
}

fn kernel_gates(m: i64, residual: f64) -> Vec<Gate> {
    vec![Gate::below("kernel_residual", residual, EXACTNESS_TOL, m == 0)]
}

pub fn factorize(cfg: &RunConfig) -> Result<FactorizeReport> {
    let p = cfg.physics()?;
    let k = kernel_for(cfg, &p)?;
    let closed = k.g_factors().is_closed_form();
    let fk = k.factorize_with_offset(cfg.delta_off)?;
    let notice = (!closed).then(|| {
        format!("numeric fallback: N = {} is odd, so the G factors come from a numeric split of 1 ± λ^N", cfg.n)
    });
    let residual = fk.residual_estimate();
    Ok(FactorizeReport {
        node_count: k.node_count(),
        closed_form: closed,
        notice,
        residual_estimate: residual,
        probe_offset: fk.probe_radius(),
        epsilon: kernel::epsilon_magnitude(k.branching(), &p.geometry, 4096),
        gates: kernel_gates(cfg.m, residual),
    })
}

/// Factorizes the kernel and solves the Wiener–Hopf system.
pub fn spectral_solution(cfg: &RunConfig, p: &Physics) -> Result<SpectralSolution> {
    let k = kernel_for(cfg, p)?;
    Ok(SpectralSolution::new(k.factorize_with_offset(cfg.delta_off)?, &p.omega, &p.wave)?)
}

/// Residual gates of a spectral solution.
pub fn spectral_gates(s: &SpectralSolution) -> Result<Vec<Gate>> {
    let kres = s.factorized_kernel().residual_estimate();
    let m = s.geometry().m();
    let mut gates = kernel_gates(m, kres);
    let (res, vi) = s.wh_residual_sup()?;
    if m == 0 {
        gates.push(Gate::below("wh_residual", res, WH_EXACT_TOL, false));
    } else {
        gates.push(Gate::below("wh_residual", res, 4.0 * kres * vi, false));
    }
    Ok(gates)
}

/// Why an angle is left out of the comparison statistics.
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    Quadrant,
    Pole,
    Strip,
    NearField,
    FarFieldFailure,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct FarFieldRow {
    pub theta_deg: f64,
    pub value: Option<C>,
    pub exclusion: Option<Exclusion>,
}

/// Angles `0, step, 2·step, …` below 360°, in degrees.
pub fn theta_grid(step_deg: f64) -> Vec<f64> {
    let count = (360.0 / step_deg).round() as usize;
    (0..count).map(|k| k as f64 * step_deg).collect()
}

/// Stationary-phase value and exclusion flag at one angle.
pub fn far_field_row(ff: &FarField, theta_deg: f64, radius: f64) -> FarFieldRow {
    let theta = theta_deg.to_radians();
    let quadrant = far_field::in_quadrant_band(theta);
    match ff.far_field(theta, radius) {
        Ok(s) => {
            let exclusion = if s.in_strip {
                Some(Exclusion::Strip)
            } else if quadrant {
                Some(Exclusion::Quadrant)
            } else if s.near_pole {
                Some(Exclusion::Pole)
            } else if s.near_field {
                Some(Exclusion::NearField)
            } else {
                None
            };
            let value = (!s.in_strip).then_some(s.value.into());
            FarFieldRow { theta_deg, value, exclusion }
        }
        Err(_) if quadrant => FarFieldRow { theta_deg, value: None, exclusion: Some(Exclusion::Quadrant) },
        Err(_) => FarFieldRow { theta_deg, value: None, exclusion: Some(Exclusion::FarFieldFailure) },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SemianalyticReport {
    pub node_count: usize,
    pub radius: f64,
    pub rows: Vec<FarFieldRow>,
    pub gates: Vec<Gate>,
}

pub fn semianalytic(cfg: &RunConfig) -> Result<SemianalyticReport> {
    let p = cfg.physics()?;
    let s = spectral_solution(cfg, &p)?;
    let ff = FarField::new(&s)?;
    let rows = theta_grid(cfg.theta_step_deg)
        .into_iter()
        .map(|t| far_field_row(&ff, t, cfg.circle_radius))
        .collect();
    Ok(SemianalyticReport {
        node_count: s.node_count(),
        radius: cfg.circle_radius,
        rows,
        gates: spectral_gates(&s)?,
    })
}

/// Deterministic spread of interior nodes for the stencil re-check.
pub fn stencil_probe_nodes(field: &FieldGrid, count: usize) -> Vec<(i64, i64)> {
    let core = field.spec.core() as i64;
    let side = 2 * core + 1;
    let total = (side * side) as usize;
    let count = count.min(total);
    // A stride coprime to the core size visits distinct nodes.
    let mut stride = (total as f64 * 0.618_033_988_75) as usize | 1;
    while gcd(stride, total) != 1 {
        stride += 2;
    }
    (0..count)
        .map(|i| {
            let idx = (i * stride) % total;
            let (r, c) = ((idx / side as usize) as i64, (idx % side as usize) as i64);
            (c - core, r - core + field.layout.y_center)
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Gates of a direct solution.
pub fn direct_gates(field: &FieldGrid, p: &Physics) -> Vec<Gate> {
    let nodes = stencil_probe_nodes(field, STENCIL_PROBES);
    vec![
        Gate::below("solve_residual", field.solve_residual, direct::SOLVE_TOL, true),
        Gate::below("stencil_residual", field.stencil_residual(&p.wave, &nodes), STENCIL_TOL, true),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectReport {
    pub unknowns: usize,
    pub samples: Vec<(f64, i64, i64, C)>,
    pub gates: Vec<Gate>,
}

pub fn run_direct(cfg: &RunConfig) -> Result<(FieldGrid, DirectReport)> {
    let p = cfg.physics()?;
    let field = direct::solve(&p.grid, &p.omega, &p.wave, &p.geometry)?;
    let samples = field
        .extract_circle(cfg.circle_radius, cfg.theta_step_deg)?
        .into_iter()
        .map(|s| (s.theta.to_degrees(), s.x, s.y, s.value.into()))
        .collect();
    let gates = direct_gates(&field, &p);
    let report = DirectReport { unknowns: field.values.len(), samples, gates };
    Ok((field, report))
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ComparisonRow {
    pub theta_deg: f64,
    pub semi: Option<C>,
    pub num: C,
    pub rel_diff: f64,
    pub exclusion: Option<Exclusion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub radius: f64,
    pub median: f64,
    pub p90: f64,
    pub included: usize,
    pub excluded: Vec<(f64, Exclusion)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
    pub gates: Vec<Gate>,
}

/// Median of a non-empty list (mean of the two middle values for even
/// length); NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let rank = ((q / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

/// Per-angle comparison of `|u|` between the stationary-phase far field and
/// the direct solution on a circle of the given radius.
pub fn compare_on_circle(ff: Option<&FarField>, field: &FieldGrid, radius: f64, step_deg: f64) -> Result<(Vec<ComparisonRow>, ComparisonSummary)> {
    let samples = field.extract_circle(radius, step_deg)?;
    let rows: Vec<ComparisonRow> = samples
        .iter()
        .map(|s| {
            let theta_deg = s.theta * 180.0 / PI;
            let fr = match ff {
                Some(ff) => far_field_row(ff, theta_deg, radius),
                None => FarFieldRow { theta_deg, value: None, exclusion: Some(Exclusion::FarFieldFailure) },
            };
            let rel_diff = match fr.value {
                Some(C(re, im)) => (Complex64::new(re, im).norm() - s.value.norm()).abs() / s.value.norm(),
                None => f64::NAN,
            };
            ComparisonRow { theta_deg, semi: fr.value, num: s.value.into(), rel_diff, exclusion: fr.exclusion }
        })
        .collect();
    let included: Vec<f64> = rows.iter().filter(|r| r.exclusion.is_none()).map(|r| r.rel_diff).collect();
    let excluded = rows.iter().filter_map(|r| r.exclusion.map(|e| (r.theta_deg, e))).collect();
    let summary = ComparisonSummary {
        radius,
        median: median(&included),
        p90: percentile(&included, 90.0),
        included: included.len(),
        excluded,
    };
    Ok((rows, summary))
}

/// Runs both pipelines. A far-field failure still yields the numeric
/// columns; it is returned alongside the partial report.
pub fn compare(cfg: &RunConfig) -> Result<(ComparisonReport, Option<HarnessError>)> {
    let p = cfg.physics()?;
    let field = direct::solve(&p.grid, &p.omega, &p.wave, &p.geometry)?;
    let mut gates = direct_gates(&field, &p);
    let spectral = spectral_solution(cfg, &p).and_then(|s| {
        let g = spectral_gates(&s)?;
        Ok((s, g))
    });
    let (solution, failure) = match spectral {
        Ok((s, g)) => {
            gates.extend(g);
            (Some(s), None)
        }
        Err(e) => (None, Some(e)),
    };
    let ff = match solution.as_ref().map(FarField::new) {
        Some(Ok(ff)) => Some(ff),
        Some(Err(e)) => return partial(&field, cfg, gates, e.into()),
        None => None,
    };
    let (rows, summary) = compare_on_circle(ff.as_ref(), &field, cfg.circle_radius, cfg.theta_step_deg)?;
    Ok((ComparisonReport { rows, summary, gates }, failure))
}

fn partial(field: &FieldGrid, cfg: &RunConfig, gates: Vec<Gate>, err: HarnessError) -> Result<(ComparisonReport, Option<HarnessError>)> {
    let (rows, summary) = compare_on_circle(None, field, cfg.circle_radius, cfg.theta_step_deg)?;
    Ok((ComparisonReport { rows, summary, gates }, Some(err)))
}
