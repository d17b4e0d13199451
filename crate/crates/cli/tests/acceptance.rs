//! Acceptance suite. Prints one PASS/FAIL line per primary criterion with the
//! measured values; a FAIL is reported, not raised, so the run always
//! completes.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::{Duration, Instant};
use twocrack::commands::{compare_on_circle, median};
use twocrack_core::contour::{self, ContourGrid, Side};
use twocrack_core::direct::{self, GridSpec};
use twocrack_core::far_field::{self, FarField};
use twocrack_core::kernel::{self, Kernel};
use twocrack_core::lattice::{
    dispersion_residual, solve_wavenumber, symbol_q, Branching, ComplexFrequency, CrackGeometry, IncidentWave,
    LatticeSymbols,
};
use twocrack_core::scalar_factors::{self, ElementaryFactorSet, GFactors, GIndex};
use twocrack_core::wh::SpectralSolution;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_omega() -> ComplexFrequency {
    ComplexFrequency::new(0.35, 1e-3).unwrap()
}

fn reference_wave() -> IncidentWave {
    IncidentWave::new(&reference_omega(), PI / 4.0, Complex64::new(1.0, 0.0)).unwrap()
}

fn unit(j: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.37) / n as f64)
}

/// Deterministic points in `[0, 1)` from the additive recurrence with the
/// golden-ratio and plastic-number increments.
fn sample_pair(i: usize) -> (f64, f64) {
    let a = (0.5 + i as f64 * 0.618_033_988_749_894_9).fract();
    let b = (0.5 + i as f64 * 0.754_877_666_246_692_7).fract();
    (a, b)
}

fn dispersion() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..50 {
        let (a, b) = sample_pair(i);
        let w1 = 0.1 + 1.8 * a;
        let theta = PI - 2.0 * PI * b;
        let w = ComplexFrequency::new(w1, 1e-3).unwrap();
        match solve_wavenumber(&w, theta) {
            Ok(k) => worst = worst.max(dispersion_residual(&w, k, theta)),
            Err(_) => failures += 1,
        }
    }
    let t = start.elapsed();
    outcome(
        failures == 0 && worst < 1e-12 && t < Duration::from_secs(1),
        format!("max residual {worst:.2e} (< 1e-12), {failures} solver failures, {:.3} s (< 1 s)", t.as_secs_f64()),
    )
}

fn branch_identities() -> Outcome {
    let mut sum_err: f64 = 0.0;
    let mut diff_err: f64 = 0.0;
    let mut max_lambda: f64 = 0.0;
    for w1 in [0.35, 1.0, 1.9, 2.5] {
        let w = ComplexFrequency::new(w1, 1e-3).unwrap();
        let b = Branching::new(&w);
        for j in 0..4096 {
            let z = unit(j, 4096);
            let v = b.eval(z);
            let q = symbol_q(z, &w).unwrap();
            sum_err = sum_err.max((v.lambda + v.lambda.inv() - q).norm());
            diff_err = diff_err.max((v.lambda.inv() - v.lambda - v.r * v.h).norm());
            max_lambda = max_lambda.max(v.lambda.norm());
        }
    }
    outcome(
        sum_err < 1e-12 && diff_err < 1e-12 && max_lambda < 1.0,
        format!(
            "|λ+λ⁻¹−Q| {sum_err:.2e}, |λ⁻¹−λ−rh| {diff_err:.2e} (< 1e-12), max|λ| {max_lambda:.8} (< 1), ω₁ ∈ {{0.35, 1, 1.9, 2.5}}"
        ),
    )
}

fn scalar_factorization() -> Outcome {
    let b = Branching::new(&reference_omega());
    let cl = scalar_factors::l_constant(&b);
    let grid = ContourGrid::sample(65536, |z| {
        let v = b.eval(z);
        v.h / v.r
    })
    .unwrap();
    let split = contour::multiplicative_split(&grid).unwrap();
    let ratios: Vec<Complex64> = (0..64)
        .map(|j| {
            let z = Complex64::from_polar(1.2, 2.0 * PI * j as f64 / 64.0);
            split.plus(z) / scalar_factors::factor_l(&b, cl, z, Side::Plus).unwrap()
        })
        .collect();
    let spread = ratios.iter().map(|r| (r - ratios[0]).norm()).fold(0.0, f64::max) / ratios[0].norm();
    let mut prod_err: f64 = 0.0;
    for j in 0..4096 {
        let z = unit(j, 4096);
        let v = b.eval(z);
        let p = scalar_factors::factor_l(&b, cl, z, Side::Plus).unwrap() * scalar_factors::factor_l(&b, cl, z, Side::Minus).unwrap();
        prod_err = prod_err.max((p - v.h / v.r).norm());
    }
    outcome(
        spread < 1e-9 && prod_err < 1e-10,
        format!("explicit/projected L₊ ratio spread {spread:.2e} (< 1e-9), |L₊L₋ − h/r| {prod_err:.2e} (< 1e-10)"),
    )
}

fn closed_forms() -> Outcome {
    let b = Branching::new(&reference_omega());
    let mut n2: f64 = 0.0;
    for j in 0..4096 {
        let z = unit(j, 4096);
        let v = b.eval(z);
        n2 = n2.max((scalar_factors::g_direct(&b, 2, z, GIndex::One) - v.lambda * v.q).norm());
        n2 = n2.max((scalar_factors::g_direct(&b, 2, z, GIndex::Two) - v.lambda * v.r * v.h).norm());
    }
    let set = ElementaryFactorSet::new(&b, 4, 4096).unwrap();
    let mut n4: f64 = 0.0;
    for j in 0..4096 {
        let z = unit(j, 4096);
        let l4 = b.eval(z).lambda.powi(4);
        n4 = n4.max((set.g_product(z, GIndex::One) - (1.0 + l4)).norm());
        n4 = n4.max((set.g_product(z, GIndex::Two) - (1.0 - l4)).norm());
        n4 = n4.max((scalar_factors::g_chebyshev(&b, 4, z, GIndex::One).unwrap() - (1.0 + l4)).norm());
        n4 = n4.max((scalar_factors::g_chebyshev(&b, 4, z, GIndex::Two).unwrap() - (1.0 - l4)).norm());
    }
    let closed = GFactors::new(&b, 4, 65536, true).unwrap();
    let numeric = GFactors::new(&b, 4, 65536, false).unwrap();
    let mut ratio: f64 = 0.0;
    for which in [GIndex::One, GIndex::Two] {
        let r: Vec<Complex64> = (0..64)
            .map(|j| {
                let z = Complex64::from_polar(1.2, 2.0 * PI * j as f64 / 64.0);
                closed.eval(which, Side::Plus, z) / numeric.eval(which, Side::Plus, z)
            })
            .collect();
        ratio = ratio.max(r.iter().map(|x| (x - r[0]).norm()).fold(0.0, f64::max) / r[0].norm());
    }
    outcome(
        n2 < 1e-12 && n4 < 1e-10 && ratio < 1e-6,
        format!("N=2 identities {n2:.2e} (< 1e-12), N=4 products vs 1±λ⁴ {n4:.2e} (< 1e-10), closed/numeric ratio spread {ratio:.2e} (< 1e-6)"),
    )
}

fn factorize(n: i64, m: i64, nodes: Option<usize>) -> (f64, Duration, usize) {
    let start = Instant::now();
    let w = reference_omega();
    let nodes = nodes.unwrap_or_else(|| kernel::auto_node_count_for(&LatticeSymbols::new(&w, &reference_wave()).unwrap()));
    let k = Kernel::new(&Branching::new(&w), &CrackGeometry::new(n, m).unwrap(), nodes, true).unwrap();
    let r = k.factorize().unwrap().residual_estimate();
    (r, start.elapsed(), nodes)
}

fn exactness_gate() -> Outcome {
    let (r4096, t4096, _) = factorize(4, 0, Some(4096));
    let (r_auto, t_auto, n_auto) = factorize(4, 0, None);
    outcome(
        r4096 < 1e-8 && t4096 < Duration::from_secs(30),
        format!(
            "nodeCount 4096: sup‖K−K₋K₊‖ {r4096:.2e} (< 1e-8), {:.2} s (< 30 s); automatic nodeCount {n_auto}: {r_auto:.2e} in {:.2} s",
            t4096.as_secs_f64(),
            t_auto.as_secs_f64()
        ),
    )
}

fn asymptotic_regime() -> Outcome {
    let (r6, t6, n) = factorize(6, 1, None);
    let (r4, t4, _) = factorize(4, 1, None);
    let (r42, t42, _) = factorize(4, 2, None);
    let slow = [t6, t4, t42].iter().map(|t| t.as_secs_f64()).fold(0.0, f64::max);
    outcome(
        r6 < r4 && r4 < r42 && slow < 60.0,
        format!("(M=1,N=6) {r6:.3e} < (M=1,N=4) {r4:.3e} < (M=2,N=4) {r42:.3e}; slowest run {slow:.2} s (< 60 s), {n} nodes"),
    )
}

fn wiener_hopf_residual() -> Outcome {
    let w = reference_omega();
    let wave = reference_wave();
    let s0 = SpectralSolution::solve(&w, &wave, &CrackGeometry::new(4, 0).unwrap(), None, true).unwrap();
    let (r0, _) = s0.wh_residual_sup().unwrap();
    let s1 = SpectralSolution::solve(&w, &wave, &CrackGeometry::new(4, 1).unwrap(), None, true).unwrap();
    let (r1, vi) = s1.wh_residual_sup().unwrap();
    let kres = s1.factorized_kernel().residual_estimate();
    let bound = 4.0 * kres * vi;
    outcome(
        r0 < 1e-8 && r1 <= bound,
        format!(
            "M=0: {r0:.2e} (< 1e-8) on {} probes; M=1: {r1:.3e} vs 4×{kres:.3e}×{vi:.3} = {bound:.3e}",
            s0.annulus_probes().len()
        ),
    )
}

fn direct_solver_oracle() -> Outcome {
    use faer::prelude::*;
    let w = reference_omega();
    let wave = reference_wave();
    let spec = GridSpec::new(20, 6, 1.0, 10.0).unwrap();
    let sys = direct::assemble(&spec, &w, &wave, &CrackGeometry::new(2, 0).unwrap());
    let (u, _) = direct::solve_sparse(&sys).unwrap();
    let n = sys.rows();
    let mut dense = Mat::<Complex64>::zeros(n, n);
    for t in &sys.triplets {
        dense[(t.row, t.col)] += t.val;
    }
    let mut b = Mat::from_fn(n, 1, |i, _| sys.rhs[i]);
    dense.partial_piv_lu().solve_in_place(b.as_mut());
    let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dense_err = (0..n).map(|i| (b[(i, 0)] - u[i]).norm()).fold(0.0, f64::max) / scale;

    let start = Instant::now();
    let g = CrackGeometry::new(4, 0).unwrap();
    let desk = GridSpec::desk_scale();
    let field = direct::solve(&desk, &w, &wave, &g).unwrap();
    let t = start.elapsed();
    let core = desk.core() as i64;
    let yc = field.layout.y_center;
    let nodes: Vec<(i64, i64)> = (-core..=core).flat_map(|y| (-core..=core).map(move |x| (x, y + yc))).collect();
    let stencil = field.stencil_residual(&wave, &nodes);
    outcome(
        dense_err < 1e-10 && stencil < 1e-7 && t < Duration::from_secs(120),
        format!(
            "41×41 vs dense {dense_err:.2e} (< 1e-10); 401×401 interior stencil residual {stencil:.2e} (< 1e-7) on {} nodes; solve {:.2} s (< 120 s)",
            nodes.len(),
            t.as_secs_f64()
        ),
    )
}

const XVAL_RADII: [f64; 3] = [40.0, 55.0, 70.0];

fn cross_validation_medians(m: i64) -> (Vec<f64>, Duration) {
    let start = Instant::now();
    let w = reference_omega();
    let wave = reference_wave();
    let g = CrackGeometry::new(4, m).unwrap();
    let field = direct::solve(&GridSpec::desk_scale(), &w, &wave, &g).unwrap();
    let s = SpectralSolution::solve(&w, &wave, &g, None, true).unwrap();
    let ff = FarField::new(&s).unwrap();
    let medians = XVAL_RADII
        .iter()
        .map(|&r| compare_on_circle(Some(&ff), &field, r, 1.0).unwrap().1.median)
        .collect();
    (medians, start.elapsed())
}

fn cross_validation() -> Outcome {
    let (m0, t0) = cross_validation_medians(0);
    let (m2, _) = cross_validation_medians(2);
    let within = m0.iter().all(|&m| m <= 0.20);
    let ordered = m0.iter().zip(&m2).all(|(a, b)| b > a);
    let fmt = |v: &[f64]| v.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join("/");
    outcome(
        within && ordered && t0 < Duration::from_secs(300),
        format!(
            "M=0 medians at R=40/55/70: {} (≤ 0.20); M=2: {} (must exceed M=0); M=0 run {:.1} s (< 300 s)",
            fmt(&m0),
            fmt(&m2),
            t0.as_secs_f64()
        ),
    )
}

fn far_field_asymptotics() -> Outcome {
    let w = reference_omega();
    let s = SpectralSolution::solve(&w, &reference_wave(), &CrackGeometry::new(4, 0).unwrap(), None, true).unwrap();
    let ff = FarField::new(&s).unwrap();
    let nq = 1 << 20;
    let mut errs = Vec::new();
    for deg in [60.0f64, 120.0, 240.0, 300.0] {
        let th = deg.to_radians();
        let sp = ff.far_field(th, 200.0).unwrap();
        let q = ff.quadrature(200.0 * th.cos(), 200.0 * th.sin(), nq).unwrap();
        errs.push((deg, (sp.value - q).norm() / q.norm()));
    }
    let th = 120f64.to_radians();
    let amp = |r: f64| {
        let sp = ff.far_field(th, r).unwrap();
        let q = ff.quadrature(r * th.cos(), r * th.sin(), nq).unwrap();
        q.norm() * r.sqrt() / sp.damping
    };
    let scaling = amp(800.0) / amp(200.0) - 1.0;
    let listed = errs.iter().map(|(d, e)| format!("{d:.0}°: {:.2}%", 100.0 * e)).collect::<Vec<_>>().join(", ");
    outcome(
        errs.iter().all(|(_, e)| *e < 0.05) && scaling.abs() < 0.02,
        format!("SP vs quadrature at R=200: {listed} (< 5%); √R·|u| change R=200→800 at 120°: {:.3}% (< 2%)", 100.0 * scaling),
    )
}

fn saddle_equations() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let mut errors = 0;
    for k in 0..181 {
        let theta = (2.0 * k as f64).to_radians();
        if far_field::in_quadrant_band(theta) {
            continue;
        }
        used += 1;
        match far_field::saddle_point(theta, 0.35) {
            Ok(s) => worst = worst.max(s.residual),
            Err(_) => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst < 1e-10,
        format!("max residual {worst:.2e} (< 1e-10) over {used} angles, {errors} failures"),
    )
}

fn grid_refinement() -> Outcome {
    let w = reference_omega();
    let wave = reference_wave();
    let g = CrackGeometry::new(4, 0).unwrap();
    let a = direct::solve(&GridSpec::new(200, 60, 1.0, 40.0).unwrap(), &w, &wave, &g).unwrap();
    let b = direct::solve(&GridSpec::new(280, 60, 1.0, 40.0).unwrap(), &w, &wave, &g).unwrap();
    let ca = a.extract_circle(40.0, 1.0).unwrap();
    let cb = b.extract_circle(40.0, 1.0).unwrap();
    let rel: Vec<f64> = ca.iter().zip(&cb).map(|(p, q)| (p.value - q.value).norm() / q.value.norm()).collect();
    let m = median(&rel);
    outcome(m < 0.02, format!("median drift at R=40, Ngrid 200→280: {:.3}% (< 2%)", 100.0 * m))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Dispersion", dispersion),
        ("Branch identities", branch_identities),
        ("Scalar factorization", scalar_factorization),
        ("Closed-form scalar factors", closed_forms),
        ("Matrix factorization exactness gate", exactness_gate),
        ("Asymptotic regime", asymptotic_regime),
        ("Wiener-Hopf residual", wiener_hopf_residual),
        ("Direct-solver oracle", direct_solver_oracle),
        ("Cross-validation", cross_validation),
        ("Far-field asymptotics", far_field_asymptotics),
        ("Saddle equations", saddle_equations),
    ];
    let mut passed = 0;
    for (name, f) in criteria {
        let o = f();
        passed += o.pass as usize;
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{passed}/{} primary criteria passed", criteria.len());
    let o = grid_refinement();
    println!("{} (supplementary) Grid refinement: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}
