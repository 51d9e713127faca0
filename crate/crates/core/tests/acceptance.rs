//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rofphi_core::calculus::{pairing, truncate};
use rofphi_core::certificate::young_equality_map;
use rofphi_core::noise::GaussianStream;
use rofphi_core::phi::{
    check_double_phase_holder, check_log_holder, check_strong_holder_a, ConditionConfig,
    LegendreOracle,
};
use rofphi_core::synthetic::phantom;
use rofphi_core::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_image(grid: Grid, rng: &mut GaussianStream, lo: f64, hi: f64) -> ScalarImage {
    ScalarImage::from_fn(grid, |_, _| lo + (hi - lo) * rng.uniform())
}

/// Random field with zero normal trace.
fn random_field(grid: Grid, rng: &mut GaussianStream, amp: f64) -> VectorField {
    let n = grid.len();
    let x = (0..n).map(|_| amp * (2.0 * rng.uniform() - 1.0)).collect();
    let y = (0..n).map(|_| amp * (2.0 * rng.uniform() - 1.0)).collect();
    VectorField::from_components_zero_trace(grid, x, y).unwrap()
}

fn families(grid: Grid, rng: &mut GaussianStream) -> Vec<PhiField> {
    vec![
        PhiField::classical_tv(grid),
        PhiField::variable_exponent(random_image(grid, rng, 1.0, 3.0)).unwrap(),
        PhiField::double_phase(random_image(grid, rng, 0.0, 1.0), 2.5).unwrap(),
        PhiField::power_weighted(random_image(grid, rng, 0.5, 2.0)).unwrap(),
    ]
}

fn conjugate_correctness() -> Outcome {
    let start = Instant::now();
    let mut sets = vec![LocalPhi::Linear { weight: 1.0 }];
    sets.extend([1.0, 1.5, 2.0, 3.0].map(|p| LocalPhi::Power { p }));
    for a in [0.0, 0.1, 1.0] {
        for q in [1.5, 2.0, 3.0] {
            sets.push(LocalPhi::DoublePhase { a, q });
        }
    }
    let (t_max, n) = (1e3, 1_000_000);
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for phi in &sets {
        let oracle = LegendreOracle::new(*phi, t_max, n).unwrap();
        // Inside the domain, up to the largest slope whose maximiser lies in [0, t_max].
        let (inside_max, radius) = match phi.conjugate_domain_radius() {
            Some(r) => (r, Some(r)),
            None => (phi.derivative(t_max), None),
        };
        for k in 0..200 {
            let s = inside_max * k as f64 / 199.0;
            let (exact, numeric) = (phi.conjugate(s), oracle.conjugate(s));
            match (exact, numeric) {
                (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                    let err = (a - b).abs() / a.abs().max(1.0);
                    worst = worst.max(err);
                    if err > 1e-6 {
                        failures.push(format!("{phi:?} s={s}: {a} vs {b}"));
                    }
                }
                _ => failures.push(format!("{phi:?} s={s}: {exact} vs {numeric}")),
            }
        }
        if let Some(r) = radius {
            for k in 1..=200 {
                let s = r * (1.0 + 9.0 * k as f64 / 200.0) + 1e-6;
                if phi.conjugate(s).is_finite() || oracle.conjugate(s).is_finite() {
                    failures.push(format!("{phi:?} s={s}: expected infinity"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{} parameter sets, worst relative error {worst:.2e}, {} mismatches, {elapsed:.2?}",
            sets.len(),
            failures.len()
        ),
    )
}

fn gauss_green() -> Outcome {
    let start = Instant::now();
    let grid = Grid::new(16, 16).unwrap();
    let mut rng = GaussianStream::new(2);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let v = random_image(grid, &mut rng, -1.0, 1.0);
        let xi = random_field(grid, &mut rng, 1.0);
        let div = divergence(&xi);
        let lhs = pairing(&xi, &v).unwrap() + v.dot(&div);
        let scale =
            gradient(&v).dot(&gradient(&v)).sqrt() * xi.dot(&xi).sqrt() + v.norm() * div.norm();
        worst = worst.max(lhs.abs() / scale);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("worst |<grad v, xi> + <v, div xi>| / scale = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn young_inequality() -> Outcome {
    let grid = Grid::with_spacing(16, 16, 1.0).unwrap();
    let mut rng = GaussianStream::new(3);
    let mut lowest = f64::INFINITY;
    for field in families(grid, &mut rng) {
        for _ in 0..100 {
            let u = random_image(grid, &mut rng, -2.0, 2.0);
            let mut xi_bar = random_field(grid, &mut rng, 3.0);
            // Pull each vector inside the conjugate domain where it is bounded.
            for i in 0..grid.len() {
                if let Some(r) = field.local(i).conjugate_domain_radius() {
                    let m = xi_bar.magnitude(i);
                    if m > r {
                        let [x, y] = xi_bar.at(i);
                        let s = r * rng.uniform() / m;
                        xi_bar.set_at(i, [x * s, y * s]);
                    }
                }
            }
            let map = young_equality_map(&u, &xi_bar, &field, 1.0).unwrap();
            if map.infinite_count() > 0 {
                return outcome(
                    false,
                    format!(
                        "{:?}: infeasible pixel in a feasible sample",
                        field.family()
                    ),
                );
            }
            lowest = lowest.min(map.min());
        }
    }
    outcome(
        lowest >= -1e-12,
        format!("smallest residual {lowest:.2e} over 400 pairs"),
    )
}

/// Dense Neumann 5-point Laplacian solve of `(I - lambda Delta_h) u = f`.
fn dense_quadratic(f: &ScalarImage, lambda: f64) -> Vec<f64> {
    let g = f.grid();
    let n = g.len();
    let c = lambda / (g.h * g.h);
    let mut a = DMatrix::<f64>::identity(n, n);
    for r in 0..g.height {
        for col in 0..g.width {
            let i = r * g.width + col;
            let neighbours = [
                (r > 0).then(|| i - g.width),
                (r + 1 < g.height).then(|| i + g.width),
                (col > 0).then(|| i - 1),
                (col + 1 < g.width).then(|| i + 1),
            ];
            for j in neighbours.into_iter().flatten() {
                a[(i, i)] += c;
                a[(i, j)] -= c;
            }
        }
    }
    let b = DVector::from_column_slice(f.data());
    a.lu().solve(&b).expect("nonsingular").as_slice().to_vec()
}

fn quadratic_oracle() -> Outcome {
    let start = Instant::now();
    let grid = Grid::new(32, 32).unwrap();
    let f = add_noise(&phantom(grid), 0.1, 4).unwrap();
    let field = PhiField::variable_exponent(ScalarImage::constant(grid, 2.0)).unwrap();
    let mut details = Vec::new();
    let mut passed = true;
    for lambda in [0.05, 0.5] {
        let mut cfg = SolverConfig::new(lambda, grid);
        cfg.gap_tol = 1e-15;
        cfg.max_iters = 200_000;
        let res = solve_rof(&f, &field, &cfg).unwrap();
        let exact = dense_quadratic(&f, lambda);
        let num: f64 = res
            .u
            .data()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = exact.iter().map(|b| b * b).sum();
        let rel = (num / den).sqrt();
        passed &= rel <= 1e-6;
        details.push(format!(
            "lambda={lambda}: rel err {rel:.2e} ({} iters)",
            res.iterations
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        passed && elapsed < Duration::from_secs(30),
        format!("{}, {elapsed:.2?}", details.join("; ")),
    )
}

fn two_pixel() -> Outcome {
    let grid = Grid::with_spacing(1, 2, 1.0).unwrap();
    let f = ScalarImage::from_vec(grid, vec![0.0, 1.0]).unwrap();
    let field = PhiField::classical_tv(grid);
    let mut cfg = SolverConfig::new(0.1, grid);
    cfg.gap_tol = 1e-14;
    let res = solve_rof(&f, &field, &cfg).unwrap();
    let err = (res.u.data()[0] - 0.1)
        .abs()
        .max((res.u.data()[1] - 0.9).abs());

    let u = ScalarImage::from_vec(grid, vec![0.1, 0.9]).unwrap();
    let xi = VectorField::from_components(grid, vec![-1.0, 0.0], vec![0.0, 0.0]).unwrap();
    let report = certify(&u, &xi, &f, &field, 0.1, Tolerances::default()).unwrap();
    outcome(
        err <= 1e-8 && report.gap_abs <= 1e-10 && report.passed(),
        format!(
            "solver u = ({:.12}, {:.12}), error {err:.1e}; analytic certificate gap {:.1e}",
            res.u.data()[0],
            res.u.data()[1],
            report.gap_abs
        ),
    )
}

fn e2e_fields(grid: Grid) -> Vec<PhiField> {
    let span = (grid.width - 1) as f64;
    vec![
        PhiField::classical_tv(grid),
        PhiField::variable_exponent(ScalarImage::from_fn(grid, |_, c| 1.0 + c as f64 / span))
            .unwrap(),
        PhiField::double_phase(
            ScalarImage::from_fn(grid, |r, _| (r as f64 / span - 0.5).max(0.0)),
            2.0,
        )
        .unwrap(),
        PhiField::power_weighted(ScalarImage::from_fn(grid, |r, c| {
            0.5 + 0.5 * (r + c) as f64 / (2.0 * span)
        }))
        .unwrap(),
    ]
}

/// Runs the end-to-end problem and returns per-family outputs.
fn end_to_end_runs() -> Vec<(PhiFamily, SolveResult, CertificateReport, Duration)> {
    let grid = Grid::new(64, 64).unwrap();
    let f = add_noise(&phantom(grid), 0.1, 42).unwrap();
    let lambda = 0.1;
    e2e_fields(grid)
        .into_iter()
        .map(|field| {
            let start = Instant::now();
            let mut cfg = SolverConfig::new(lambda, grid);
            cfg.seed = 42;
            let res = solve_rof(&f, &field, &cfg).unwrap();
            let report =
                certify(&res.u, &res.xi, &f, &field, lambda, Tolerances::default()).unwrap();
            (field.family(), res, report, start.elapsed())
        })
        .collect()
}

fn end_to_end(runs: &[(PhiFamily, SolveResult, CertificateReport, Duration)]) -> Outcome {
    let mut passed = true;
    let mut details = Vec::new();
    for (family, res, report, elapsed) in runs {
        let ok = res.converged
            && res.iterations <= 20_000
            && res.gap_rel <= 1e-4
            && report.passed()
            && report.div_residual <= 1e-8
            && report.trace_violation == 0.0
            && *elapsed < Duration::from_secs(300);
        passed &= ok;
        details.push(format!(
            "{}: {} iters, gap_rel {:.2e}, div {:.1e}, {elapsed:.2?}",
            family.name(),
            res.iterations,
            report.gap_rel,
            report.div_residual
        ));
    }
    outcome(passed, details.join("; "))
}

fn truncation_monotone() -> Outcome {
    let grid = Grid::new(16, 16).unwrap();
    let mut rng = GaussianStream::new(7);
    let fields = families(grid, &mut rng);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..50 {
        let v = random_image(grid, &mut rng, -2.0, 2.0);
        for m in [0.25, 0.75, 1.5] {
            let tv = gradient(&truncate(&v, m).unwrap());
            let gv = gradient(&v);
            for field in &fields {
                checks += 1;
                if field.phi_total(&tv).unwrap() > field.phi_total(&gv).unwrap() {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {checks} comparisons"),
    )
}

fn dual_feasibility() -> Outcome {
    let grid = Grid::new(24, 24).unwrap();
    let f = add_noise(&phantom(grid), 0.1, 8).unwrap();
    let span = (grid.width - 1) as f64;
    let fields = vec![
        PhiField::classical_tv(grid),
        PhiField::variable_exponent(ScalarImage::from_fn(grid, |_, c| {
            if c < 12 {
                1.0
            } else {
                1.0 + c as f64 / span
            }
        }))
        .unwrap(),
        PhiField::double_phase(
            ScalarImage::from_fn(grid, |r, _| if r < 12 { 0.0 } else { 0.5 }),
            2.0,
        )
        .unwrap(),
    ];
    let lambda = 0.1;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut observed = 0usize;
    for field in &fields {
        let linear: Vec<bool> = (0..grid.len())
            .map(|i| field.local(i).has_linear_growth())
            .collect();
        let mut cfg = SolverConfig::new(lambda, grid);
        cfg.max_iters = 2000;
        solve_rof_observed(&f, field, &cfg, |view| {
            for (i, lin) in linear.iter().enumerate() {
                if *lin {
                    observed += 1;
                    worst_excess = worst_excess.max(view.dual.magnitude(i) - lambda);
                }
            }
        })
        .unwrap();
    }
    outcome(
        worst_excess <= 1e-12,
        format!("max(|eta| - lambda) = {worst_excess:.2e} over {observed} pixel updates"),
    )
}

fn flow_properties() -> Outcome {
    let grid = Grid::new(32, 32).unwrap();
    let u0 = add_noise(&phantom(grid), 0.1, 9).unwrap();
    let span = (grid.width - 1) as f64;
    let fields = [
        PhiField::classical_tv(grid),
        PhiField::variable_exponent(ScalarImage::from_fn(grid, |r, _| {
            1.0 + 0.5 * r as f64 / span
        }))
        .unwrap(),
    ];
    let dt = 0.002;
    let mut passed = true;
    let mut details = Vec::new();
    for field in &fields {
        let cfg = SolverConfig::new(dt, grid);
        let traj = run_flow(&u0, dt, 50, field, &cfg).unwrap();
        let mut worst_increase = 0.0_f64;
        let mut energy_ok = true;
        for k in 0..50 {
            let increase = traj.energies[k + 1] - traj.energies[k];
            worst_increase = worst_increase.max(increase);
            energy_ok &= increase <= traj.step_gaps[k] / dt;
        }
        let m0 = u0.mean();
        let drift = traj
            .states
            .iter()
            .map(|s| (s.mean() - m0).abs())
            .fold(0.0, f64::max);
        let k = 17;
        let step = flow_step(&traj.states[k], dt, field, &cfg).unwrap();
        let mut direct_cfg = cfg.clone();
        direct_cfg.lambda = dt;
        let direct = solve_rof(&traj.states[k], field, &direct_cfg).unwrap();
        let bits = |img: &ScalarImage| img.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let exact = bits(step.state()) == bits(&direct.u)
            && bits(step.state()) == bits(&traj.states[k + 1]);
        passed &= energy_ok && drift <= 1e-10 && exact;
        details.push(format!(
            "{}: largest energy increase {worst_increase:.1e}, mean drift {drift:.1e}, one-step bit-exact {exact}",
            field.family().name()
        ));
    }
    outcome(passed, details.join("; "))
}

fn condition_checkers() -> Outcome {
    let grid = Grid::new(32, 32).unwrap();
    let cfg = ConditionConfig::default();
    let constant_p = check_log_holder(&ScalarImage::constant(grid, 1.7), &cfg);
    let jump_p = check_log_holder(
        &ScalarImage::from_fn(grid, |_, c| if c < 16 { 1.0 } else { 2.0 }),
        &cfg,
    );
    let constant_a = check_double_phase_holder(&ScalarImage::constant(grid, 0.3), 2.0, 2, &cfg);
    let jump_a = check_strong_holder_a(
        &ScalarImage::from_fn(grid, |_, c| if c < 16 { 0.0 } else { 1.0 }),
        2.0,
        2,
        &cfg,
    );
    let ok = constant_p.holds
        && constant_p.witness_constant == 0.0
        && !jump_p.holds
        && constant_a.holds
        && constant_a.witness_constant == 1.0
        && !jump_a.holds;
    outcome(
        ok,
        format!(
            "constant p: C={} holds={}; p jump: C={:.3} holds={}; constant a: C={} holds={}; a jump: witness={:.3e} holds={}",
            constant_p.witness_constant,
            constant_p.holds,
            jump_p.witness_constant,
            jump_p.holds,
            constant_a.witness_constant,
            constant_a.holds,
            jump_a.witness_constant,
            jump_a.holds
        ),
    )
}

fn reproducibility(first: &[(PhiFamily, SolveResult, CertificateReport, Duration)]) -> Outcome {
    let second = end_to_end_runs();
    let bits = |img: &ScalarImage| img.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut identical = 0;
    for ((fam, a, ra, _), (_, b, rb, _)) in first.iter().zip(&second) {
        let same_u = bits(&a.u) == bits(&b.u);
        let same_xi =
            a.xi.x()
                .iter()
                .zip(b.xi.x())
                .all(|(p, q)| p.to_bits() == q.to_bits())
                && a.xi
                    .y()
                    .iter()
                    .zip(b.xi.y())
                    .all(|(p, q)| p.to_bits() == q.to_bits());
        let same_cert = ra.to_json() == rb.to_json();
        let same_pgm = rofphi_core::io::encode_pgm(&a.u) == rofphi_core::io::encode_pgm(&b.u);
        if same_u && same_xi && same_cert && same_pgm {
            identical += 1;
        } else {
            eprintln!("{} differs between runs", fam.name());
        }
    }
    outcome(
        identical == first.len(),
        format!(
            "{identical}/{} families bit-identical across two runs",
            first.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        println!(
            "criterion {id:>2} [{}] {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };
    run(1, "conjugate correctness", &mut conjugate_correctness);
    run(2, "discrete Gauss-Green", &mut gauss_green);
    run(3, "pointwise Young inequality", &mut young_inequality);
    run(4, "quadratic oracle", &mut quadratic_oracle);
    run(5, "two-pixel oracle", &mut two_pixel);
    let e2e = end_to_end_runs();
    run(6, "end-to-end certification", &mut || end_to_end(&e2e));
    run(7, "truncation monotonicity", &mut truncation_monotone);
    run(8, "dual feasibility", &mut dual_feasibility);
    run(9, "flow properties", &mut flow_properties);
    run(10, "condition checkers", &mut condition_checkers);
    run(11, "reproducibility", &mut || reproducibility(&e2e));
    let failed: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
