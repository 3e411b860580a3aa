use jacobi_core::carleman::{ac_spectral_density, carleman_poly_asym};
use jacobi_core::coefficients::{check_essential_selfadjointness, classify, Regime};
use jacobi_core::solutions::{first_kind, growing_g, identity_thm_kappa, second_kind, wronskian, wronskian_constancy, SolutionSeq};
use jacobi_core::spectral::{
    finite_section_eigs_in, finite_section_weights, jost_bundle, jost_function, spectral_report, SpectralOptions,
};
use jacobi_core::volterra::{difference_residual, recurrence_residual, SolveOptions};
use jacobi_core::{CoefficientModel, Diagonal, OffDiagonal, Verdict};
use num_complex::Complex64;
use std::f64::consts::PI;

struct Line {
    id: u32,
    ok: bool,
    detail: String,
}

fn report(id: u32, ok: bool, detail: String) -> Line {
    Line { id, ok, detail }
}

fn regime(m: &CoefficientModel) -> Regime {
    classify(m, 64, 1e-6).unwrap()
}

fn criterion_1_jost_subcritical() -> Line {
    let m = CoefficientModel::n_squared();
    let r = regime(&m);
    let z = Complex64::new(1.0, 1.0);
    let opts = SolveOptions::new(1999, Some(2000), 1e-3);
    let b = jost_bundle(&m, &r, z, &opts).unwrap();
    let res = recurrence_residual(&m, &b).unwrap();
    let c = (1..=1000).map(|n| (b.u[n] - 1.0).norm() * 2.0 * n as f64 / z.norm()).fold(0.0, f64::max);
    report(1, res < 1e-12 && (0.5..=20.0).contains(&c), format!("residual {res:e}, fitted C {c:.4}"))
}

fn criterion_2_wronskians() -> Line {
    let m = CoefficientModel::n_squared();
    let r = regime(&m);
    let z = Complex64::new(1.0, 1.0);
    let p = first_kind(&m, z, 2001).unwrap();
    let q = second_kind(&m, z, 2001).unwrap();
    let w0 = (wronskian(&m, &p, &q, 0).unwrap() - 1.0).norm();
    let dev = wronskian_constancy(&m, &p, &q, 2000).unwrap();
    let opts = SolveOptions::new(2001, None, 1e-9);
    let f = SolutionSeq::from_jost(&jost_bundle(&m, &r, z, &opts).unwrap());
    let fc = SolutionSeq::from_jost(&jost_bundle(&m, &r, z.conj(), &opts).unwrap().conjugate());
    let expected = Complex64::new(0.0, 2.0 * r.root() / r.kappa_inf);
    let wff = wronskian(&m, &f, &fc, 2000).unwrap();
    let rel = (wff - expected).norm() / expected.norm();
    report(
        2,
        w0 < 1e-12 && dev < 1e-10 && rel < 1e-6,
        format!("|{{P,P~}} - 1| {w0:e}, constancy {dev:e}, {{f,f~}} rel {rel:e}"),
    )
}

fn criterion_3_identity() -> Line {
    let m = CoefficientModel::n_squared();
    let r = regime(&m);
    let rep = identity_thm_kappa(&m, &r, Complex64::new(0.0, 1.0), 500, &SolveOptions::new(600, None, 1e-9)).unwrap();
    report(
        3,
        rep.rel_gap < 1e-2 && rep.kappa_z < rep.kappa_zbar,
        format!("rel gap {:.3e}, kappa(i) {:.6} < kappa(-i) {:.6}", rep.rel_gap, rep.kappa_z, rep.kappa_zbar),
    )
}

fn criterion_4_eigenvalue_oracle() -> Line {
    let m = CoefficientModel::geometric_beta(-1.1);
    let so = SpectralOptions {
        interval: (-2.0, 20.0),
        grid_step: 0.05,
        root_tol: 1e-14,
        n_series: 200,
        oracle_start: 60,
        oracle_bits: None,
        match_tol: 1e-6,
        solve: SolveOptions::new(8, None, 1e-12),
    };
    let rep = spectral_report(&m, &so).unwrap();
    let five = rep.eigenvalues.len() >= 5;
    let matched = rep.eigenvalues.iter().zip(&rep.oracle.gaps).all(|(l, g)| *g <= 1e-6 * l.abs().max(1.0));
    let mass_gap = rep.masses.iter().map(|m| m.rel_gap).fold(0.0, f64::max);
    let positive = rep.masses.iter().all(|m| m.series > 0.0 && m.jost > 0.0);
    let ok = five
        && matched
        && rep.oracle.unmatched.is_empty()
        && mass_gap < 1e-4
        && positive
        && rep.mass_total_series <= 1.0 + 1e-6
        && rep.verdict == Verdict::EssentiallySelfAdjoint;
    report(
        4,
        ok,
        format!(
            "roots {:?}, oracle N {}, max gap {:e}, mass rel gap {mass_gap:e}, total mass {:.9}",
            rep.eigenvalues,
            rep.oracle.n,
            rep.oracle.gaps.iter().cloned().fold(0.0, f64::max),
            rep.mass_total_series
        ),
    )
}

fn criterion_5_growing_solution() -> Line {
    let m = CoefficientModel::geometric_beta(-1.1);
    let r = regime(&m);
    let z = Complex64::new(0.0, 1.0);
    let b = jost_bundle(&m, &r, z, &SolveOptions::new(320, None, 1e-12)).unwrap();
    let (g, _) = growing_g(&m, &b, 320).unwrap();
    let f = SolutionSeq::from_jost(&b);
    let s = r.sign_inf();
    let limit = s * r.kappa_inf / (2.0 * r.root());
    let want = -(2f64.sqrt()) / (2.0 * 0.21f64.sqrt());
    let n = 300i64;
    let sgn = if n % 2 == 0 { 1.0 } else { s };
    let v = g.get(n).scale_ln(0.5 * m.ln_a(n).unwrap() - b.table.phase[n as usize]).to_complex() * sgn;
    let err = (v - limit).norm();
    let w = (wronskian(&m, &f, &g, 100).unwrap() - 1.0).norm();
    report(
        5,
        (limit - want).abs() < 1e-12 && err < 1e-3 && w < 1e-8,
        format!("value at n=300 {v:.8}, limit {limit:.8}, |{{f,g}} - 1| {w:e}"),
    )
}

fn criterion_6_polynomial_asymptotics() -> Line {
    let m = CoefficientModel::geometric_beta(-1.1);
    let r = regime(&m);
    let z = Complex64::new(0.0, 1.0);
    let b = jost_bundle(&m, &r, z, &SolveOptions::new(401, None, 1e-12)).unwrap();
    let omega = jost_function(&m, &r, z, &SolveOptions::new(2, None, 1e-12)).unwrap().omega;
    let want = r.kappa_inf * omega.norm() / (2.0 * r.root());
    let p = first_kind(&m, z, 401).unwrap();
    let mut worst = 0.0f64;
    for n in 200..=400i64 {
        let v = p.get(n).scale_ln(0.5 * m.ln_a(n).unwrap() - b.table.phase[n as usize]).ln_abs.exp();
        worst = worst.max((v - want).abs() / want);
    }
    report(6, worst < 1e-3, format!("prefactor {want:.10}, max relative deviation on [200, 400] {worst:e}"))
}

fn criterion_7_classifier_table() -> Line {
    let cases = [
        (CoefficientModel::n_squared(), Verdict::DeficiencyOneOne),
        (CoefficientModel::geometric_beta(1.1), Verdict::EssentiallySelfAdjoint),
        (CoefficientModel::geometric_beta(-1.1), Verdict::EssentiallySelfAdjoint),
        (
            CoefficientModel::family(
                "two-to-n-squared",
                OffDiagonal::Stretched { gamma: 1.0, x: 2.0, q: 2.0 },
                Diagonal::ConstBeta { beta: 2.0 },
            )
            .unwrap(),
            Verdict::DeficiencyOneOne,
        ),
        (CoefficientModel::hermite(), Verdict::EssentiallySelfAdjoint),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (m, want) in &cases {
        let r = regime(m);
        let v = check_essential_selfadjointness(m, &r, 200).unwrap().verdict;
        ok &= v == *want;
        lines.push(format!("{}: {:?}/{:?}", m.name, r.kind, v));
    }
    report(7, ok, lines.join("; "))
}

fn criterion_8_carleman() -> Line {
    let m = CoefficientModel::hermite();
    let r = regime(&m);
    let opts = SolveOptions::new(64, Some(1 << 16), 1e-2);
    let b = jost_bundle(&m, &r, Complex64::new(0.5, 0.0), &opts).unwrap();
    let res = recurrence_residual(&m, &b).unwrap();
    let asym = carleman_poly_asym(&m, &r, 0.0, 4096, &SolveOptions::new(64, Some(1 << 20), 1e-2)).unwrap();

    let width = 0.1;
    let edges: Vec<f64> = (0..=60).map(|i| -3.0 + width * i as f64).collect();
    let mut grid = Vec::new();
    for w in edges.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(3.0);
    let dens = ac_spectral_density(&m, &r, &grid, &opts).unwrap();
    let n_sec = 4000;
    let nodes = finite_section_eigs_in(&m, n_sec, -3.5, 3.5, Some(53)).unwrap();
    let weights = finite_section_weights(&m, n_sec, &nodes).unwrap();
    let below = finite_section_weights(&m, n_sec, &finite_section_eigs_in(&m, n_sec, -40.0, -3.5, Some(53)).unwrap())
        .unwrap()
        .iter()
        .sum::<f64>();
    // CDF of the discrete measure at its nodes (half the jump), linear in between
    let mut cdf = Vec::with_capacity(nodes.len());
    let mut acc = below;
    for w in &weights {
        cdf.push(acc + 0.5 * w);
        acc += w;
    }
    let cdf_at = |x: f64| -> f64 {
        let i = nodes.partition_point(|&v| v < x);
        let (x0, x1) = (nodes[i - 1], nodes[i]);
        cdf[i - 1] + (cdf[i] - cdf[i - 1]) * (x - x0) / (x1 - x0)
    };
    let mut worst = 0.0f64;
    for (k, w) in edges.windows(2).enumerate() {
        let hist = (cdf_at(w[1]) - cdf_at(w[0])) / width;
        let p = &dens.points[2 * k..2 * k + 3];
        let avg = (p[0].density + 4.0 * p[1].density + p[2].density) / 6.0;
        worst = worst.max((avg - hist).abs() / hist);
    }
    let exact = dens.points.iter().map(|p| (p.density * PI.sqrt() * (p.lambda * p.lambda).exp() - 1.0).abs()).fold(0.0, f64::max);
    report(
        8,
        res < 1e-10 && asym.decreasing && dens.all_positive && worst < 0.05,
        format!(
            "residual {res:e}, sine-model sups {:?}, density vs histogram max rel {worst:e} (vs exp(-x^2)/sqrt(pi): {exact:e})",
            asym.dyadic.iter().map(|d| format!("{}:{:.2e}", d.0, d.1)).collect::<Vec<_>>()
        ),
    )
}

fn criterion_9_kernel_sign() -> Line {
    let tol = 1e-6;
    let zs = [Complex64::new(0.3, 0.0), Complex64::new(1.0, 1.0), Complex64::new(-0.5, -2.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    let mut solved = 0;
    for m in CoefficientModel::builtin() {
        let r = regime(&m);
        let n_trunc = if r.carleman() { Some(1 << 18) } else { None };
        let mut worst = 0.0f64;
        let mut refused = None;
        for z in zs {
            match jost_bundle(&m, &r, z, &SolveOptions::new(200, n_trunc, tol)) {
                Ok(b) => {
                    worst = worst.max(difference_residual(&b));
                    solved += 1;
                }
                Err(e) => refused = Some(e.to_string()),
            }
        }
        ok &= worst < 10.0 * tol;
        lines.push(match refused {
            Some(e) => format!("{}: refused ({e})", m.name),
            None => format!("{}: {worst:.1e}", m.name),
        });
    }
    report(9, ok && solved >= 18, lines.join("; "))
}

fn main() {
    let criteria: [fn() -> Line; 9] = [
        criterion_1_jost_subcritical,
        criterion_2_wronskians,
        criterion_3_identity,
        criterion_4_eigenvalue_oracle,
        criterion_5_growing_solution,
        criterion_6_polynomial_asymptotics,
        criterion_7_classifier_table,
        criterion_8_carleman,
        criterion_9_kernel_sign,
    ];
    let mut failed = 0;
    for (k, run) in criteria.into_iter().enumerate() {
        let line = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Line { id: k as u32 + 1, ok: false, detail: format!("panicked: {msg}") }
        });
        println!("criterion {}: {} {}", line.id, if line.ok { "PASS" } else { "FAIL" }, line.detail);
        failed += usize::from(!line.ok);
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
