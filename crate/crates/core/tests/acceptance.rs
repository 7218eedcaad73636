//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Monte Carlo criteria use seed 1 and the harness verdict rule
//! (3 standard errors, optional grid tolerance, one 4N rerun).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use isogeom::closedform::{expected_excursion_volume, expected_leray, functional_integral, moment_formula};
use isogeom::harness::{
    run_bounds, run_selftest, simulate, ComparisonReport, ExperimentConfig, Quantity, Report, Runner, Spectrum, Verdict,
};
use isogeom::manifold::{make_circle_space, make_sphere_space, make_torus_space, EigenspaceSpec};
use isogeom::sampling::Law;

const SEED: u64 = 1;

struct Gate {
    runner: Runner,
    failed: usize,
}

impl Gate {
    fn criterion(&mut self, id: &str, title: &str, limit: Duration, body: impl FnOnce(&Runner, &mut Vec<String>) -> bool) {
        let start = Instant::now();
        let mut notes = Vec::new();
        let ok = body(&self.runner, &mut notes);
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = ok && in_time;
        self.failed += usize::from(!pass);
        println!(
            "{} criterion {id}: {title} ({:.1}s, limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
        for n in notes {
            println!("      {n}");
        }
    }
}

fn describe(r: &ComparisonReport) -> String {
    format!(
        "{} {:<14} t={:<5} N={:<6} mean={:.6} se={:.2e} closed_form={:.6} z={} tol={:.2e}{}",
        match r.verdict {
            Verdict::Pass => "ok  ",
            Verdict::Fail => "FAIL",
        },
        r.quantity.to_string(),
        r.t_scaled.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        r.estimate.n,
        r.estimate.mean,
        r.estimate.stderr,
        r.closed_form.value,
        r.z_score.map(|z| format!("{z:+.2}")).unwrap_or_else(|| "n/a".into()),
        r.tolerance,
        if r.retried { " (4N rerun)" } else { "" }
    )
}

/// Runs the experiment and checks every row against `expected` closed-form
/// values (relative 1e-12) and the verdict rule.
fn run(runner: &Runner, cfg: ExperimentConfig, expected: &[f64], notes: &mut Vec<String>) -> bool {
    let report: Report = match simulate(&cfg.with_seed(SEED), runner) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("error: {e}"));
            return false;
        }
    };
    let mut ok = true;
    for (r, want) in report.rows.iter().zip(expected) {
        notes.push(describe(r));
        if (r.closed_form.value - want).abs() > 1e-12 * want.abs() {
            notes.push(format!("closed form {} differs from the expected value {want}", r.closed_form.value));
            ok = false;
        }
        ok &= r.verdict == Verdict::Pass;
    }
    ok && report.rows.len() == expected.len()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Max relative error of the finite-difference derivative of the mean
/// excursion volume against the mean Leray measure on |t| ≤ 0.9. For t < 0
/// the complement V(-t) = ϖ - V(t) is differenced instead of V(t).
fn derivative_identity(spec: &EigenspaceSpec) -> f64 {
    let h = 1e-6;
    let v = |t: f64| expected_excursion_volume(spec, t).value;
    let mut worst = 0.0f64;
    for k in -18..=18 {
        let t = 0.05 * k as f64;
        let fd = if t < 0.0 {
            (v(-(t + h)) - v(-(t - h))) / (2.0 * h)
        } else {
            (v(t - h) - v(t + h)) / (2.0 * h)
        } / spec.c();
        worst = worst.max(rel(fd, expected_leray(spec, t).unwrap().value));
    }
    worst
}

fn main() -> ExitCode {
    let mut gate = Gate {
        runner: Runner::new(0).expect("thread pool"),
        failed: 0,
    };
    let min = |m: u64| Duration::from_secs(60 * m);

    gate.criterion("1", "zero counts on the circle", min(1), |runner, notes| {
        let mut ok = true;
        for n in [1u32, 5, 20] {
            let mean_sq = (1..=n).map(|k| f64::from(k * k)).sum::<f64>() / f64::from(n);
            let cfg = ExperimentConfig::new(Spectrum::Circle((1..=n).collect()))
                .with_quantity(Quantity::Zeros)
                .with_levels(&[0.0])
                .with_samples(2000);
            ok &= run(runner, cfg, &[2.0 * mean_sq.sqrt()], notes);
        }
        ok
    });

    gate.criterion("2", "L1 moment on the circle", min(1), |runner, notes| {
        let want = 2.0 * 2f64.sqrt() / PI;
        let formula = moment_formula(1.0, 1).unwrap();
        notes.push(format!("moment formula E(1,1) = {formula:.16}, |diff| = {:.1e}", (formula - want).abs()));
        let cfg = ExperimentConfig::new(Spectrum::Circle(vec![1]))
            .with_quantity(Quantity::IntAbsPow { a: 1.0 })
            .with_samples(10_000);
        (formula - want).abs() <= 1e-14 && run(runner, cfg, &[want], notes)
    });

    gate.criterion("3a", "nodal length on the torus", min(10), |runner, notes| {
        let (varpi, d, s) = (4.0 * PI * PI, 3.0, 0.5f64.sqrt());
        // ϖ (ϖ₁/ϖ₂) s (1-t²)^{(d-1)/2} with ϖ₁/ϖ₂ = 1/2
        let want: Vec<f64> = [0.0, 0.5].iter().map(|t: &f64| varpi * 0.5 * s * (1.0 - t * t).powf(0.5 * (d - 1.0))).collect();
        let cfg = ExperimentConfig::new(Spectrum::Torus(vec![[1, 0]]))
            .with_quantity(Quantity::LevelMeasure)
            .with_levels(&[0.0, 0.5])
            .with_samples(10_000)
            .with_resolution(256)
            .with_grid_tolerance(0.01);
        run(runner, cfg, &want, notes)
    });

    gate.criterion("3b", "nodal length on the sphere", min(10), |runner, notes| {
        let cfg = ExperimentConfig::new(Spectrum::Sphere(vec![4]))
            .with_quantity(Quantity::LevelMeasure)
            .with_levels(&[0.0])
            .with_samples(3000)
            .with_resolution(256)
            .with_grid_tolerance(0.01);
        run(runner, cfg, &[2.0 * PI * 10f64.sqrt()], notes)
    });

    gate.criterion("4", "excursion volume on the sphere", min(5), |runner, notes| {
        // ϖ κ₂(t)/ϖ₂ = 2π(1 - t)
        let cfg = ExperimentConfig::new(Spectrum::Sphere(vec![1]))
            .with_quantity(Quantity::Excursion)
            .with_levels(&[-0.5, 0.0, 0.5])
            .with_samples(10_000);
        run(runner, cfg, &[3.0 * PI, 2.0 * PI, PI], notes)
    });

    gate.criterion("5", "Leray measure, both estimators, two laws", min(10), |runner, notes| {
        let varpi = 4.0 * PI * PI;
        let mut ok = true;
        for q in [Quantity::LerayShell, Quantity::LerayCoarea] {
            for (law, want) in [(Law::UniformSphere, 4.0 * PI), (Law::GaussianNormalized, varpi / (2.0 * PI).sqrt())] {
                let cfg = ExperimentConfig::new(Spectrum::Torus(vec![[1, 0]]))
                    .with_quantity(q)
                    .with_law(law)
                    .with_levels(&[0.0])
                    .with_samples(10_000)
                    .with_resolution(256)
                    .with_grid_tolerance(0.015);
                ok &= run(runner, cfg, &[want], notes);
            }
        }
        ok
    });

    gate.criterion("6a", "common zeros on the torus", min(10), |runner, notes| {
        let cfg = ExperimentConfig::new(Spectrum::Torus(vec![[1, 0]]))
            .with_quantity(Quantity::CommonZeros)
            .with_levels(&[0.0])
            .with_samples(10_000)
            .with_resolution(256);
        run(runner, cfg, &[PI], notes)
    });

    gate.criterion("6b", "common zeros on the sphere", min(10), |runner, notes| {
        let cfg = ExperimentConfig::new(Spectrum::Sphere(vec![1]))
            .with_quantity(Quantity::CommonZeros)
            .with_levels(&[0.0])
            .with_samples(10_000)
            .with_resolution(256);
        run(runner, cfg, &[2.0], notes)
    });

    gate.criterion("7", "functional quadrature reproduces the moment formula", Duration::from_secs(1), |_, notes| {
        let mut worst = 0.0f64;
        for a in [0.5, 1.0, 3.0, 6.0] {
            for d in [1u32, 2, 5, 20, 100] {
                let c = f64::from(d + 1).sqrt();
                let q = functional_integral(d, c, |x| x.abs().powf(a)).unwrap();
                worst = worst.max(rel(q, moment_formula(a, d).unwrap()));
            }
        }
        notes.push(format!("max relative error {worst:.2e} (tolerance 1e-10)"));
        worst <= 1e-10
    });

    gate.criterion("8", "norm bounds on all three manifolds", min(10), |runner, notes| {
        let mut ok = true;
        for spectrum in [Spectrum::Circle((1..=5).collect()), Spectrum::Torus(vec![[1, 0], [1, 1]]), Spectrum::Sphere(vec![4])] {
            let cfg = ExperimentConfig::new(spectrum.clone()).with_samples(5000).with_seed(SEED);
            let rep = match run_bounds(&cfg, runner) {
                Ok(r) => r,
                Err(e) => {
                    notes.push(format!("{spectrum:?}: error {e}"));
                    ok = false;
                    continue;
                }
            };
            for r in rep.lp.iter().filter(|r| [2.0, 4.0, 8.0].contains(&r.a)) {
                notes.push(format!(
                    "{:?} a={} mean={:.6} bound={:.6} margin={:.4}",
                    spectrum, r.a, r.estimate.mean, r.bounds.universal, r.margin
                ));
                ok &= r.holds;
            }
            for r in &rep.inkkr {
                notes.push(format!(
                    "{:?} sup inequality a={} r={:.4}: {} violations in {}, worst ratio {:.4}",
                    spectrum, r.a, r.r, r.violations, r.samples, r.worst_ratio
                ));
                ok &= r.violations == 0;
            }
            ok &= rep.gamma.holds;
        }
        let g = isogeom::harness::bounds::gamma_inequality_check();
        notes.push(format!(
            "gamma ratio inequality on {} points: margins {:.3e}, {:.3e}",
            g.points, g.upper_margin, g.lower_margin
        ));
        ok && g.holds
    });

    gate.criterion("9", "excursion derivative equals the Leray measure", Duration::from_secs(1), |_, notes| {
        let specs = [
            ("d=2", make_sphere_space(&[1]).unwrap()),
            ("d=3", make_torus_space(&[[1, 0]]).unwrap()),
            ("d=5", make_circle_space(&[1, 2, 3]).unwrap()),
            ("d=20", make_sphere_space(&[2, 3, 4]).unwrap()),
        ];
        let mut ok = true;
        for (name, spec) in &specs {
            let worst = derivative_identity(spec);
            notes.push(format!("{name}: max relative error {worst:.2e} (tolerance 1e-7)"));
            ok &= worst <= 1e-7;
        }
        ok
    });

    gate.criterion("10", "property suites", min(5), |_, notes| {
        let rep = run_selftest();
        for s in &rep.suites {
            for c in &s.checks {
                notes.push(format!("{} {}/{}: {}", if c.passed { "ok  " } else { "FAIL" }, s.name, c.name, c.detail));
            }
        }
        rep.passed()
    });

    println!("{} criteria failed", gate.failed);
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
