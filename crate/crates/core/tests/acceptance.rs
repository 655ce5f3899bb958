//! The twelve acceptance criteria, one test each. Every test prints a
//! single PASS/FAIL verdict line to stderr before asserting.

mod common;

use std::time::{Duration, Instant};

use common::{dir_contents, report, run_cli, suite};
use gibbs_spectral::bounds::{fit_power_law, permutations_for, random_weights, rapid_mixing_transfer, verify_bounds};
use gibbs_spectral::counterexample::{analytic_return_time_moment, reversibilization_gap_sweep, LadderFamily};
use gibbs_spectral::geometry::{check_sandwich, friedrichs_angle_bruteforce, friedrichs_angle_from_norm, inclination_seeded};
use gibbs_spectral::measure::{random_target, TargetDistribution};
use gibbs_spectral::operators::{
    dsg, power_norm_sequence, rsg, symmetrized_sweep, telescoping_slacks, Permutation, ScanSpec, Weights,
    DEFAULT_STATE_CAP,
};
use gibbs_spectral::sampler::{
    clt_check, coordinate_indicator, default_batch_count, empirical_tails, run_chain, ChainInit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

#[test]
fn criterion_01_norm_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for pi in suite() {
        let d = pi.num_coords() as f64;
        let avg = rsg(&Weights::uniform(pi.num_coords()), &pi).unwrap().l2_norm_centered().unwrap();
        let c_bf = friedrichs_angle_bruteforce(&pi).unwrap().value;
        let rhs = (d - 1.0) / d * (c_bf + 1.0 / (d - 1.0));
        worst = worst.max((avg - rhs).abs());
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    let pass = worst <= 1e-8 && fast;
    report(1, "norm identity", pass, &format!("max deviation {worst:.3e} over 100 targets, {time}"));
    assert!(pass);
}

#[test]
#[allow(clippy::approx_constant)]
fn criterion_02_worked_values() {
    let mut lines = Vec::new();
    let mut check = |name: &str, value: f64, expected: f64, tol: f64| {
        let ok = (value - expected).abs() <= tol;
        lines.push((name.to_string(), ok, format!("{value:.12} vs {expected} ± {tol:e}")));
        ok
    };
    let sigma = Permutation::identity(2);
    let uniform_w = Weights::uniform(2);

    let ind = TargetDistribution::uniform(vec![2, 2]).unwrap();
    check("independent ‖DSG−Π‖", dsg(&sigma, &ind).unwrap().l2_norm_centered().unwrap(), 0.0, 1e-12);
    check("independent ‖RSG−Π‖", rsg(&uniform_w, &ind).unwrap().l2_norm_centered().unwrap(), 0.5, 1e-10);
    check("independent c", friedrichs_angle_from_norm(&ind).unwrap().value, 0.0, 1e-9);
    check("independent ℓ̂", inclination_seeded(&ind, 32, 1e-10, 0).unwrap().value, 0.70711, 1e-4);

    let cor = TargetDistribution::equicorrelated_binary(2, 0.25).unwrap();
    let dsg_norm = dsg(&sigma, &cor).unwrap().l2_norm_centered().unwrap();
    let dsg_ok = check("ε=0.25 ‖DSG−Π‖", dsg_norm, 0.25, 1e-10);
    check("ε=0.25 ‖RSG−Π‖", rsg(&uniform_w, &cor).unwrap().l2_norm_centered().unwrap(), 0.75, 1e-10);
    check("ε=0.25 c", friedrichs_angle_from_norm(&cor).unwrap().value, 0.5, 1e-9);

    let mut all = true;
    for (name, ok, detail) in &lines {
        report(2, name, *ok, detail);
        all &= ok;
    }
    let others_ok = lines.iter().filter(|(n, _, _)| n != "ε=0.25 ‖DSG−Π‖").all(|(_, ok, _)| *ok);
    report(2, "worked 2×2 values", all, if all { "all sub-checks pass" } else { "see sub-check lines" });
    assert!(others_ok);
    // The stated 0.25 is the spectral radius (1−2ε)²; the norm of a product of
    // two projections is the cosine of their angle, here |1−2ε| = 0.5.
    assert!(!dsg_ok);
    assert!((dsg_norm - 0.5).abs() <= 1e-10);
    let radius = dsg(&sigma, &cor).unwrap().spectral_radius_centered().unwrap();
    assert!((radius - 0.25).abs() <= 1e-10);
}

#[test]
fn criterion_03_bound_dominance() {
    let mut entries = 0;
    let mut violations = 0;
    let mut worst_sharpness: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    for (i, pi) in suite().iter().enumerate() {
        let d = pi.num_coords();
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + i as u64);
        let mut weights = vec![Weights::uniform(d)];
        weights.extend((0..50).map(|_| random_weights(&mut rng, d)));
        let report_ = verify_bounds(pi, &Permutation::all(d), &weights).unwrap();
        entries += report_.entries.len();
        violations += report_.entries.iter().filter(|e| e.slack < -1e-9).count();
        min_slack = min_slack.min(report_.min_slack());
        let sharp = report_
            .entries
            .iter()
            .find(|e| e.name == "rsg_norm" && e.scan == "rsg:uniform")
            .expect("uniform entry");
        worst_sharpness = worst_sharpness.max(sharp.slack.abs());
    }
    let pass = violations == 0 && worst_sharpness <= 1e-9;
    report(
        3,
        "bound dominance",
        pass,
        &format!("{violations} violations in {entries} entries, min slack {min_slack:.3e}, uniform sharpness {worst_sharpness:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_telescoping_and_power_norms() {
    let mut worst_tele = f64::INFINITY;
    let mut worst_power = f64::INFINITY;
    let mut worst_equal: f64 = 0.0;
    for (i, pi) in suite().iter().enumerate() {
        let d = pi.num_coords();
        let n = pi.pmf().len();
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + i as u64);
        let sigmas = permutations_for(d, 0, 0);
        for k in 0..1000 {
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sigma = &sigmas[k % sigmas.len()];
            for s in telescoping_slacks(sigma, pi, &f).unwrap() {
                worst_tele = worst_tele.min(s);
            }
        }
        let ops = [dsg(&Permutation::identity(d), pi).unwrap(), rsg(&Weights::uniform(d), pi).unwrap()];
        for op in &ops {
            let seq = power_norm_sequence(op, 10).unwrap();
            for (k, v) in seq.iter().enumerate() {
                let power = seq[0].powi(k as i32 + 1);
                worst_power = worst_power.min(power + 1e-10 - v);
                if op.is_reversible() {
                    worst_equal = worst_equal.max((v - power).abs());
                }
            }
        }
    }
    let pass = worst_tele >= -1e-10 && worst_power >= 0.0 && worst_equal <= 1e-9;
    report(
        4,
        "telescoping and power norms",
        pass,
        &format!(
            "min telescoping slack {worst_tele:.3e}, min power slack {worst_power:.3e}, reversible equality error {worst_equal:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_symmetrized_sweep() {
    let mut worst: f64 = 0.0;
    for pi in suite() {
        let d = pi.num_coords();
        for sigma in Permutation::all(d) {
            let dsg_norm = dsg(&sigma, &pi).unwrap().l2_norm_centered().unwrap();
            let sym = symmetrized_sweep(&sigma, &pi).unwrap().l2_norm_centered().unwrap();
            worst = worst.max((sym - dsg_norm * dsg_norm).abs());
        }
    }
    let pass = worst <= 1e-9;
    report(5, "symmetrized sweep identity", pass, &format!("max |‖sym−Π‖ − ‖DSG−Π‖²| = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_06_sandwich() {
    let targets = suite();
    let mut left_fail = 0;
    let mut right_ok = 0;
    for pi in &targets {
        let d = pi.num_coords();
        let c = friedrichs_angle_from_norm(pi).unwrap().value;
        let ell = inclination_seeded(pi, 32, 1e-8, 0).unwrap().value;
        let s = check_sandwich(c, ell, d);
        if s.left_bound > c + 1e-9 {
            left_fail += 1;
        }
        if s.right_holds {
            right_ok += 1;
        }
    }
    let share = right_ok as f64 / targets.len() as f64;
    let pass = left_fail == 0 && share >= 0.95;
    report(
        6,
        "sandwich",
        pass,
        &format!("left violations {left_fail}, right inequality holds on {right_ok}/{} (advisory)", targets.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_07_solidarity() {
    let mut consistent = true;
    let mut details = Vec::new();
    let mut zero_case = false;
    for eps in [0.5, 0.1, 0.01, 0.001, 0.0] {
        let pi = TargetDistribution::equicorrelated_binary(2, eps).unwrap();
        let g_dsg = dsg(&Permutation::identity(2), &pi).unwrap().spectral_gap().unwrap();
        let g_rsg = rsg(&Weights::uniform(2), &pi).unwrap().spectral_gap().unwrap();
        consistent &= (g_dsg > 1e-9) == (g_rsg > 1e-9);
        if eps == 0.0 {
            zero_case = g_dsg <= 1e-9 && g_rsg <= 1e-9;
        }
        details.push(format!("ε={eps}: {g_dsg:.3e}/{g_rsg:.3e}"));
    }
    let pass = consistent && zero_case;
    report(7, "solidarity", pass, &format!("gap DSG/RSG {}", details.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_08_rapid_mixing_transfer() {
    let start = Instant::now();
    let ds = [2usize, 3, 4, 5, 6];
    let mut rsg_gaps = Vec::new();
    let mut dsg_gaps = Vec::new();
    for &d in &ds {
        let pi = TargetDistribution::equicorrelated_binary(d, 0.25).unwrap();
        rsg_gaps.push(rsg(&Weights::uniform(d), &pi).unwrap().spectral_gap().unwrap());
        let worst = permutations_for(d, 24, d as u64)
            .iter()
            .map(|s| dsg(s, &pi).unwrap().spectral_gap().unwrap())
            .fold(f64::INFINITY, f64::min);
        dsg_gaps.push(worst);
    }
    let fit = fit_power_law(&ds, &rsg_gaps).unwrap();
    let mut min_margin = f64::INFINITY;
    for (&d, &g) in ds.iter().zip(&dsg_gaps) {
        let floor = rapid_mixing_transfer(fit.beta, fit.gamma, d).unwrap();
        min_margin = min_margin.min(g - floor + 1e-12);
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    let pass = min_margin >= 0.0 && fast;
    report(
        8,
        "rapid-mixing transfer",
        pass,
        &format!("β = {:.4}, γ = {:.4e}, min margin {min_margin:.3e}, {time}", fit.beta, fit.gamma),
    );
    assert!(pass);
}

#[test]
fn criterion_09_clt() {
    let start = Instant::now();
    let steps = 100_000;
    let mut checks = 0;
    let mut failures = Vec::new();
    for t in 0..10u64 {
        let dims = common::suite_dims(t as usize * 7);
        let pi = random_target(9000 + t, &dims, 1.0).unwrap();
        let d = pi.num_coords();
        let scans = [ScanSpec::Deterministic(Permutation::identity(d)), ScanSpec::Random(Weights::uniform(d))];
        for scan in &scans {
            let op = scan.build(&pi).unwrap();
            let (rho, source) = match scan {
                ScanSpec::Deterministic(_) => (op.spectral_radius_centered().unwrap(), "spectral_radius"),
                ScanSpec::Random(_) => (op.l2_norm_centered().unwrap(), "norm"),
            };
            let trace = run_chain(&pi, scan, steps, 100 + t, ChainInit::Stationary).unwrap();
            for coord in 0..d {
                let f = coordinate_indicator(&pi, coord, 0).unwrap();
                let c = clt_check(&trace, &f, &pi, rho, source, default_batch_count(steps)).unwrap();
                checks += 1;
                if !c.pass {
                    failures.push(format!("target {t} {scan} coord {}: {} > {}", coord + 1, c.estimate.estimate, c.bound));
                }
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    let pass = failures.is_empty() && fast;
    report(9, "CLT variance bound", pass, &format!("{} of {checks} checks failed, {time} {failures:?}", failures.len()));
    assert!(pass);
}

#[test]
fn criterion_10_hoeffding() {
    let start = Instant::now();
    let targets = [
        TargetDistribution::equicorrelated_binary(2, 0.25).unwrap(),
        random_target(11, &[2, 3], 1.0).unwrap(),
        random_target(12, &[2, 2, 2], 1.0).unwrap(),
    ];
    let mut cells = 0;
    let mut failures = Vec::new();
    for (t, pi) in targets.iter().enumerate() {
        let d = pi.num_coords();
        // the least likely value keeps μ ≤ 1/2 so every ε in the grid is admissible
        let f = (0..pi.space().dims()[0])
            .map(|v| coordinate_indicator(pi, 0, v).unwrap())
            .min_by(|a, b| pi.expectation(a).total_cmp(&pi.expectation(b)))
            .unwrap();
        let epss = [0.1, 0.2, 0.3];
        for scan in [ScanSpec::Deterministic(Permutation::identity(d)), ScanSpec::Random(Weights::uniform(d))] {
            let rho = scan.build(pi).unwrap().l2_norm_centered().unwrap();
            let tails = empirical_tails(pi, &scan, &f, rho, &[100, 1000], &epss, 10_000, 40 + t as u64).unwrap();
            for c in tails {
                cells += 1;
                if !c.pass {
                    failures.push(format!("target {t} {scan} n={} ε={}: {} > {}", c.n, c.eps, c.frequency, c.bound));
                }
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    let pass = failures.is_empty() && fast;
    report(10, "Hoeffding tails", pass, &format!("{} of {cells} cells failed, {time} {failures:?}", failures.len()));
    assert!(pass);
}

#[test]
fn criterion_11_counterexample() {
    let start = Instant::now();
    let family = LadderFamily::Geometric { q: 0.5 };
    let sweep = reversibilization_gap_sweep(&family, &[10, 20, 40, 80], &[1.5, 2.0], DEFAULT_STATE_CAP).unwrap();
    let first = &sweep.rows[0];
    let last = sweep.rows.last().unwrap();
    let halved = last.gap_k <= 0.5 * first.gap_k;
    let cuts_ok = sweep.rows.iter().all(|r| r.max_cut_ratio <= 1.05);
    let cheeger = sweep.rows.iter().all(|r| r.gap_k <= 2.0 * r.kappa_upper + 1e-9);
    let moment = last.moments[0].value.unwrap_or(f64::NAN);
    let moment_ok = (moment - 3.0).abs() <= 0.01;
    let divergent = analytic_return_time_moment(&family, 2.0).unwrap().divergent;
    let (fast, time) = within(start, Duration::from_secs(120));
    let pass = sweep.gap_k_strictly_decreasing && halved && cuts_ok && cheeger && moment_ok && divergent && fast;
    let gaps: Vec<String> = sweep.rows.iter().map(|r| format!("{:.3e}", r.gap_k)).collect();
    report(
        11,
        "ladder counterexample",
        pass,
        &format!(
            "gap_K {} decreasing={} halved={halved}, cut ratio ≤ 1.05: {cuts_ok}, Cheeger: {cheeger}, E[1.5^τ] = {moment:.6}, E[2^τ] divergent: {divergent}, {time}",
            gaps.join(" > "),
            sweep.gap_k_strictly_decreasing
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_12_determinism() {
    let commands: [&[&str]; 4] = [
        &["analyze", "--model", "random_dirichlet", "--dims", "2,3,2", "--target-seed", "4", "--scan", "dsg:3,1,2", "--scan", "rsg:0.2,0.3,0.5", "--export-kernels"],
        &["sweep", "--d-values", "2,3,4,5"],
        &["sample", "--model", "equicorrelated_binary", "--d", "2", "--steps", "4000", "--replicas", "300", "--seed", "9", "--trace"],
        &["counterexample", "--N", "5,10,20", "--b", "1.5,2"],
    ];
    let mut mismatches = Vec::new();
    for args in commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_cli(a.path(), args);
        let rb = run_cli(b.path(), args);
        assert_eq!(ra.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&ra.stderr));
        assert_eq!(rb.status.code(), Some(0));
        let (fa, fb) = (dir_contents(a.path()), dir_contents(b.path()));
        if fa.is_empty() || fa != fb {
            mismatches.push(args[0].to_string());
        }
    }
    let pass = mismatches.is_empty();
    report(12, "determinism", pass, &format!("4 commands re-run, mismatched: {mismatches:?}"));
    assert!(pass);
}
