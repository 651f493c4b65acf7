//! Acceptance suite. One test per criterion; each prints a single
//! `[PASS]` / `[FAIL]` line (run with `--nocapture` to see them) and then
//! asserts. All seeds are fixed at 42.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use lattes::bloch::{
    apply_ml, compose_ml, find_mixed_cycles, inverse_ml, jacobian_at, BlochVector, Branch,
};
use lattes::cli::published_bloch_deviations;
use lattes::experiments::{
    backward_outcomes, histogram_to_table, run_backward, run_forward, sample_ball_uniform,
    sample_rng, with_workers, BackwardExperimentConfig, BranchPolicy, ForwardExperimentConfig,
    OutputFormat, PAPER_SCALE_SAMPLES,
};
use lattes::oracle::oracle_sweep;
use lattes::riemann::{compose_fl, find_pure_cycles, ExtendedComplex};
use lattes::Stability;
use nalgebra::Matrix3;

const SEED: u64 = 42;

fn report(id: u32, title: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} ({title}): {detail}");
}

#[test]
fn criterion_1_fixed_cycle_reproduction() {
    let start = Instant::now();
    let pure = find_pure_cycles(2).unwrap();
    let period_residual = pure
        .iter()
        .flat_map(|c| {
            c.points
                .iter()
                .map(move |&p| compose_fl(p, c.period).chordal_distance(&p))
        })
        .fold(0.0, f64::max);
    let pure_points: usize = pure.iter().map(|c| c.points.len()).sum();
    let mixed = find_mixed_cycles(2).unwrap();
    let table_gap = published_bloch_deviations(2)
        .unwrap()
        .into_iter()
        .map(|(_, g)| g)
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();

    let pass = pure.len() == 4
        && pure_points == 5
        && period_residual < 1e-12
        && pure.iter().all(|c| c.residual < 1e-12)
        && mixed.len() == 5
        && mixed.iter().all(|c| c.residual < 1e-12)
        && table_gap < 5e-4
        && elapsed < Duration::from_secs(1);
    report(
        1,
        "fixed cycles",
        pass,
        format!(
            "{pure_points} pure points, max residual {period_residual:.2e}; \
             {} Bloch rows, max gap to published values {table_gap:.2e}; {elapsed:?}",
            mixed.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_repulsion() {
    let start = Instant::now();
    let cycles = find_pure_cycles(2).unwrap();
    let magnitudes: Vec<f64> = cycles.iter().map(|c| c.multiplier.norm()).collect();
    let at_one = cycles[0].multiplier.norm();
    let elapsed = start.elapsed();
    let pass = magnitudes.iter().all(|&m| m > 1.0)
        && cycles.iter().all(|c| c.stability == Stability::Repelling)
        && (at_one - 2.0).abs() < 1e-14
        && elapsed < Duration::from_secs(1);
    report(
        2,
        "repelling cycles",
        pass,
        format!("|multipliers| = {magnitudes:.6?}, |lambda(1)| = {at_one}; {elapsed:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_oracle_equivalence() {
    let start = Instant::now();
    let r = oracle_sweep(10_000, SEED).unwrap();
    let elapsed = start.elapsed();
    let pass = r.samples == 10_000
        && r.pure_fl < 1e-12
        && r.mixed_ml < 1e-12
        && elapsed < Duration::from_secs(10);
    report(
        3,
        "oracle equivalence",
        pass,
        format!(
            "pure f_L {:.2e}, mixed M_L {:.2e} (f_0 {:.2e}, S {:.2e}) over {} inputs; {elapsed:?}",
            r.pure_fl, r.mixed_ml, r.pure_f0, r.mixed_s, r.samples
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_c0_stability() {
    let j = jacobian_at(&BlochVector::ORIGIN);
    let mut nilpotent = Matrix3::zeros();
    nilpotent[(1, 2)] = 2.0;

    // central differences at the origin
    let h = 1e-6;
    let mut fd_gap: f64 = 0.0;
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = h;
        let plus = apply_ml(&BlochVector::new(e[0], e[1], e[2])).as_array();
        let minus = apply_ml(&BlochVector::new(-e[0], -e[1], -e[2])).as_array();
        for row in 0..3 {
            let fd = (plus[row] - minus[row]) / (2.0 * h);
            fd_gap = fd_gap.max((fd - nilpotent[(row, col)]).abs());
        }
    }

    let mut rng = sample_rng(SEED, 0);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..100_000 {
        let b = sample_ball_uniform(0.1, &mut rng);
        let r2 = b.norm_sqr();
        if r2 > 0.0 {
            worst_ratio = worst_ratio.max(compose_ml(b, 2).norm() / r2);
        }
    }
    let pass =
        j == nilpotent && (j * j).iter().all(|&x| x == 0.0) && fd_gap < 1e-6 && worst_ratio <= 5.0;
    report(
        4,
        "C0 stability",
        pass,
        format!(
            "Jacobian nilpotent: {}, finite-difference gap {fd_gap:.2e}, \
             max |M^2(b)|/|b|^2 = {worst_ratio:.4} over 1e5 samples",
            j == nilpotent
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_forward_convergence() {
    let config = ForwardExperimentConfig::new(100_000, 1e-3, SEED);
    assert_eq!(config.sampling_radius, 1.0 - 1e-3);
    assert_eq!(config.max_iterations, 1_000_000);
    let h = run_forward(&config).unwrap();
    let max = h.max_iterations().unwrap_or(0);
    let pass = h.total() == 100_000
        && h.non_converged == 0
        && max > 1000
        && h.runtime < Duration::from_secs(300);
    report(
        5,
        "forward convergence",
        pass,
        format!(
            "N = {}, non_converged = {}, median = {:?}, max first passage = {max} (needs > 1000); {:?}",
            h.total(),
            h.non_converged,
            h.median(),
            h.runtime
        ),
    );
    assert!(pass);
}

/// Full-size forward run. Cheap in release builds; run with `--ignored`.
#[test]
#[ignore]
fn criterion_5_forward_convergence_paper_scale() {
    let config = ForwardExperimentConfig::new(PAPER_SCALE_SAMPLES, 1e-3, SEED);
    let h = run_forward(&config).unwrap();
    let max = h.max_iterations().unwrap_or(0);
    let pass = h.non_converged == 0 && max > 1000;
    report(
        5,
        "forward convergence, N = 1.6e6",
        pass,
        format!(
            "non_converged = {}, max first passage = {max}; {:?}",
            h.non_converged, h.runtime
        ),
    );
    assert!(pass);
}

fn terminal_fraction_within(points: &[BlochVector], targets: &[BlochVector], radius: f64) -> f64 {
    let hits = points
        .iter()
        .filter(|p| targets.iter().any(|t| p.distance(t) <= radius))
        .count();
    hits as f64 / points.len() as f64
}

/// Terminal points of minus-only backward orbits stop at purity 0.99, i.e.
/// about 0.01 inside the sphere, so "near" a pure cycle is taken as 2e-2.
const MINUS_NEAR_RADIUS: f64 = 2e-2;

#[test]
fn criterion_6_backward_convergence() {
    let start = Instant::now();
    let random = run_backward(&BackwardExperimentConfig::new(
        10_000,
        BranchPolicy::Random,
        SEED,
    ))
    .unwrap();

    let plus = backward_outcomes(&BackwardExperimentConfig::new(
        10_000,
        BranchPolicy::PlusOnly,
        SEED,
    ))
    .unwrap();
    let minus = backward_outcomes(&BackwardExperimentConfig::new(
        10_000,
        BranchPolicy::MinusOnly,
        SEED,
    ))
    .unwrap();
    let elapsed = start.elapsed();

    let cycles = find_mixed_cycles(2).unwrap();
    let c1 = cycles[1].points.clone();
    let others: Vec<BlochVector> = cycles[2..].iter().flat_map(|c| c.points.clone()).collect();

    let converged =
        |o: &[lattes::experiments::SampleOutcome]| o.iter().all(|s| s.iterations.is_some());
    let terminals =
        |o: &[lattes::experiments::SampleOutcome]| o.iter().map(|s| s.terminal).collect::<Vec<_>>();
    let median = |o: &[lattes::experiments::SampleOutcome]| {
        let mut v: Vec<u64> = o.iter().filter_map(|s| s.iterations).collect();
        v.sort_unstable();
        v[(v.len() - 1) / 2]
    };

    let plus_near_c1 = terminal_fraction_within(&terminals(&plus), &c1, 1e-2);
    let plus_worst = terminals(&plus)
        .iter()
        .map(|t| t.distance(&c1[0]))
        .fold(0.0, f64::max);
    let plus_min_gap = terminals(&plus)
        .iter()
        .map(|t| 1.0 - t.norm())
        .fold(0.0, f64::max);
    println!(
        "  plus_only: farthest terminal from C1 at {plus_worst:.5}; largest radial gap 1 - |b| = {plus_min_gap:.5}"
    );
    let minus_near = terminal_fraction_within(&terminals(&minus), &others, MINUS_NEAR_RADIUS);
    let (plus_median, minus_median) = (median(&plus), median(&minus));

    // which cycle each minus-only orbit lands next to
    let mut landing: BTreeMap<&str, usize> = BTreeMap::new();
    for t in terminals(&minus) {
        let nearest = cycles[1..]
            .iter()
            .min_by(|a, b| {
                let da = a
                    .points
                    .iter()
                    .map(|p| p.distance(&t))
                    .fold(f64::INFINITY, f64::min);
                let db = b
                    .points
                    .iter()
                    .map(|p| p.distance(&t))
                    .fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        *landing.entry(nearest.label).or_default() += 1;
    }
    println!("  minus-only terminal cycle counts: {landing:?}");

    let checks = [
        (
            "random: all reach P >= 0.99",
            random.non_converged == 0 && random.total() == 10_000,
        ),
        (
            "plus_only: >= 99% within 1e-2 of C1",
            converged(&plus) && plus_near_c1 >= 0.99,
        ),
        (
            "minus_only: >= 99% near C2/C3/C4",
            converged(&minus) && minus_near >= 0.99,
        ),
        (
            "minus_only median > plus_only median",
            minus_median > plus_median,
        ),
        ("runtime < 5 min", elapsed < Duration::from_secs(300)),
    ];
    for (name, ok) in &checks {
        println!("  {} {name}", if *ok { "ok  " } else { "FAIL" });
    }
    let pass = checks.iter().all(|(_, ok)| *ok);
    report(
        6,
        "backward convergence",
        pass,
        format!(
            "random max steps {:?}; plus_only within 1e-2 of C1: {:.2}%, median {plus_median}; \
             minus_only near C2-C4: {:.2}%, median {minus_median}; {elapsed:?}",
            random.max_iterations(),
            100.0 * plus_near_c1,
            100.0 * minus_near
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_inverse_branches() {
    let mut rng = sample_rng(SEED, 7);
    let mut targets: Vec<BlochVector> = (0..100_000)
        .map(|_| sample_ball_uniform(1.0, &mut rng))
        .collect();
    let random_count = targets.len();
    // V -> 0 stratum
    for k in 0..1000 {
        let b = sample_ball_uniform(1.0, &mut rng);
        let v = [0.0, -0.0, 1e-9, -1e-12, 1e-300][k % 5];
        targets.push(BlochVector::new(b.u, v, b.w));
    }
    // W = 0, U <= 0 stratum, U = 0 included
    for k in 0..1000 {
        let b = sample_ball_uniform(1.0, &mut rng);
        let u = if k % 10 == 0 { 0.0 } else { -b.u.abs() };
        let w = if k % 2 == 0 { 0.0 } else { -0.0 };
        targets.push(BlochVector::new(u, b.v, w));
    }
    // boundary sphere and the poles of the V range
    targets.push(BlochVector::new(0.0, 1.0, 0.0));
    targets.push(BlochVector::new(0.0, -1.0, 0.0));
    targets.push(BlochVector::new(-1.0, 0.0, 0.0));

    let mut worst: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for t in &targets {
        for branch in [Branch::Plus, Branch::Minus] {
            let pre = inverse_ml(t, branch);
            worst = worst.max(apply_ml(&pre).distance(t));
            outside = outside.max(pre.norm() - 1.0);
        }
    }
    let pass = worst < 1e-10 && outside <= 1e-12;
    report(
        7,
        "inverse branches",
        pass,
        format!(
            "{} targets ({random_count} uniform + degenerate strata), max |M(m(t)) - t| = {worst:.2e}, \
             max norm excess {:.2e}",
            targets.len(),
            outside.max(0.0)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut all_equal = true;
    let mut files = 0;

    let forward = ForwardExperimentConfig::new(20_000, 1e-3, SEED);
    let backward: Vec<_> = [
        BranchPolicy::Random,
        BranchPolicy::PlusOnly,
        BranchPolicy::MinusOnly,
    ]
    .into_iter()
    .map(|p| BackwardExperimentConfig::new(2_000, p, SEED))
    .collect();

    for format in [OutputFormat::Csv, OutputFormat::Json] {
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for workers in [1, 2, 4, 1] {
            let mut run_files = Vec::new();
            let f = with_workers(workers, || run_forward(&forward))
                .unwrap()
                .unwrap();
            let mut histos = vec![f];
            for cfg in &backward {
                histos.push(
                    with_workers(workers, || run_backward(cfg))
                        .unwrap()
                        .unwrap(),
                );
            }
            for (k, h) in histos.iter().enumerate() {
                let path = dir.path().join(format!("h{k}_{workers}.out"));
                std::fs::write(&path, format.render(&histogram_to_table(h))).unwrap();
                run_files.push(std::fs::read(&path).unwrap());
                files += 1;
            }
            outputs.push(run_files);
        }
        all_equal &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    report(
        8,
        "determinism",
        all_equal,
        format!("{files} files across worker counts 1/2/4/1 and both formats byte-identical: {all_equal}"),
    );
    assert!(all_equal);
}

#[test]
fn pure_cycle_points_are_exact_radicals() {
    // the closed forms of the pure cycles, evaluated independently
    use num_complex::Complex64;
    let i = Complex64::new(0.0, 1.0);
    let expected = [
        Complex64::new(1.0, 0.0),
        ((i - 2.0) / 2.0).sqrt() - (i + 1.0) / 2.0,
        -((i - 2.0) / 2.0).sqrt() - (i + 1.0) / 2.0,
        ((-i - 2.0) / 2.0).sqrt() + (i - 1.0) / 2.0,
        -((-i - 2.0) / 2.0).sqrt() + (i - 1.0) / 2.0,
    ];
    let got: Vec<ExtendedComplex> = find_pure_cycles(2)
        .unwrap()
        .into_iter()
        .flat_map(|c| c.points)
        .collect();
    for (g, e) in got.iter().zip(expected) {
        assert_eq!(g.finite().unwrap(), e);
    }
}
