//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! fails when the criterion or its runtime bound is not met.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fedns_core::data::{
    parse_libsvm, partition, read_libsvm_file, synth_logistic, synth_ridge, write_libsvm,
    LabelMode, LibsvmOptions, PartitionPlan,
};
use fedns_core::federation::communication_ledger;
use fedns_core::objective::{centralized_newton, krr_closed_form, reference_optimum, NewtonOptions};
use fedns_core::rng::stream;
use fedns_core::sketch::make_sketch;
use fedns_core::{
    effective_dimension, Dataset, FedAvgConfig, FedNdesConfig, FedNewtonConfig, FedNsConfig,
    Federation, LabeledData, Objective, RunTrace, Shard, SketchKind,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn verdict(criterion: u32, limit: Duration, started: Instant, pass: bool, detail: String) {
    let elapsed = started.elapsed();
    let in_time = elapsed < limit;
    let ok = pass && in_time;
    // straight to the handle so the line survives output capture
    let _ = writeln!(
        io::stderr().lock(),
        "\ncriterion {criterion}: {} {detail} [{:.2}s of {:.0}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    assert!(pass, "criterion {criterion}: {detail}");
    assert!(in_time, "criterion {criterion}: took {elapsed:?}, limit {limit:?}");
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn federation<'a>(shards: &'a [Shard], obj: Objective, data: &Dataset) -> Federation<'a> {
    let reference = reference_optimum(&obj, data).unwrap();
    Federation::new(shards, obj)
        .unwrap()
        .with_reference_point(&reference.w)
        .unwrap()
}

#[test]
fn criterion_01_identity_sketches_reproduce_exact_newton() {
    let started = Instant::now();
    let data = synth_logistic(500, 10, 5.0, 1).unwrap();
    let obj = Objective::logistic(1e-3).unwrap();
    let shards = partition(&data, &PartitionPlan::iid(4, 1)).unwrap();
    let fed = federation(&shards, obj, &data);
    let w0 = DVector::zeros(10);
    let rounds = 8;
    let exact = fed.fednewton_run(&w0, &FedNewtonConfig { step_size: 1.0, rounds }).unwrap();
    let cfg = FedNsConfig { sketch_kind: SketchKind::Identity, rounds, ..Default::default() };
    let sketched = fed.fedns_run(&w0, &cfg).unwrap();

    let mut worst: f64 = 0.0;
    for (a, b) in exact.rows.iter().zip(&sketched.rows) {
        worst = worst
            .max((a.loss - b.loss).abs())
            .max((a.optimal_gap - b.optimal_gap).abs())
            .max((a.grad_norm - b.grad_norm).abs());
    }
    for (a, b) in exact.iterates.iter().zip(&sketched.iterates) {
        worst = worst.max((a - b).amax());
    }
    let pass = exact.rows.len() == rounds + 1 && sketched.rows.len() == rounds + 1 && worst <= 1e-10;
    verdict(1, secs(5), started, pass, format!("max per-round difference {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_02_ridge_solved_in_one_round() {
    let started = Instant::now();
    let data = synth_ridge(600, 12, 0.1, 4).unwrap();
    let obj = Objective::squared(1e-3).unwrap();
    let plans = [
        PartitionPlan::iid(1, 2),
        PartitionPlan::iid(3, 2),
        PartitionPlan::iid(8, 2),
        PartitionPlan::label_skew(4, 0.2, 2),
    ];
    let mut worst: f64 = 0.0;
    for plan in &plans {
        let shards = partition(&data, plan).unwrap();
        let fed = federation(&shards, obj, &data);
        let trace = fed
            .fednewton_run(&DVector::zeros(12), &FedNewtonConfig { step_size: 1.0, rounds: 1 })
            .unwrap();
        worst = worst.max(trace.rows[1].optimal_gap.abs());
    }
    verdict(2, secs(1), started, worst <= 1e-12, format!("worst round-1 gap {worst:.2e} over {} partitions (tol 1e-12)", plans.len()));
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const FIG_DATA_SEED: u64 = 2024;

fn fig_problem() -> (Dataset, Objective) {
    (synth_logistic(2000, 20, 5.0, FIG_DATA_SEED).unwrap(), Objective::logistic(1e-3).unwrap())
}

fn strictly_decreasing_ratios(trace: &RunTrace, from: usize, to: usize) -> (bool, Vec<f64>) {
    let gaps = trace.gaps();
    let ratios: Vec<f64> = (from..=to).map(|t| gaps[t] / gaps[t - 1]).collect();
    (ratios.windows(2).all(|w| w[1] < w[0]), ratios)
}

#[test]
fn criterion_03_sketched_newton_separates_from_first_order() {
    let started = Instant::now();
    let (data, obj) = fig_problem();
    let w0 = DVector::zeros(20);
    let mut passing = 0;
    let mut clauses = [0usize; 3];
    let mut details = Vec::new();
    for seed in SEEDS {
        let shards = partition(&data, &PartitionPlan::iid(4, seed)).unwrap();
        let fed = federation(&shards, obj, &data);
        let ns = fed
            .fedns_run(&w0, &FedNsConfig { sketch_size: 20, rounds: 8, seed, ..Default::default() })
            .unwrap();
        let avg_cfg = FedAvgConfig { local_steps: 1, step_size: fed.fedavg_default_step(), rounds: 8 };
        let avg = fed.fedavg_baseline_run(&w0, &avg_cfg).unwrap();

        let ns_gap = ns.rows[8].optimal_gap;
        let avg_gap = avg.rows[8].optimal_gap;
        let (decreasing, ratios) = strictly_decreasing_ratios(&ns, 2, 6);
        let met = [ns_gap <= 1e-10, decreasing, avg_gap >= 1e-2];
        for (count, ok) in clauses.iter_mut().zip(met) {
            *count += ok as usize;
        }
        let ok = met.iter().all(|&c| c);
        passing += ok as usize;
        if !ok {
            details.push(format!(
                "seed {seed}: gap8 {ns_gap:.1e}, fedavg gap8 {avg_gap:.1e}, ratios {}",
                sci(&ratios)
            ));
        }
    }
    let pass = passing >= 9;
    let mut detail = format!(
        "{passing}/10 seeds meet all clauses (need 9); fedns gap<=1e-10 at round 8 on {}, strictly decreasing gap ratios over rounds 2-6 on {}, fedavg gap>=1e-2 at round 8 on {}",
        clauses[0], clauses[1], clauses[2]
    );
    if !pass {
        detail.push_str("; ");
        detail.push_str(&details.join("; "));
    }
    verdict(3, secs(30), started, pass, detail);
}

#[test]
fn criterion_04_effective_dimension_sizing_converges() {
    let started = Instant::now();
    let (data, obj) = fig_problem();
    let w0 = DVector::zeros(20);
    let d_eff = effective_dimension(&obj.loss_hessian(&data, &w0).unwrap(), obj.lambda()).unwrap();
    let mut passing = 0;
    let mut finals = Vec::new();
    for seed in SEEDS {
        let shards = partition(&data, &PartitionPlan::iid(4, seed)).unwrap();
        let fed = federation(&shards, obj, &data);
        let mut cfg = FedNdesConfig::from_effective_dimension(d_eff, seed);
        cfg.delta = 1e-14;
        cfg.max_rounds = 20;
        assert_eq!(cfg.mbar1, (4.0 * d_eff).ceil() as usize);
        let trace = fed.fedndes_run(&w0, &cfg).unwrap();
        let gap = trace.rows.iter().take(21).map(|r| r.optimal_gap).fold(f64::INFINITY, f64::min);
        passing += (gap <= 1e-6) as usize;
        finals.push(gap);
    }
    let pass = d_eff < 10.0 && passing >= 8;
    verdict(
        4,
        secs(60),
        started,
        pass,
        format!("d_eff {d_eff:.2} (< d/2 = 10), mbar1 {}, {passing}/10 seeds reach gap<=1e-6 in 20 rounds (need 8); worst {:.1e}",
            (4.0 * d_eff).ceil(),
            finals.iter().cloned().fold(0.0, f64::max)),
    );
}

#[test]
fn criterion_05_final_gap_non_increasing_in_sketch_size() {
    let started = Instant::now();
    let (data, obj) = fig_problem();
    let w0 = DVector::zeros(20);
    let m = 20usize;
    let ks = [m.div_ceil(4), m.div_ceil(2), m, 2 * m];
    let federations: Vec<_> = SEEDS
        .map(|seed| partition(&data, &PartitionPlan::iid(4, seed)).unwrap())
        .collect();
    let means: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let total: f64 = SEEDS
                .zip(&federations)
                .map(|(seed, shards)| {
                    let fed = federation(shards, obj, &data);
                    let cfg = FedNsConfig { sketch_size: k, rounds: 10, seed, ..Default::default() };
                    fed.fedns_run(&w0, &cfg).unwrap().rows[10].optimal_gap
                })
                .sum();
            total / SEEDS.count() as f64
        })
        .collect();
    let pass = means.windows(2).all(|w| w[1] <= 2.0 * w[0]);
    verdict(5, secs(120), started, pass, format!("k {ks:?} mean final gaps {} (each <= 2x previous)", sci(&means)));
}

#[test]
fn criterion_06_uploaded_scalars_match_closed_form() {
    let started = Instant::now();
    // phishing-shaped: M = 68, m = 40, k = 17
    let (m_dim, workers, k) = (68usize, 40usize, 17usize);
    let data = synth_logistic(4000, m_dim, 4.0, 7).unwrap();
    let obj = Objective::logistic(1e-3).unwrap();
    let shards = partition(&data, &PartitionPlan::iid(workers, 7)).unwrap();
    let fed = Federation::new(&shards, obj).unwrap();
    let w0 = DVector::zeros(m_dim);
    let ns = fed
        .fedns_run(&w0, &FedNsConfig { sketch_size: k, rounds: 3, seed: 7, ..Default::default() })
        .unwrap();
    let newton = fed.fednewton_run(&w0, &FedNewtonConfig { step_size: 1.0, rounds: 3 }).unwrap();

    let ns_expected = workers * (k * m_dim + m_dim);
    let newton_expected = workers * (m_dim * m_dim + m_dim);
    let exact = |trace: &RunTrace, per_round: usize| {
        let ledger = communication_ledger(trace);
        trace.rows[1..].iter().all(|r| r.scalars_up == per_round)
            && trace.rows[0].scalars_up == 0
            && ledger.total_up == 3 * per_round
    };
    let pass = ns_expected == 48960 && exact(&ns, ns_expected) && exact(&newton, newton_expected);
    verdict(
        6,
        secs(1),
        started,
        pass,
        format!("fedns {} per round (expected {ns_expected}), fednewton {} per round (expected {newton_expected})",
            ns.rows[1].scalars_up, newton.rows[1].scalars_up),
    );
}

#[test]
fn criterion_07_sketch_isotropy_over_200_draws() {
    let started = Instant::now();
    let (k, n, draws) = (64usize, 256usize, 200u64);
    let id = DMatrix::<f64>::identity(n, n);
    let mut errors = Vec::new();
    for kind in SketchKind::RANDOM {
        let mut mean = DMatrix::<f64>::zeros(n, n);
        for seed in 0..draws {
            let s = make_sketch(kind, k, n, seed).unwrap().materialize().unwrap();
            mean += s.tr_mul(&s);
        }
        mean /= draws as f64;
        errors.push((kind, (mean - &id).norm() / id.norm()));
    }
    let pass = errors.iter().all(|&(_, e)| e <= 0.05);
    let detail = errors
        .iter()
        .map(|(kind, e)| format!("{kind} {e:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(7, secs(10), started, pass, format!("relative Frobenius error {detail} (tol 0.05)"));
}

fn random_instance(seed: u64) -> (Dataset, Objective, DVector<f64>) {
    let mut rng = stream(seed, 0);
    let n = rng.random_range(5..40);
    let d = rng.random_range(1..8);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let logistic = seed % 2 == 0;
    let y = DVector::from_fn(n, |_, _| {
        if logistic {
            if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.random_range(-3.0..3.0)
        }
    });
    let lambda = rng.random_range(1e-3..1.0);
    let w = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let obj = if logistic { Objective::logistic(lambda) } else { Objective::squared(lambda) };
    (Dataset::new("random", x, y).unwrap(), obj.unwrap(), w)
}

fn relative(a: f64, scale: f64) -> f64 {
    a / scale.max(1.0)
}

#[test]
fn criterion_08_calculus_checks() {
    let started = Instant::now();
    let h_step = 1e-5;
    let (mut grad_err, mut hess_err, mut gram_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..20 {
        let (data, obj, w) = random_instance(seed);
        let d = w.len();
        let g = obj.gradient(&data, &w).unwrap();
        let h = obj.hessian(&data, &w).unwrap();
        let shifted = |i: usize, s: f64| {
            let mut v = w.clone();
            v[i] += s;
            v
        };
        let fd_g = DVector::from_fn(d, |i, _| {
            (obj.loss(&data, &shifted(i, h_step)).unwrap() - obj.loss(&data, &shifted(i, -h_step)).unwrap())
                / (2.0 * h_step)
        });
        let mut fd_h = DMatrix::zeros(d, d);
        for i in 0..d {
            let col = (obj.gradient(&data, &shifted(i, h_step)).unwrap()
                - obj.gradient(&data, &shifted(i, -h_step)).unwrap())
                / (2.0 * h_step);
            fd_h.set_column(i, &col);
        }
        grad_err = grad_err.max(relative((&g - &fd_g).norm(), g.norm()));
        hess_err = hess_err.max(relative((&h - &fd_h).norm(), h.norm()));
        let b = obj.sqrt_hessian(&data, &w).unwrap().factor;
        let loss_h = obj.loss_hessian(&data, &w).unwrap();
        gram_err = gram_err.max(relative((b.tr_mul(&b) - &loss_h).norm(), loss_h.norm()));
    }
    let pass = grad_err <= 1e-5 && hess_err <= 1e-4 && gram_err <= 1e-10;
    verdict(
        8,
        secs(5),
        started,
        pass,
        format!("gradient {grad_err:.1e} (1e-5), Hessian {hess_err:.1e} (1e-4), Gram {gram_err:.1e} (1e-10) over 20 instances"),
    );
}

#[test]
fn criterion_09_newton_matches_kernel_ridge_closed_form() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = stream(seed, 1);
        let n = rng.random_range(20..200);
        let d = rng.random_range(2..15);
        let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
        let data = synth_ridge(n, d, 0.3, seed).unwrap();
        let obj = Objective::squared(lambda).unwrap();
        let newton = centralized_newton(&obj, &data, &DVector::zeros(d), NewtonOptions::default()).unwrap();
        let closed = krr_closed_form(&data, lambda).unwrap();
        worst = worst.max((&newton.state.w - &closed).amax());
    }
    verdict(9, secs(2), started, worst <= 1e-8, format!("max coefficient difference {worst:.1e} over 10 instances (tol 1e-8)"));
}

#[test]
fn criterion_10_libsvm_golden_files_and_round_trip() {
    let started = Instant::now();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let binary = LibsvmOptions::default();
    let real = LibsvmOptions { labels: LabelMode::Real, ..Default::default() };

    let two = read_libsvm_file(fixtures.join("two_rows.libsvm"), &binary).unwrap();
    let mut golden = two.features() == &DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 2.0, 0.0, 1.0, 0.0])
        && two.labels().as_slice() == [1.0, -1.0];
    let zero_one = read_libsvm_file(fixtures.join("zero_one_crlf.libsvm"), &binary).unwrap();
    golden &= zero_one.labels().iter().all(|&y| y == 1.0 || y == -1.0);
    golden &= read_libsvm_file(fixtures.join("real_targets.libsvm"), &real).is_ok();
    golden &= read_libsvm_file(fixtures.join("bad_token.libsvm"), &binary).is_err();
    golden &= read_libsvm_file(fixtures.join("descending.libsvm"), &binary).is_err();

    let mut round_trips = 0;
    for seed in 0..100u64 {
        let mut rng = stream(seed, 2);
        let n = rng.random_range(1..30);
        let d = rng.random_range(1..12);
        let x = DMatrix::from_fn(n, d, |_, _| {
            if rng.random_bool(0.4) { 0.0 } else { rng.random_range(-1e3..1e3) }
        });
        let y = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let data = Dataset::new("rt", x, y).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        let opts = LibsvmOptions { feature_dim: Some(d), labels: LabelMode::Real, name: Some("rt".into()) };
        if parse_libsvm(buf.as_slice(), &opts).unwrap() == data {
            round_trips += 1;
        }
    }
    let pass = golden && round_trips == 100;
    verdict(10, secs(2), started, pass, format!("golden fixtures {}, round trip {round_trips}/100", if golden { "exact" } else { "mismatch" }));
}

#[test]
fn criterion_11_traces_byte_identical_serial_vs_threaded() {
    let started = Instant::now();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic_fedns.toml");
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, threads: &str| {
        let out = tmp.path().join(dir);
        let status = Command::new(env!("CARGO_BIN_EXE_fedns"))
            .args(["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        out
    };
    let serial = run("serial", "1");
    let again = run("again", "1");
    let threaded = run("threaded", "4");
    let mut files = 0;
    let mut mismatched = Vec::new();
    for entry in fs::read_dir(&serial).unwrap() {
        let name = entry.unwrap().file_name();
        // wall-clock sidecars are excluded
        if name.to_string_lossy().ends_with(".timing.csv") {
            continue;
        }
        files += 1;
        let reference = fs::read(serial.join(&name)).unwrap();
        for other in [&again, &threaded] {
            if fs::read(other.join(&name)).ok().as_ref() != Some(&reference) {
                mismatched.push(name.to_string_lossy().into_owned());
            }
        }
    }
    let pass = files > 0 && mismatched.is_empty();
    verdict(11, secs(30), started, pass, format!("{files} trace files compared, mismatches {mismatched:?}"));
}
