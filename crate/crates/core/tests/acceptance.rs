//! End-to-end acceptance checks. Each test covers one criterion and prints a
//! single `criterion N ...: PASS` line (visible with `--nocapture`); a
//! failed criterion prints `FAIL` with details before panicking.

mod common;

use std::process::Command;

use rand::Rng;

use cs_smooth::certify::{certify_cost_sensitive, NoiseKey, SmoothingConfig, Status};
use cs_smooth::classifier::{BaseClassifier, IntervalClassifier, MlpModel};
use cs_smooth::cost::CostMatrix;
use cs_smooth::data::gen_synthetic;
use cs_smooth::error::Result;
use cs_smooth::eval::run_experiment;
use cs_smooth::gauss;
use cs_smooth::radius::{cost_sensitive_radius, standard_radius, ProbVector};
use cs_smooth::rng;
use cs_smooth::train::{train, Objective, TrainConfig};

use common::{median, oracle_binom_lower, oracle_binom_upper};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status} — {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_numeric_kernel() {
    // quantile/CDF round trip on an even grid
    let mut worst_rt = 0.0_f64;
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let back = gauss::phi(gauss::phi_inv(p).unwrap()).unwrap();
        worst_rt = worst_rt.max((back - p).abs());
    }

    // exact binomial bounds against an independent tail-sum bisection oracle
    let mut worst_cp = 0.0_f64;
    for n in 1..=200u64 {
        for k in 0..=n {
            let lo = gauss::binom_lower(k, n, 0.999).unwrap().value;
            let up = gauss::binom_upper(k, n, 0.999).unwrap().value;
            worst_cp = worst_cp.max((lo - oracle_binom_lower(k, n, 0.999)).abs());
            worst_cp = worst_cp.max((up - oracle_binom_upper(k, n, 0.999)).abs());
        }
    }
    verdict(
        "1 (numeric kernel)",
        worst_rt <= 1e-12 && worst_cp <= 1e-9,
        &format!("round-trip err {worst_rt:.2e}, bound err {worst_cp:.2e}"),
    );
}

#[test]
fn criterion_2_radius_dominance() {
    let mut r = rng::stream(42, "dominance", &[]);
    let mut violations = 0usize;
    let mut eq_violations = 0usize;
    let mut checked = 0usize;
    while checked < 100_000 {
        let m = r.gen_range(2..=8usize);
        let raw: Vec<f64> = (0..m).map(|_| -(r.gen::<f64>().max(1e-12)).ln()).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let p = ProbVector::new(probs.clone()).unwrap();
        let y = (0..m).max_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap()).unwrap();
        let sigma = r.gen_range(0.1..2.0);

        // alternate between the full target set (equality case) and a random
        // nonempty subset of the non-argmax classes
        let full = checked.is_multiple_of(2);
        let others: Vec<usize> = (0..m).filter(|&k| k != y).collect();
        let targets: Vec<usize> = if full {
            others.clone()
        } else {
            let chosen: Vec<usize> = others
                .iter()
                .copied()
                .filter(|_| r.gen_bool(0.5))
                .collect();
            if chosen.is_empty() {
                vec![others[r.gen_range(0..others.len())]]
            } else {
                chosen
            }
        };
        let cost = CostMatrix::pairwise(m, y, &targets).unwrap();
        let omega = cost.omega(y).unwrap();

        let std_r = standard_radius(&p, y, sigma).unwrap().radius;
        let cs_r = cost_sensitive_radius(&p, &omega, sigma).unwrap().radius;
        if cs_r < std_r - 1e-12 {
            violations += 1;
        }
        if targets.len() == m - 1 && (cs_r - std_r).abs() > 1e-12 {
            eq_violations += 1;
        }
        checked += 1;
    }
    verdict(
        "2 (radius dominance)",
        violations == 0 && eq_violations == 0,
        &format!("{checked} draws, {violations} dominance / {eq_violations} equality violations"),
    );
}

#[test]
fn criterion_3_certification_coverage() {
    // binary interval oracle: exact cost-sensitive radius at x is |x1|
    let f = BaseClassifier::Interval(IntervalClassifier::new(vec![0.0]).unwrap());
    let cost = CostMatrix::overall(2).unwrap();
    let cfg = SmoothingConfig {
        sigma: 0.5,
        n0: 100,
        n: 1000,
        alpha: 0.1,
    };
    let runs = 2000u64;
    let allowed = 0.1 + 3.0 * (0.1 * 0.9 / runs as f64).sqrt();
    let mut worst = 0.0_f64;
    for (i, &x1) in [0.1, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
        let exact = x1;
        let y = 1usize; // x1 > 0
        let omega = cost.omega(y).unwrap();
        let over: usize = (0..runs)
            .map(|seed| {
                let out = certify_cost_sensitive(
                    &f,
                    &[x1],
                    &omega,
                    &cfg,
                    NoiseKey::new(1000 + seed, i as u64),
                )
                .unwrap();
                usize::from(out.radius > exact)
            })
            .sum();
        worst = worst.max(over as f64 / runs as f64);
    }
    verdict(
        "3 (certification coverage)",
        worst <= allowed,
        &format!("worst miscoverage {worst:.4} vs allowed {allowed:.4}"),
    );
}

#[test]
fn criterion_4_certification_consistency() {
    // x1 = 0.5, sigma = 0.5: exact top-class probability is phi(1) = 0.8413,
    // exact radius 0.5
    let f = BaseClassifier::Interval(IntervalClassifier::new(vec![0.0]).unwrap());
    let cost = CostMatrix::overall(2).unwrap();
    let omega = cost.omega(1).unwrap();
    let cfg = SmoothingConfig {
        sigma: 0.5,
        n0: 100,
        n: 100_000,
        alpha: 0.001,
    };
    let mut radii = Vec::new();
    let mut over = 0usize;
    for seed in 0..50u64 {
        let out = certify_cost_sensitive(&f, &[0.5], &omega, &cfg, NoiseKey::new(seed, 0)).unwrap();
        assert_eq!(out.status, Status::Certified);
        if out.radius > 0.5 {
            over += 1;
        }
        radii.push(out.radius);
    }
    let med = median(&mut radii);
    verdict(
        "4 (certification consistency)",
        (0.45..=0.5).contains(&med) && over <= 1,
        &format!("median radius {med:.4}, {over}/50 runs above the exact radius"),
    );
}

#[test]
fn criterion_5_dual_bound_regime() {
    // three classes with exact smoothed probabilities (0.5, 0.3, 0.2) at
    // x = 0: the second-highest class is outside Omega = {2}, so the paired
    // bound beats the single bound
    let sigma = 0.5;
    let t1 = 0.0;
    let t2 = sigma * gauss::phi_inv(0.8).unwrap();
    let f = BaseClassifier::Interval(IntervalClassifier::new(vec![t1, t2]).unwrap());
    let cfg = SmoothingConfig {
        sigma,
        n0: 100,
        n: 10_000,
        alpha: 0.001,
    };
    let omega_single = CostMatrix::pairwise(3, 0, &[2]).unwrap().omega(0).unwrap();
    let omega_both = CostMatrix::pairwise(3, 0, &[1, 2]).unwrap().omega(0).unwrap();

    let mut r2_wins = 0usize;
    let mut gaps_single = Vec::new();
    let mut gaps_both = Vec::new();
    for seed in 0..200u64 {
        let a = certify_cost_sensitive(&f, &[0.0], &omega_single, &cfg, NoiseKey::new(seed, 5))
            .unwrap();
        let b =
            certify_cost_sensitive(&f, &[0.0], &omega_both, &cfg, NoiseKey::new(seed, 5)).unwrap();
        if a.r2 > a.r1 {
            r2_wins += 1;
        }
        gaps_single.push(a.r2 - a.r1);
        gaps_both.push(b.r2 - b.r1);
    }
    let gap_single = median(&mut gaps_single);
    let gap_both = median(&mut gaps_both);
    verdict(
        "5 (dual-bound regime)",
        r2_wins >= 180 && gap_both < gap_single,
        &format!(
            "R2 > R1 in {r2_wins}/200 runs; median gap {gap_single:.4} -> {gap_both:.4} \
             when the runner-up joins the target set"
        ),
    );
}

#[test]
fn criterion_6_gradient_checks() {
    let mut failures = 0usize;
    for model_idx in 0..20u64 {
        let objective = match model_idx % 3 {
            0 => Objective::Cohen,
            1 => Objective::CohenR,
            _ => Objective::CsMacer,
        };
        if !fd_check_once(objective, model_idx) {
            failures += 1;
        }
    }
    verdict(
        "6 (gradient checks)",
        failures == 0,
        &format!("{failures}/20 models exceeded the finite-difference tolerance"),
    );
}

fn fd_check_once(objective: Objective, seed: u64) -> bool {
    use cs_smooth::train::{batch_loss, BatchItem};
    let cfg = TrainConfig {
        objective,
        k_samples: 3,
        beta: 4.0,
        gamma1: 1.0,
        gamma2: 2.0,
        seed,
        ..TrainConfig::default()
    };
    let mut init = rng::stream(seed, "acc-fd-init", &[]);
    let mut model = MlpModel::new_random(2, 6, 3, cfg.beta, &mut init);
    let cost = CostMatrix::seedwise(3, &[0]).unwrap();
    let mut data_rng = rng::stream(seed, "acc-fd-data", &[]);
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| rng::gaussian_vec(&mut data_rng, 1.0, 2))
        .collect();
    let batch: Vec<BatchItem> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| BatchItem {
            x,
            y: i % 3,
            example: i as u64,
        })
        .collect();
    let (_, grad) = batch_loss(&model, &batch, &cost, &cfg, 0).unwrap();
    let analytic = MlpModel::grad_flat(&grad);
    let params = model.params_flat();
    let h = 1e-5;
    for (i, &p) in params.iter().enumerate() {
        let mut plus = params.clone();
        let mut minus = params.clone();
        plus[i] = p + h;
        minus[i] = p - h;
        model.set_params_flat(&plus);
        let lp = batch_loss(&model, &batch, &cost, &cfg, 0).unwrap().0.total;
        model.set_params_flat(&minus);
        let lm = batch_loss(&model, &batch, &cost, &cfg, 0).unwrap().0.total;
        model.set_params_flat(&params);
        let fd = (lp - lm) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs());
        if scale < 1e-7 {
            continue;
        }
        if (fd - analytic[i]).abs() / scale > 1e-4 {
            // tolerate coordinates whose perturbation crosses an indicator
            // gate: there the loss itself is discontinuous
            let l0 = batch_loss(&model, &batch, &cost, &cfg, 0).unwrap().0.total;
            if ((lp + lm) / 2.0 - l0).abs() / l0.abs().max(1.0) > 1e-9 {
                continue;
            }
            return false;
        }
    }
    true
}

struct MethodOutcome {
    acc: Vec<f64>,
    rob_cs: Vec<f64>,
}

fn run_method(objective: Objective, seed: u64) -> Result<(f64, f64)> {
    let (train_set, test_set) = gen_synthetic("blobs-5", seed)?;
    let cost = CostMatrix::seedwise(5, &[3])?;
    let cfg = TrainConfig {
        objective,
        sigma: 0.5,
        lambda: 2.0,
        gamma1: 4.0,
        gamma2: 16.0,
        alpha_w: 1.2,
        k_samples: 16,
        beta: 16.0,
        lr: 0.05,
        epochs: 200,
        batch_size: 32,
        seed,
        smooth_max: true,
    };
    let mut init = rng::stream(seed, "bench-init", &[]);
    let mut model = MlpModel::new_random(train_set.d, 32, train_set.m, cfg.beta, &mut init);
    train(&mut model, &train_set, &cost, &cfg)?;

    let smoothing = SmoothingConfig {
        sigma: 0.5,
        n0: 50,
        n: 2000,
        alpha: 0.001,
    };
    let (report, _) = run_experiment(
        &BaseClassifier::Mlp(model),
        &test_set,
        &cost,
        &smoothing,
        0.5,
        seed,
        &[0.0],
    )?;
    Ok((report.acc, report.rob_cs))
}

#[test]
fn criterion_7_method_comparison() {
    let seeds: Vec<u64> = (0..5).collect();
    let mut outcomes = Vec::new();
    for objective in [Objective::Cohen, Objective::CohenR, Objective::CsMacer] {
        let mut out = MethodOutcome {
            acc: Vec::new(),
            rob_cs: Vec::new(),
        };
        for &seed in &seeds {
            let (acc, rob) = run_method(objective, seed).unwrap();
            out.acc.push(acc);
            out.rob_cs.push(rob);
        }
        outcomes.push(out);
    }
    let acc_cohen = median(&mut outcomes[0].acc.clone());
    let acc_macer = median(&mut outcomes[2].acc.clone());
    let rob_cohen = median(&mut outcomes[0].rob_cs.clone());
    let rob_cohen_r = median(&mut outcomes[1].rob_cs.clone());
    let rob_macer = median(&mut outcomes[2].rob_cs.clone());
    verdict(
        "7 (method comparison)",
        rob_macer >= rob_cohen_r && rob_cohen_r >= rob_cohen && acc_macer >= acc_cohen - 0.05,
        &format!(
            "median rob_cs: margin-trained {rob_macer:.3} >= reweighted {rob_cohen_r:.3} >= \
             plain {rob_cohen:.3}; acc {acc_macer:.3} vs {acc_cohen:.3}"
        ),
    );
}

#[test]
fn criterion_8_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_cs-smooth");
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);

    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "cs-smooth {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let body = |name: &str| {
        let text = std::fs::read_to_string(p(name)).unwrap();
        // the timestamp is confined to the first line
        text.split_once('\n').unwrap().1.to_string()
    };

    let train_csv = p("train.csv");
    let test_csv = p("test.csv");
    run(&[
        "gen-data",
        "--seed",
        "1",
        "--out-train",
        train_csv.to_str().unwrap(),
        "--out-test",
        test_csv.to_str().unwrap(),
    ]);

    run(&[
        "train",
        "--dataset",
        train_csv.to_str().unwrap(),
        "--cost",
        "seedwise:3",
        "--objective",
        "cohen",
        "--epochs",
        "3",
        "--seed",
        "9",
        "--out-model",
        p("model.txt").to_str().unwrap(),
    ]);
    let model_bytes = std::fs::read(p("model.txt")).unwrap();

    for pass in ["a", "b"] {
        run(&[
            "certify",
            "--model",
            p("model.txt").to_str().unwrap(),
            "--dataset",
            test_csv.to_str().unwrap(),
            "--cost",
            "seedwise:3",
            "--n0",
            "20",
            "--n",
            "500",
            "--seed",
            "4",
            "--out",
            p(&format!("cert_{pass}.csv")).to_str().unwrap(),
            "--out-report",
            p(&format!("report_{pass}.json")).to_str().unwrap(),
        ]);
        run(&[
            "curve",
            "--model",
            p("model.txt").to_str().unwrap(),
            "--dataset",
            test_csv.to_str().unwrap(),
            "--cost",
            "seedwise:3",
            "--n0",
            "20",
            "--n",
            "500",
            "--steps",
            "10",
            "--seed",
            "4",
            "--out",
            p(&format!("curve_{pass}.csv")).to_str().unwrap(),
        ]);
    }

    // retraining with the same seed reproduces the model bit for bit
    run(&[
        "train",
        "--dataset",
        train_csv.to_str().unwrap(),
        "--cost",
        "seedwise:3",
        "--objective",
        "cohen",
        "--epochs",
        "3",
        "--seed",
        "9",
        "--out-model",
        p("model2.txt").to_str().unwrap(),
    ]);
    let model_rerun = std::fs::read(p("model2.txt")).unwrap();

    let reports_equal =
        std::fs::read(p("report_a.json")).unwrap() == std::fs::read(p("report_b.json")).unwrap();
    let pass = body("cert_a.csv") == body("cert_b.csv")
        && body("curve_a.csv") == body("curve_b.csv")
        && reports_equal
        && model_bytes == model_rerun;
    verdict(
        "8 (determinism)",
        pass,
        "re-runs with identical seeds reproduce outputs byte for byte past the timestamp line",
    );
}
