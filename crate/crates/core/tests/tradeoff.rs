//! Reweighting trade-off: raising the sensitive-example weight buys
//! cost-sensitive robustness at the expense of overall certified accuracy.

mod common;

use cs_smooth::certify::SmoothingConfig;
use cs_smooth::classifier::{BaseClassifier, MlpModel};
use cs_smooth::cost::CostMatrix;
use cs_smooth::data::gen_synthetic;
use cs_smooth::eval::run_experiment;
use cs_smooth::rng;
use cs_smooth::train::{train, Objective, TrainConfig};

use common::median;

fn run_weighted(alpha_w: f64, seed: u64) -> (f64, f64) {
    let (train_set, test_set) = gen_synthetic("blobs-5", seed).unwrap();
    let cost = CostMatrix::seedwise(5, &[3]).unwrap();
    let cfg = TrainConfig {
        objective: Objective::CohenR,
        alpha_w,
        lr: 0.05,
        epochs: 200,
        seed,
        ..TrainConfig::default()
    };
    let mut init = rng::stream(seed, "tradeoff-init", &[]);
    let mut model = MlpModel::new_random(train_set.d, 32, train_set.m, cfg.beta, &mut init);
    train(&mut model, &train_set, &cost, &cfg).unwrap();

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
    )
    .unwrap();
    (report.acc, report.rob_cs)
}

#[test]
fn sensitive_weight_trades_accuracy_for_robustness() {
    let weights = [1.0, 1.5, 2.0, 4.0];
    let mut med_acc = Vec::new();
    let mut med_rob = Vec::new();
    for &w in &weights {
        let mut accs = Vec::new();
        let mut robs = Vec::new();
        for seed in 0..5u64 {
            let (acc, rob) = run_weighted(w, seed);
            accs.push(acc);
            robs.push(rob);
        }
        med_acc.push(median(&mut accs));
        med_rob.push(median(&mut robs));
    }
    println!("weights {weights:?}: acc {med_acc:?}, rob_cs {med_rob:?}");
    for i in 1..weights.len() {
        assert!(
            med_rob[i] >= med_rob[i - 1],
            "rob_cs medians not nondecreasing: {med_rob:?}"
        );
        assert!(
            med_acc[i] <= med_acc[i - 1],
            "acc medians not nonincreasing: {med_acc:?}"
        );
    }
}
