use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csoa::bench::{grid_solve, primal_dual_solve, DeskQp, GridConfig, PrimalDualConfig};
use csoa::constants::{estimate_constants, EstimateConfig};
use csoa::linalg::{dist, norm};
use csoa::problems::{
    ingest_csv, load_csv, synthetic_fairness_data, synthetic_mc_instance, CsvSchema,
    FairClassificationProblem, FairData, SyntheticFairnessConfig, SyntheticMcConfig,
};
use csoa::solvers::{run_collect, Algorithm, ScheduleT1, TraceConfig};
use csoa::{HyperParams, StochasticProblem};

fn random_qp(rng: &mut ChaCha8Rng) -> DeskQp {
    loop {
        let mu = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let a = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let b = rng.random_range(-0.5..1.5);
        if let Ok(qp) = DeskQp::new(mu, a, b, 1.0, 0.5) {
            if qp.slater_margin_l2() > 0.2 {
                return qp;
            }
        }
    }
}

#[test]
fn grid_search_agrees_with_closed_form_on_random_qps() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let eps = 1e-3;
    for _ in 0..20 {
        let qp = random_qp(&mut rng);
        let exact = qp.solution(0.0).unwrap();
        let grid = grid_solve(&qp, &qp.ball(), &GridConfig::cube(2, 1.0, eps)).unwrap();
        let grad: Vec<f64> = exact.x_star.iter().zip(&qp.mu).map(|(x, m)| 2.0 * (x - m)).collect();
        // a feasible lattice point lies within two cell diagonals of x*
        let reach = 2.0 * 2f64.sqrt() * eps;
        let slack = reach * norm(&grad) + reach * reach;
        assert!(grid.objective >= exact.f_star - 1e-12, "{qp:?}");
        assert!(grid.objective - exact.f_star <= slack, "{qp:?}: {} vs {}", grid.objective, exact.f_star);
    }
}

#[test]
fn tightened_example_matches_hand_algebra_and_grid() {
    let qp = DeskQp::new(vec![2.0, 0.0], vec![1.0, 0.0], 1.0, 10.0, 0.5).unwrap();
    let s = qp.solution(0.2).unwrap();
    assert!(dist(&s.x_upsilon, &[0.8, 0.0]) <= 1e-15);
    assert!(dist(&s.x_star, &[1.0, 0.0]) <= 1e-15);
    assert!((s.f_upsilon - s.f_star - 0.44).abs() <= 1e-12);

    let tightened = DeskQp::new(vec![2.0, 0.0], vec![1.0, 0.0], 0.8, 10.0, 0.5).unwrap();
    let eps = 1e-4;
    let cfg = GridConfig {
        lower: vec![0.7, -0.05],
        upper: vec![0.9, 0.05],
        resolution: eps,
    };
    let grid = grid_solve(&tightened, &tightened.ball(), &cfg).unwrap();
    assert!(dist(&grid.x, &s.x_upsilon) <= 2.0 * eps);
    assert!((grid.objective - s.f_upsilon).abs() <= 2.0 * eps * 2.4);
}

#[test]
fn tightening_costs_at_most_c_times_upsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut instances = vec![DeskQp::default()];
    instances.extend((0..10).map(|_| random_qp(&mut rng)));
    for qp in instances {
        let c = qp.exact_constants();
        for upsilon in [0.01, 0.05, 0.1, c.slater_sigma / 2.0] {
            let s = qp.solution(upsilon).unwrap();
            assert!(s.f_upsilon - s.f_star <= c.c() * upsilon + 1e-12, "{qp:?} at {upsilon}");
            assert!(s.f_upsilon >= s.f_star - 1e-12);
        }
    }
}

#[test]
fn estimated_b_is_close_to_analytic_rms_b() {
    let qp = DeskQp::default();
    let m = qp.mu.len() as f64;
    // uniform draws on the disc: E|x|^2 = R^2 / 2
    let rms_sigma_f = (4.0 * (qp.radius * qp.radius / 2.0 + norm(&qp.mu).powi(2) + m)).sqrt();
    let analytic = rms_sigma_f.max(norm(&qp.a));
    for seed in 0..5 {
        let cfg = EstimateConfig {
            seed,
            slater_point: Some(vec![0.0; 2]),
            ..Default::default()
        };
        let est = estimate_constants(&qp, &qp.ball(), &cfg).unwrap();
        let ratio = est.b() / analytic;
        assert!((1.0..=1.5).contains(&ratio), "seed {seed}: ratio {ratio}");
        assert_eq!(est.slater_sigma, qp.b);
    }
}

fn newton_logistic(data: &FairData) -> Vec<f64> {
    let (n, m) = (data.len(), data.n_features);
    let x = DMatrix::from_row_slice(n, m, &data.features);
    let y = DVector::from_column_slice(&data.labels);
    let mut w = DVector::zeros(m);
    for _ in 0..100 {
        let z = &x * &w;
        let p = z.map(|v| 1.0 / (1.0 + (-v).exp()));
        let grad = x.transpose() * (&p - &y) / n as f64;
        if grad.norm() <= 1e-13 {
            break;
        }
        let weights = p.map(|v| v * (1.0 - v));
        let hess = x.transpose() * DMatrix::from_diagonal(&weights) * &x / n as f64;
        w -= hess.cholesky().expect("logistic hessian is positive definite").solve(&grad);
    }
    w.iter().copied().collect()
}

#[test]
fn slack_fairness_reference_matches_unconstrained_logistic_fit() {
    let cfg = SyntheticFairnessConfig {
        n_samples: 200,
        ..Default::default()
    };
    let data = synthetic_fairness_data(&cfg, 21).unwrap();
    let newton = newton_logistic(&data);
    assert!(norm(&newton) < 10.0);
    let p = FairClassificationProblem::new(data, 100.0, 10.0).unwrap();
    let pd = PrimalDualConfig {
        step: 0.2,
        kkt_tol: 1e-9,
        ..Default::default()
    };
    let sol = primal_dual_solve(&p, &p.set(), vec![0.0; 3], &pd).unwrap();
    assert!(sol.kkt_residual.unwrap() <= 1e-9);
    assert!(sol.lambda.iter().all(|l| *l == 0.0));
    assert!(p.constraints(&sol.x).iter().all(|h| *h < -50.0));
    assert!(dist(&sol.x, &newton) <= 1e-6, "{:?} vs {newton:?}", sol.x);
}

#[test]
fn theorem_schedule_keeps_duals_bounded_and_violation_small() {
    let qp = DeskQp::default();
    let c = qp.exact_constants();
    let horizon = 10_000;
    let s = ScheduleT1::new(&c, horizon).unwrap();
    let bound = 2.0 * (c.c() + 1.0);
    for seed in 1..=3 {
        let hp = HyperParams {
            eta: s.eta(),
            delta: s.delta(),
            upsilon: s.upsilon(),
            rho: 1.0,
            horizon,
            seed,
        };
        let r = run_collect(Algorithm::Csoa, &qp, &qp.ball(), &hp, vec![0.0; 2], &TraceConfig::every(1))
            .unwrap();
        assert!(r.max_lambda_norm < bound, "seed {seed}: {} vs {bound}", r.max_lambda_norm);
        let h_avg = r.final_record().unwrap().h_avg[0];
        assert!(h_avg <= 1e-3, "seed {seed}: {h_avg}");
    }
}

#[test]
fn mc_observation_counts_are_exact() {
    let cfg = SyntheticMcConfig {
        rows: 40,
        cols: 60,
        rank: 4,
        batch: 10,
        ..Default::default()
    };
    for seed in 0..3 {
        let inst = synthetic_mc_instance(&cfg, seed).unwrap();
        let zeros = inst.truth.iter().filter(|v| **v == 0.0).count();
        let nonzeros = inst.truth.len() - zeros;
        let obs = inst.problem.observed();
        let obs_zero = obs.iter().filter(|o| inst.truth[o.0] == 0.0).count();
        assert_eq!(obs_zero, (cfg.observe_zero * zeros as f64).round() as usize);
        assert_eq!(obs.len() - obs_zero, (cfg.observe_nonzero * nonzeros as f64).round() as usize);
        assert_eq!(obs.len() + inst.problem.unobserved().len(), inst.truth.len());

        let ratio = norm(&inst.noise) / norm(&inst.truth);
        assert!((ratio - cfg.gamma).abs() <= 1e-12);
        for &(k, v) in obs {
            assert!((v - inst.truth[k] - inst.noise[k]).abs() <= 1e-12);
        }
        let beta: f64 = inst.problem.unobserved().iter().map(|&k| inst.truth[k].powi(2)).sum::<f64>() / 2.0;
        assert!((inst.problem.beta() - beta).abs() <= 1e-9 * beta.max(1.0));
    }
}

fn label_sensitive_correlation(data: &FairData) -> f64 {
    let n = data.len() as f64;
    let my = data.labels.iter().sum::<f64>() / n;
    let ms = data.sensitive.iter().sum::<f64>() / n;
    let (mut cov, mut vy, mut vs) = (0.0, 0.0, 0.0);
    for (y, s) in data.labels.iter().zip(&data.sensitive) {
        cov += (y - my) * (s - ms);
        vy += (y - my).powi(2);
        vs += (s - ms).powi(2);
    }
    cov / (vy * vs).sqrt()
}

#[test]
fn synthetic_fairness_labels_are_balanced() {
    let cfg = SyntheticFairnessConfig::default();
    for seed in 0..5 {
        let data = synthetic_fairness_data(&cfg, seed).unwrap();
        assert_eq!(data.len(), 4000);
        let balance = data.labels.iter().sum::<f64>() / 4000.0;
        assert!((balance - 0.5).abs() <= 0.03, "seed {seed}: {balance}");
    }
}

#[test]
fn smaller_rotation_correlates_sensitive_attribute_more() {
    let quarter = SyntheticFairnessConfig::default();
    let eighth = SyntheticFairnessConfig {
        phi: std::f64::consts::PI / 8.0,
        ..Default::default()
    };
    for seed in 0..3 {
        let a = label_sensitive_correlation(&synthetic_fairness_data(&eighth, seed).unwrap());
        let b = label_sensitive_correlation(&synthetic_fairness_data(&quarter, seed).unwrap());
        assert!(a.abs() > b.abs(), "seed {seed}: {a} vs {b}");
    }
}

fn write_csv(rows: usize, seed: u64) -> tempfile::NamedTempFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let mut out = String::from("age,hours,job,income,sex\n");
    let jobs = ["clerk", "farmer", "nurse"];
    for _ in 0..rows {
        out.push_str(&format!(
            "{:.3},{:.2},{},{},{}\n",
            rng.random_range(17.0..90.0),
            rng.random_range(1.0..99.0),
            jobs[rng.random_range(0..3)],
            if rng.random_bool(0.3) { ">50K" } else { "<=50K" },
            if rng.random_bool(0.6) { "Male" } else { "Female" },
        ));
    }
    file.write_all(out.as_bytes()).unwrap();
    file
}

fn schema() -> CsvSchema {
    CsvSchema {
        label_positive: Some(">50K".into()),
        sensitive_positive: Some("Male".into()),
        ..CsvSchema::new("income", "sex")
    }
}

#[test]
fn adult_sized_split_has_expected_train_size() {
    let file = write_csv(45_000, 1);
    let split = ingest_csv(file.path(), &schema(), 9).unwrap();
    assert!(split.train.len().abs_diff(28_350) <= 1);
    assert!(split.validation.len().abs_diff(3_150) <= 1);
    assert_eq!(split.test.len(), 13_500);
}

#[test]
fn standardized_columns_have_zero_mean_unit_std() {
    let file = write_csv(500, 2);
    let data = load_csv(file.path(), &schema()).unwrap();
    let n = data.len() as f64;
    let intercept = data.feature_names.iter().position(|f| f == "intercept");
    for j in (0..data.n_features).filter(|j| Some(*j) != intercept) {
        let col: Vec<f64> = (0..data.len()).map(|i| data.row(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 1e-12, "{}: mean {mean}", data.feature_names[j]);
        assert!((sd - 1.0).abs() <= 1e-12, "{}: sd {sd}", data.feature_names[j]);
    }
}
