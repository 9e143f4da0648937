//! Acceptance suite. Prints one PASS or FAIL line per criterion and
//! exits non-zero when a criterion fails that is not a recorded deviation.
//!
//! Run a subset with `cargo test --test acceptance -- 3 5`.

use std::time::{Duration, Instant};

use fsvi::gradcheck::bound_gradient_errors;
use fsvi::models::data::{synth_classification_data, synth_regression_data, BlobKind};
use fsvi::models::{
    AttenuationModel, AzzaliniTarget, CauchyPpca, CauchyPpcaParams, GaussianTarget, LogisticRegression, RbfDesign,
    RbfRegression, SoftmaxRegression, REFERENCE_COEFFICIENTS,
};
use fsvi::scg::FnObjective;
use fsvi::{
    kl_gaussian_prior, lower_bound_fs, scg_maximise, update_alpha, update_beta, GaussianNoise, Hyperparameters,
    Prior, SampleSet, ScgOptions, TargetModel, VariationalPosterior,
};
use fsvi_cli::{run_pipeline, ExperimentConfig, ExperimentKind, Outcome};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Criteria that are known not to reproduce; they still run and print FAIL.
const KNOWN_DEVIATIONS: &[u32] = &[5];

/// Reference KL(q || p) values per bivariate target.
const REFERENCE_PROPOSED_KLD: [f64; 3] = [0.351, 0.585, 1.103];
const REFERENCE_LAPLACE_KLD: [f64; 3] = [4.570, 13.915, 1.384];

struct Check {
    passed: bool,
    detail: String,
}

fn done(passed: bool, detail: impl Into<String>) -> Check {
    Check {
        passed,
        detail: detail.into(),
    }
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

fn pipeline(kind: ExperimentKind, seed: u64, edit: impl FnOnce(&mut ExperimentConfig)) -> Outcome {
    let mut cfg = ExperimentConfig::new(kind, seed);
    edit(&mut cfg);
    run_pipeline(&cfg).unwrap_or_else(|e| panic!("{} seed {seed}: {e}", kind.name()))
}

fn metric(out: &Outcome, name: &str) -> f64 {
    out.metric(name).unwrap_or_else(|| panic!("missing metric {name}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

fn rbf_problem(n: usize, centres: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let (x, y) = synth_regression_data(n, seed).unwrap();
    let x = DMatrix::from_column_slice(n, 1, x.as_slice());
    let design = RbfDesign::from_inputs(&x, Some(centres), 1.0).unwrap().design(&x).unwrap();
    (design, y)
}

fn random_posterior(r: &mut ChaCha8Rng, centre: &DVector<f64>, spread: f64, blocks: &[usize], scale: f64) -> VariationalPosterior {
    let m = centre.len();
    let mu = centre + normal_matrix(r, m, 1).column(0) * spread;
    let factors: Vec<DMatrix<f64>> = blocks
        .iter()
        // perturbation norm stays near 0.6, keeping every block far from singular
        .map(|&b| (DMatrix::identity(b, b) + normal_matrix(r, b, b) * (0.3 / (b as f64).sqrt())) * scale)
        .collect();
    VariationalPosterior::from_block_factors(mu, &factors).unwrap()
}

fn gradient_errors<M: TargetModel>(model: &M, centre: DVector<f64>, spread: f64, scale: f64, seed: u64) -> f64 {
    let mut r = rng(seed);
    let blocks = model.posterior_blocks().unwrap_or_else(|| vec![model.dim()]);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let post = random_posterior(&mut r, &centre, spread, &blocks, scale);
        let alpha = r.random_range(0.2..3.0);
        let beta = model.regressor().map(|_| r.random_range(0.5..20.0));
        let hyper = Hyperparameters::new(alpha, beta).unwrap();
        let z = SampleSet::draw(6, model.dim(), 500 + k).unwrap();
        let (e_mu, e_l) = bound_gradient_errors(model, &post, &hyper, &z, 1e-5).unwrap();
        worst = worst.max(e_mu).max(e_l);
    }
    worst
}

fn gradient_fidelity() -> Check {
    let (design, y) = rbf_problem(15, 5, 1);
    let rbf = RbfRegression::from_design(design, y).unwrap();
    let two = synth_classification_data(&BlobKind::TwoClass { separation: 3.0 }, 20, 3).unwrap();
    let logistic = LogisticRegression::new(with_bias(&two.inputs), two.binary_labels()).unwrap();
    let three = synth_classification_data(&BlobKind::KClass { classes: 3, radius: 3.0 }, 21, 4).unwrap();
    let softmax = SoftmaxRegression::new(with_bias(&three.inputs), three.one_hot()).unwrap();
    let mut r = rng(6);
    let cauchy = CauchyPpca::new(
        normal_matrix(&mut r, 4, 5) * 2.0,
        CauchyPpcaParams::new(normal_matrix(&mut r, 5, 2), normal_matrix(&mut r, 5, 1).column(0).into_owned(), 0.7)
            .unwrap(),
    )
    .unwrap();
    let reference = AttenuationModel::reference_params();
    let attenuation = GaussianNoise::new(AttenuationModel::simulate(40, &reference, 0.3, 8).unwrap(), Prior::Flat);
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
    let gaussian = GaussianTarget::new(DVector::from_vec(vec![1.0, -1.0, 0.5]), &cov).unwrap();

    let mut results = vec![
        ("rbf", gradient_errors(&rbf, DVector::zeros(rbf.dim()), 0.5, 0.3, 1)),
        ("logistic", gradient_errors(&logistic, DVector::zeros(logistic.dim()), 1.0, 0.3, 2)),
        ("softmax", gradient_errors(&softmax, DVector::zeros(softmax.dim()), 1.0, 0.3, 3)),
        ("cauchy-ppca", gradient_errors(&cauchy, DVector::zeros(cauchy.dim()), 1.0, 0.3, 4)),
        ("attenuation", gradient_errors(&attenuation, reference, 0.05, 0.02, 5)),
        ("gaussian", gradient_errors(&gaussian, DVector::zeros(3), 1.0, 0.5, 6)),
    ];
    for (i, a) in REFERENCE_COEFFICIENTS.iter().enumerate() {
        results.push(("azzalini", gradient_errors(&AzzaliniTarget::new(*a), DVector::zeros(2), 0.7, 0.4, 7 + i as u64)));
    }
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let which = results.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    done(
        worst < 1e-5,
        format!("{} models x 20 configurations, worst relative error {worst:.2e} ({which}) vs 1e-5", results.len()),
    )
}

fn kl_correctness() -> Check {
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = r.random_range(1..=5usize);
        let alpha = r.random_range(0.2..3.0);
        let mu = normal_matrix(&mut r, m, 1).column(0) * 1.5;
        let mut l = normal_matrix(&mut r, m, m).lower_triangle() * 0.4;
        for i in 0..m {
            l[(i, i)] = r.random_range(0.3..1.5);
        }
        let post = VariationalPosterior::new(mu.clone(), l.clone()).unwrap();
        let closed = kl_gaussian_prior(&post, alpha).unwrap();

        // E_q[log q(w) - log p(w)] from draws w = mu + L z
        let log_det: f64 = (0..m).map(|i| l[(i, i)].ln()).sum();
        let draws = 1_000_000;
        let mut total = 0.0;
        let mut z = DVector::zeros(m);
        for _ in 0..draws {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut r);
            }
            let w = &mu + &l * &z;
            let log_q = -log_det - 0.5 * z.norm_squared();
            let log_p = 0.5 * m as f64 * alpha.ln() - 0.5 * alpha * w.norm_squared();
            total += log_q - log_p;
        }
        let estimate = total / draws as f64;
        worst = worst.max((estimate - closed).abs() / closed.abs());
    }
    done(worst < 0.01, format!("10 configurations, worst relative gap {worst:.2e} vs 1e-2"))
}

fn exact_agreement() -> Check {
    let out = pipeline(ExperimentKind::Blr, 1, |_| {});
    let rmse = metric(&out, "mean_prediction_rmse");
    let gap = metric(&out, "covariance_relative_frobenius");
    done(
        rmse < 0.05 && gap < 0.25,
        format!("mean-prediction rmse {rmse:.4} vs 0.05, covariance gap {gap:.4} vs 0.25"),
    )
}

fn overfitting_detection() -> Check {
    let (mut large_ok, mut small_flagged) = (0, 0);
    for seed in 1..=10 {
        let out = pipeline(ExperimentKind::BlrOverfit, seed, |c| {
            c.samples = 100;
            c.holdout_samples = 500;
        });
        large_ok += usize::from(metric(&out, "s100_overfitting") == 0.0);
        small_flagged += usize::from(metric(&out, "s10_overfitting") == 1.0);
    }
    done(
        large_ok >= 9 && small_flagged >= 9,
        format!("S=100 ok on {large_ok}/10 seeds, S=10 overfitting on {small_flagged}/10 seeds, need 9"),
    )
}

fn bivariate_ordering() -> Check {
    let mut proposed = vec![Vec::new(); 3];
    let mut laplace = vec![Vec::new(); 3];
    for seed in 1..=10 {
        let out = pipeline(ExperimentKind::Bivariate, seed, |_| {});
        for t in 0..3 {
            proposed[t].push(metric(&out, &format!("target{t}_proposed_kld_approx_to_target")));
            laplace[t].push(metric(&out, &format!("target{t}_laplace_kld_approx_to_target")));
        }
    }
    let mut passed = true;
    let mut parts = Vec::new();
    for t in 0..3 {
        let p = median(proposed[t].clone());
        let l = median(laplace[t].clone());
        let ordered = p < l;
        let ratio = p / REFERENCE_PROPOSED_KLD[t];
        let close = (0.5..=2.0).contains(&ratio);
        passed &= ordered && close;
        parts.push(format!(
            "target {t}: proposed {p:.3} (reference {}, x{ratio:.2}) {} Laplace {l:.3} (reference {})",
            REFERENCE_PROPOSED_KLD[t],
            if ordered { "<" } else { ">=" },
            REFERENCE_LAPLACE_KLD[t]
        ));
    }
    done(passed, format!("median KL(q||p) over 10 seeds; {}", parts.join("; ")))
}

fn classification_parity() -> Check {
    let binary = metric(&pipeline(ExperimentKind::Logistic, 1, |c| c.max_iter = 100), "accuracy_mean");
    let multi = metric(&pipeline(ExperimentKind::Multiclass, 1, |c| c.max_iter = 100), "accuracy_mean");
    let mut passed = binary >= 0.90 && multi >= 0.90;
    let mut detail = format!("two-class accuracy {binary:.3}, three-class accuracy {multi:.3} vs 0.90");
    match std::env::var_os("FSVI_BANANA_DIR") {
        Some(dir) => {
            let out = pipeline(ExperimentKind::Logistic, 1, |c| c.data = Some(dir.into()));
            let banana = metric(&out, "accuracy_mean");
            passed &= (banana - 0.889).abs() <= 0.02;
            detail.push_str(&format!("; Banana {banana:.4} vs 0.889 +/- 0.02"));
        }
        None => detail.push_str("; Banana splits not supplied (set FSVI_BANANA_DIR)"),
    }
    done(passed, detail)
}

fn robust_denoising() -> Check {
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 1..=10 {
        let out = pipeline(ExperimentKind::CauchyPpca, seed, |_| {});
        let (ppca, cauchy) = (metric(&out, "ppca_mean_error"), metric(&out, "cauchy_ppca_mean_error"));
        wins += usize::from(cauchy < ppca);
        ratios.push(cauchy / ppca);
    }
    done(
        wins >= 9,
        format!("Cauchy-PPCA better on {wins}/10 seeds (need 9), median error ratio {:.3}", median(ratios)),
    )
}

fn hyperparameter_stationarity() -> Check {
    let mut r = rng(88);
    let (design, y) = rbf_problem(40, 9, 3);
    let rbf = RbfRegression::from_design(design.clone(), y.clone()).unwrap();
    let (mut worst_alpha, mut worst_beta, mut worst_fd): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..50 {
        let m = rbf.dim();
        let scale = r.random_range(0.05..0.5);
        let post = random_posterior(&mut r, &DVector::zeros(m), 1.0, &[m], scale);
        let samples = SampleSet::draw(r.random_range(5..40), m, 900 + k).unwrap();

        let alpha = update_alpha(&post).unwrap();
        let spread = post.mu().norm_squared() + post.l().norm_squared();
        worst_alpha = worst_alpha.max((0.5 * m as f64 / alpha - 0.5 * spread).abs());

        let beta = update_beta(rbf.regressor().unwrap(), &post, &samples).unwrap();
        let residual: f64 = samples.iter().map(|z| (&y - &design * post.transform(z)).norm_squared()).sum();
        let d_beta = 0.5 * y.len() as f64 / beta - 0.5 * residual / samples.len() as f64;
        worst_beta = worst_beta.max(d_beta.abs());

        // the bound itself is flat in both directions at the updated values
        let at = |a: f64, b: f64| lower_bound_fs(&rbf, &post, &Hyperparameters::new(a, Some(b)).unwrap(), &samples).unwrap();
        let (ha, hb) = (1e-4 * alpha, 1e-4 * beta);
        let fd_a = (at(alpha + ha, beta) - at(alpha - ha, beta)) / (2.0 * ha);
        let fd_b = (at(alpha, beta + hb) - at(alpha, beta - hb)) / (2.0 * hb);
        let scale = 1.0 + at(alpha, beta).abs();
        worst_fd = worst_fd.max((fd_a * alpha).abs() / scale).max((fd_b * beta).abs() / scale);
    }
    done(
        worst_alpha < 1e-8 && worst_beta < 1e-8 && worst_fd < 1e-6,
        format!(
            "50 states, |dL/dalpha| {worst_alpha:.1e}, |dL/dbeta| {worst_beta:.1e} vs 1e-8 (finite-difference check {worst_fd:.1e})"
        ),
    )
}

fn optimizer_contract() -> Check {
    let opts = ScgOptions {
        max_iters: 200,
        grad_tol: 1e-8,
        ..Default::default()
    };
    let mut solved = 0;
    let mut most_iters = 0;
    for seed in 0..100 {
        let mut r = rng(10_000 + seed);
        let n = 20;
        let b = normal_matrix(&mut r, n, n);
        let a = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
        let c = normal_matrix(&mut r, n, 1).column(0).into_owned();
        let (a2, c2) = (a.clone(), c.clone());
        let obj = FnObjective {
            value: move |x: &DVector<f64>| -0.5 * x.dot(&(&a * x)) + c.dot(x),
            gradient: move |x: &DVector<f64>| -(&a2 * x) + &c2,
        };
        let out = scg_maximise(&obj, DVector::zeros(n), &opts).unwrap();
        if out.gradient_norm < 1e-8 && out.iterations <= 200 {
            solved += 1;
        }
        most_iters = most_iters.max(out.iterations);
    }
    done(
        solved == 100,
        format!("{solved}/100 quadratics solved to gradient norm 1e-8, at most {most_iters} iterations"),
    )
}

fn flat_prior_regression() -> Check {
    let out = pipeline(ExperimentKind::FlatRegression, 1, |_| {});
    let (p_mean, p_sd) = (metric(&out, "proposed_mse_mean"), metric(&out, "proposed_mse_sd"));
    let (l_mean, l_sd) = (metric(&out, "laplace_mse_mean"), metric(&out, "laplace_mse_sd"));
    let failures = metric(&out, "laplace_failures");
    done(
        p_sd <= l_sd,
        format!(
            "10 splits, proposed {p_mean:.4} +/- {p_sd:.4}, Laplace {l_mean:.4} +/- {l_sd:.4} ({failures} Laplace failures)"
        ),
    )
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "gradient fidelity", limit: Some(Duration::from_secs(30)), run: gradient_fidelity },
        Criterion { id: 2, title: "KL correctness", limit: None, run: kl_correctness },
        Criterion { id: 3, title: "exact-inference agreement", limit: Some(Duration::from_secs(120)), run: exact_agreement },
        Criterion { id: 4, title: "overfitting detection", limit: Some(Duration::from_secs(300)), run: overfitting_detection },
        Criterion { id: 5, title: "bivariate KLD ordering", limit: Some(Duration::from_secs(180)), run: bivariate_ordering },
        Criterion { id: 6, title: "classification parity", limit: None, run: classification_parity },
        Criterion { id: 7, title: "robust denoising", limit: Some(Duration::from_secs(600)), run: robust_denoising },
        Criterion { id: 8, title: "hyperparameter stationarity", limit: None, run: hyperparameter_stationarity },
        Criterion { id: 9, title: "optimizer contract", limit: None, run: optimizer_contract },
        Criterion { id: 10, title: "flat-prior regression variance", limit: None, run: flat_prior_regression },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();

    let mut unexpected = Vec::new();
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let check = (c.run)();
        let elapsed = start.elapsed();
        let Check { passed, mut detail } = check;
        let mut ok = passed;
        if let Some(limit) = c.limit {
            if elapsed > limit {
                ok = false;
                detail.push_str(&format!("; over the {} s runtime limit", limit.as_secs()));
            }
        }
        let status = match (ok, KNOWN_DEVIATIONS.contains(&c.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known deviation)",
            (false, false) => {
                unexpected.push(c.id);
                "FAIL"
            }
        };
        println!(
            "criterion {:>2} {status:<22} {}: {detail} [{:.1} s]",
            c.id,
            c.title,
            elapsed.as_secs_f64()
        );
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
