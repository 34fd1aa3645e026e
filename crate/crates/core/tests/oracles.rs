use fairbayes::harness::{half_split_protocol, make_synthetic, ClassifierSpec, SyntheticSpec};
use fairbayes::hdr::fit_hdr;
use fairbayes::kfold::sigma_over;
use fairbayes::metrics::metric_by_name;
use fairbayes::posterior::sample_joint;
use fairbayes::seed::rng;
use fairbayes::{DirichletPosterior, JointSampleMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

/// Dirichlet-multinomial pmf of `x` with `n = sum(x)` trials.
fn dirmult_ln_pmf(x: [u64; 4], alpha: [f64; 4]) -> f64 {
    let n: u64 = x.iter().sum();
    let a: f64 = alpha.iter().sum();
    let mut v = ln_gamma(n as f64 + 1.0) + ln_gamma(a) - ln_gamma(n as f64 + a);
    for i in 0..4 {
        v += ln_gamma(x[i] as f64 + alpha[i]) - ln_gamma(alpha[i]) - ln_gamma(x[i] as f64 + 1.0);
    }
    v
}

#[test]
fn sampled_accuracy_matches_enumerated_predictive() {
    let alpha = [4.0, 3.0, 2.0, 5.0];
    let n = 10u64;
    let (mut mean, mut second, mut mass) = (0.0, 0.0, 0.0);
    for tp in 0..=n {
        for tn in 0..=n - tp {
            for fp in 0..=n - tp - tn {
                let x = [tp, tn, fp, n - tp - tn - fp];
                let p = dirmult_ln_pmf(x, alpha).exp();
                let acc = (tp + tn) as f64 / n as f64;
                mass += p;
                mean += p * acc;
                second += p * acc * acc;
            }
        }
    }
    assert!((mass - 1.0).abs() < 1e-12);
    assert!((mean - 0.5).abs() < 1e-12);
    let var = second - mean * mean;

    let t = 100_000;
    let post = DirichletPosterior { group: "g".into(), alpha };
    let s = sample_joint(&[post], &[n], &[metric_by_name("accuracy").unwrap()], t, 31).unwrap();
    let col = s.column("accuracy").unwrap();
    let m = col.iter().sum::<f64>() / t as f64;
    let v = col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (t as f64 - 1.0);
    assert!((m - mean).abs() < 3.0 * (var / t as f64).sqrt(), "mean {m} vs {mean}");
    assert!((v - var).abs() / var < 0.03, "variance {v} vs {var}");
}

#[test]
fn uniform_prior_accuracy_mean_is_half() {
    let post = DirichletPosterior { group: "g".into(), alpha: [1.0; 4] };
    let t = 100_000;
    let s = sample_joint(&[post], &[0], &[metric_by_name("ar").unwrap()], t, 5);
    // Zero trials leave every ratio undefined.
    assert_eq!(s.unwrap().flagged_count(), t);
    let post = DirichletPosterior { group: "g".into(), alpha: [1.0; 4] };
    let s = sample_joint(&[post], &[40], &[metric_by_name("accuracy").unwrap()], t, 5).unwrap();
    let col = s.column("accuracy").unwrap();
    let m = col.iter().sum::<f64>() / t as f64;
    let sd = (col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / t as f64).sqrt();
    assert!((m - 0.5).abs() < 3.0 * sd / (t as f64).sqrt());
}

#[test]
fn hdr_area_agrees_with_contains_integral() {
    let mut r = rng(12);
    let rows: Vec<Vec<f64>> = (0..20_000)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            vec![0.5 + 0.1 * z1, 0.02 * (0.6 * z1 + 0.8 * z2)]
        })
        .collect();
    let m = JointSampleMatrix::from_rows(vec!["a".into(), "b".into()], &rows, None).unwrap();
    let region = fit_hdr(&m, 0.9, 256).unwrap();
    let b = region.bounds();
    let box_area = (b[0].1 - b[0].0) * (b[1].1 - b[1].0);
    let draws = 100_000;
    let inside = (0..draws)
        .filter(|_| {
            let p = [r.random_range(b[0].0..b[0].1), r.random_range(b[1].0..b[1].1)];
            region.contains(&p).unwrap()
        })
        .count();
    let integral = box_area * inside as f64 / draws as f64;
    assert!((integral - region.area).abs() / region.area < 0.03, "{integral} vs {}", region.area);
}

/// Monte Carlo of the half-split protocol for a classifier that is correct
/// on each instance independently with probability 1/2, regardless of
/// training: a half's CV accuracy is then its share of correct instances.
fn bernoulli_protocol_oracle(n: usize, replicates: usize) -> f64 {
    let mut r = rng(2);
    let half = n / 2;
    let mut acc = 0.0;
    for _ in 0..replicates {
        let correct: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut r);
        let share = |rows: &[usize]| rows.iter().filter(|&&i| correct[i]).count() as f64 / half as f64;
        let (mu, mu_c) = (share(&idx[..half]), share(&idx[half..2 * half]));
        acc += (mu - mu_c).powi(2) / 2.0;
    }
    acc / replicates as f64
}

#[test]
fn bernoulli_half_split_variance() {
    let (n, k, m) = (1000, 10, 5);
    let oracle = bernoulli_protocol_oracle(n, 1000);
    let sigma_bin = 0.25 / (n / 2) as f64 * (1.0 + (k as f64 - 1.0) / k as f64);
    assert!(oracle >= 0.5 * sigma_bin && oracle <= 2.0 * sigma_bin, "oracle {oracle} vs {sigma_bin}");

    let data = make_synthetic(&SyntheticSpec::two_groups(n, (0.8, 0.8), (0.8, 0.8), 1, 3)).unwrap();
    let accuracy = metric_by_name("accuracy").unwrap();
    // M = 5 is a noisy estimate; average over independent classifier and
    // protocol seeds before comparing with the oracle expectation.
    let runs = 40;
    let mean: f64 = (0..runs)
        .map(|s| {
            let spec = ClassifierSpec::bernoulli(0.5, 100 + s);
            let pairs = half_split_protocol(&data, &spec, k, m, &accuracy, "g0", s).unwrap();
            let v: f64 = sigma_over(&pairs).unwrap();
            assert!(v > 0.0);
            v
        })
        .sum::<f64>()
        / runs as f64;
    assert!(mean >= 0.5 * oracle && mean <= 2.0 * oracle, "protocol {mean} vs oracle {oracle}");
}
