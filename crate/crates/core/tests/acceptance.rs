//! End-to-end acceptance checks at reduced scale. Each test prints one
//! `PASS`/`FAIL` line with the measured quantities.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use randlocal::cli::{cmd_reduce, ProblemArgs, ReduceArgs, SecretSpec};
use randlocal::distinguish::{estimate_advantage, exact_likelihood_ratio, good_weight_scan, LikelihoodRatio, RepeatedEdge};
use randlocal::hypergraph::{mixing_time, transform, transform_distinct};
use randlocal::localfn::{evaluate, is_fairly_balanced, verify};
use randlocal::reduction::{hybrid_sample, predictor_gap, search, search_noisy};
use randlocal::stats::{kl_bernoulli, pinsker_tv_bound, tv_empirical_vs, EmpiricalCounts};
use randlocal::{
    cli::deviation_curve, cli::mixing_tv, Exact, Exec, GraphFamily, Hypergraph, NoisyPredicate, Predicate,
    ReductionConfig, Scalar, Secret, SecretOracle, Streams,
};

fn report(name: &str, pass: bool, started: Instant, limit: Duration, detail: String) {
    let elapsed = started.elapsed();
    let ok = pass && elapsed <= limit;
    println!(
        "{} {name}: {detail} [{:.1}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "{name} failed: {detail}");
}

/// Exact output law of one library transform applied to every graph of the
/// support, weighted by `dist`.
fn push_forward<T: Scalar>(dist: &[T], n: usize, m: usize, d: usize, a: usize, b: usize, distinct: bool) -> Vec<T> {
    let mut out = vec![T::zero(); dist.len()];
    for (idx, p) in dist.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let slots: Vec<u32> = common::slots_of(idx, n, m * d).into_iter().map(|v| v as u32).collect();
        let g = Hypergraph::from_slots(n, d, distinct, slots).unwrap();
        let outcomes = common::enumerate_coins::<T, _>(|rng| {
            let h = if distinct {
                transform_distinct(&g, a, b, rng).unwrap()
            } else {
                transform(&g, a, b, rng).unwrap()
            };
            let s: Vec<usize> = h.slots().iter().map(|&v| v as usize).collect();
            common::index_of(&s, n)
        });
        for (target, q) in outcomes {
            out[target] = out[target].clone() + p.clone() * q;
        }
    }
    out
}

#[test]
fn uniform_stability() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut exact_ok = true;
    for distinct in [false, true] {
        let (n, m, d) = if distinct { (3, 1, 2) } else { (3, 2, 2) };
        let u = common::uniform_graphs::<f64>(n, m, d, distinct);
        let ue = common::uniform_graphs::<Exact>(n, m, d, distinct);
        for a in 0..n {
            for b in 0..n {
                let p = push_forward(&u, n, m, d, a, b, distinct);
                worst = p.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
                exact_ok &= push_forward(&ue, n, m, d, a, b, distinct) == ue;
            }
        }
    }
    report(
        "uniform stability",
        worst <= 1e-12 && exact_ok,
        started,
        Duration::from_secs(1),
        format!("max entry error {worst:e}, exact rational match {exact_ok}"),
    );
}

#[test]
fn deviation_decay() {
    let started = Instant::now();
    let curve = deviation_curve(8, 100, 100_000, &Streams::new(101), &Exec::sequential()).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for i in [10, 50, 100] {
        let p = curve[i];
        let z = (p.mean - p.predicted) / p.std_error;
        pass &= z.abs() <= 3.0;
        detail.push(format!("V({i}) = {:.5} vs {:.5} (z = {z:.2})", p.mean, p.predicted));
    }
    report("deviation decay", pass, started, Duration::from_secs(10), detail.join(", "));
}

#[test]
fn mixing_tv_at_t() {
    let started = Instant::now();
    let eps = 0.25;
    let fam = GraphFamily::uniform(4, 2, 2);
    let t = mixing_time(4, 2, 2, eps).unwrap();
    let tv = mixing_tv(&fam, t, 1_000_000, 200, &Streams::new(102), &Exec::sequential()).unwrap();
    report(
        "mixing TV",
        tv.estimate <= eps / 8.0 + tv.ci_halfwidth,
        started,
        Duration::from_secs(60),
        format!("t = {t}, TV = {:.5} +/- {:.5}, bound {}", tv.estimate, tv.ci_halfwidth, eps / 8.0),
    );
}

#[test]
fn fourier_correlation_equivalence() {
    let started = Instant::now();
    let (mut checked, mut mismatches, mut worst) = (0u64, 0u64, 0.0f64);
    for d in 1..=4usize {
        for table in 0..1u64 << (1 << d) {
            let p = Predicate::from_index_fn(d, |x| table >> x & 1 == 1).unwrap();
            let f = p.fourier::<f64>();
            worst = worst.max((f.iter().map(|c| c * c).sum::<f64>() - 1.0).abs());
            if p.correlation_order().order() != p.min_fourier_level(&1e-12) {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    report(
        "fourier/correlation equivalence",
        mismatches == 0 && worst <= 1e-9,
        started,
        Duration::from_secs(60),
        format!("{checked} predicates, {mismatches} mismatches, Parseval error {worst:e}"),
    );
}

#[test]
fn terminal_hybrid() {
    let started = Instant::now();
    let eps = 0.25;
    let (n, m, d) = (4, 2, 2);
    let fam = GraphFamily::uniform(n, m, d);
    let t = mixing_time(n, m, d, eps).unwrap();
    let model = NoisyPredicate::noiseless(Predicate::xor(2).unwrap());
    let s: Secret = "0110".parse().unwrap();
    let cells = 256 << m;
    let parts = Exec::sequential().map_chunks(1_000_000, |c, range| {
        let mut rng = Streams::new(103).stream(&[c]);
        let mut counts = EmpiricalCounts::new(cells).unwrap();
        for _ in range {
            let inst = hybrid_sample(&model, &s, t, t, &fam, &mut rng).unwrap();
            let y = inst.outputs().iter().enumerate().fold(0, |acc, (k, &b)| acc | (b as usize) << k);
            counts.add(((inst.graph().support_index().unwrap() as usize) << m) | y);
        }
        counts
    });
    let mut total = EmpiricalCounts::new(cells).unwrap();
    for p in &parts {
        total.merge(p).unwrap();
    }
    // null: uniform graph, independent Bernoulli(1/2) outputs
    let null = vec![1.0 / cells as f64; cells];
    let tv = tv_empirical_vs(&total, &null, 200, &mut Streams::new(104).stream(&[])).unwrap();
    report(
        "terminal hybrid",
        tv.estimate <= eps / 4.0 + tv.ci_halfwidth,
        started,
        Duration::from_secs(120),
        format!("t = {t}, TV = {:.5} +/- {:.5}, bound {}", tv.estimate, tv.ci_halfwidth, eps / 4.0),
    );
}

#[test]
fn equal_case_exactness() {
    let started = Instant::now();
    let mut rng = Streams::new(105).stream(&[]);
    let (mut cases, mut failures) = (0, 0);
    while cases < 10_000 {
        let n = rng.random_range(2..12);
        let d = rng.random_range(1..5usize).min(n);
        let m = rng.random_range(1..20);
        let distinct = rng.random_bool(0.5);
        let fam = GraphFamily { n, m, d, distinct };
        let pred = Predicate::from_index_fn(d, |_| rng.random()).unwrap();
        let g = fam.sample(&mut rng).unwrap();
        let s = Secret::uniform(n, &mut rng);
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if s.get(a) != s.get(b) {
            continue;
        }
        let h = if distinct {
            transform_distinct(&g, a, b, &mut rng).unwrap()
        } else {
            transform(&g, a, b, &mut rng).unwrap()
        };
        if evaluate(&g, &pred, &s).unwrap() != evaluate(&h, &pred, &s).unwrap() {
            failures += 1;
        }
        cases += 1;
    }
    report(
        "equal-case exactness",
        failures == 0,
        started,
        Duration::from_secs(60),
        format!("{cases} cases, {failures} failures"),
    );
}

/// Measured advantage and the claimed `eps` handed to the reduction.
fn measured(dist: &RepeatedEdge, model: &NoisyPredicate, fam: &GraphFamily, seed: u64, cap: f64) -> (f64, f64) {
    let rep = estimate_advantage(dist, model, fam, 10_000, &Streams::new(seed), &Exec::sequential()).unwrap();
    (rep.advantage, (rep.advantage - rep.ci_halfwidth).clamp(0.01, cap))
}

#[test]
fn predictor_gap_bound() {
    let started = Instant::now();
    let fam = GraphFamily::uniform(16, 64, 1);
    let model = NoisyPredicate::noiseless(Predicate::identity());
    let (eps_hat, eps) = measured(&RepeatedEdge, &model, &fam, 106, 0.99);
    let t = mixing_time(16, 64, 1, eps).unwrap();
    let secret: Secret = "0110100110010110".parse().unwrap();
    let table = predictor_gap(&model, &RepeatedEdge, &fam, &secret, t, 100_000, &Streams::new(107), &Exec::sequential()).unwrap();
    let target = eps_hat / (4.0 * t as f64);
    let worst = table
        .unequal()
        .map(|r| r.gap + r.ci_halfwidth - target)
        .fold(f64::INFINITY, f64::min);
    let min_gap = table.unequal().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    report(
        "predictor gap",
        eps_hat >= 0.3 && worst >= 0.0,
        started,
        Duration::from_secs(600),
        format!("eps_hat = {eps_hat:.4}, t = {t}, eq = {:.5}, min unequal gap {min_gap:.5}, target {target:.6}", table.eq.estimate),
    );
}

#[test]
fn end_to_end_recovery() {
    let started = Instant::now();
    let (n, m) = (12, 48);
    let fam = GraphFamily::uniform(n, m, 1);
    let model = NoisyPredicate::noiseless(Predicate::identity());
    let (eps_hat, eps) = measured(&RepeatedEdge, &model, &fam, 108, 0.95);
    let config = ReductionConfig {
        t_multiplier: 0.5,
        ..ReductionConfig::with_eps(eps)
    };
    let derived = config.derive(&fam).unwrap();
    let runs = 50;
    let (mut successes, mut unsound) = (0, 0);
    let mut secrets = Streams::new(109).stream(&[]);
    for run in 0..runs {
        let secret = loop {
            let s = Secret::uniform(n, &mut secrets);
            if is_fairly_balanced(&s, eps).unwrap() {
                break s;
            }
        };
        let mut oracle = SecretOracle::new(model.clone(), fam, secret.clone(), 1000 + run).unwrap();
        let out = search(&mut oracle, &RepeatedEdge, &ReductionConfig { seed: run, ..config.clone() }, &Exec::sequential()).unwrap();
        if let Some(c) = &out.secret {
            let fresh = oracle.instance_at(u64::MAX >> 1);
            if out.success && verify(fresh.graph(), oracle.predicate(), c, fresh.outputs()).unwrap() {
                successes += 1;
            } else {
                unsound += 1;
            }
        }
    }
    let rate = successes as f64 / runs as f64;
    report(
        "end-to-end recovery",
        unsound == 0 && rate >= eps_hat / 8.0,
        started,
        Duration::from_secs(1800),
        format!(
            "eps_hat = {eps_hat:.4}, eps = {eps:.3}, t = {}, l = {}, eq_trials = {}, success {successes}/{runs}, unsound {unsound}",
            derived.t, derived.l, derived.eq_trials
        ),
    );
}

#[test]
fn good_weight_fraction() {
    let started = Instant::now();
    let pred = Predicate::xor(2).unwrap();
    let fam = GraphFamily::uniform(8, 3, 2);
    let exact = exact_likelihood_ratio(&pred, &fam).unwrap();
    let eps = exact.advantage;
    let lr = LikelihoodRatio::new(pred.clone(), 20).unwrap();
    let model = NoisyPredicate::noiseless(pred);
    let scan = good_weight_scan(&lr, &model, &fam, eps, 20_000, &Streams::new(110), &Exec::sequential()).unwrap();
    let flagged = scan.flagged_mass();
    let ci = scan.ambiguous_mass();
    let p_null = exact.p_null;
    let exact_mass: f64 = exact
        .p_planted_by_weight
        .iter()
        .enumerate()
        .filter(|(_, &p)| p - p_null >= eps / 2.0)
        .map(|(w, _)| randlocal::stats::binomial_mass(8, w))
        .sum();
    report(
        "good-weight fraction",
        eps > 0.0 && flagged >= eps / 2.0 - ci && exact_mass >= eps / 2.0,
        started,
        Duration::from_secs(300),
        format!("exact eps = {eps:.5}, flagged mass {flagged:.4} (ambiguous {ci:.4}), exact flagged mass {exact_mass:.4}"),
    );
}

#[test]
fn noisy_candidate_list() {
    let started = Instant::now();
    let (n, m) = (10, 12);
    let fam = GraphFamily::uniform(n, m, 1);
    let model = NoisyPredicate::new(Predicate::identity(), 0.05).unwrap();
    let (eps_hat, eps) = measured(&RepeatedEdge, &model, &fam, 111, 0.95);
    let config = ReductionConfig {
        t_multiplier: 0.25,
        ..ReductionConfig::with_eps(eps)
    };
    let derived = config.derive(&fam).unwrap();
    let runs = 50;
    let (mut contained, mut max_size) = (0, 0);
    for run in 0..runs {
        let mut oracle = SecretOracle::with_random_secret(model.clone(), fam, 2000 + run).unwrap();
        let out = search_noisy(&mut oracle, &RepeatedEdge, &ReductionConfig { seed: run, ..config.clone() }, &Exec::sequential()).unwrap();
        max_size = max_size.max(out.candidates.len());
        if out.candidates.contains(oracle.secret()) {
            contained += 1;
        }
    }
    let rate = contained as f64 / runs as f64;
    report(
        "noisy candidate list",
        max_size <= 2 * n && rate >= eps_hat / 8.0,
        started,
        Duration::from_secs(1800),
        format!(
            "eps_hat = {eps_hat:.4}, eps = {eps:.3}, t = {}, l = {}, largest list {max_size}, secret found {contained}/{runs}",
            derived.t, derived.l
        ),
    );
}

#[test]
fn pinsker_grid() {
    let started = Instant::now();
    let mut violations = 0;
    for i in 0..20 {
        for j in 0..20 {
            let (p, q) = (i as f64 / 19.0, j as f64 / 19.0);
            let kl = kl_bernoulli(p, q).unwrap();
            if (p - q).abs() > pinsker_tv_bound(kl).standard + 1e-12 {
                violations += 1;
            }
        }
    }
    let zero = kl_bernoulli(0.5, 0.5).unwrap();
    report(
        "pinsker grid",
        violations == 0 && zero == 0.0,
        started,
        Duration::from_secs(1),
        format!("{violations} violations on 400 points, kl(0.5, 0.5) = {zero}"),
    );
}

#[test]
fn reduce_determinism() {
    let started = Instant::now();
    let args = ReduceArgs {
        problem: ProblemArgs {
            predicate: "builtin:identity".into(),
            n: 10,
            m: 40,
            d: None,
            noisy_beta: None,
            distinct: false,
        },
        distinguisher: "repeated-edge".into(),
        secret: SecretSpec::Random,
        oracle_seed: 7,
        budget: None,
        config: ReductionConfig {
            t_multiplier: 0.5,
            seed: 11,
            ..ReductionConfig::with_eps(0.9)
        },
        workers: 1,
    };
    let a = cmd_reduce(&args).unwrap().result_string();
    let b = cmd_reduce(&args).unwrap().result_string();
    let c = cmd_reduce(&ReduceArgs { workers: 4, ..args.clone() }).unwrap().result_string();
    report(
        "reduce determinism",
        a == b && a == c,
        started,
        Duration::from_secs(300),
        format!("{} result bytes; repeat identical {}, 1 vs 4 workers identical {}", a.len(), a == b, a == c),
    );
}
