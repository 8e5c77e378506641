//! End-to-end acceptance checks. Each test covers one promised
//! behavior of the engine at its stated tolerance and time budget, so
//! the suite's output reads as a line-per-promise report card.

mod common;

use std::time::{Duration, Instant};

use common::{arb_derivative_instance, rng, standard_instances};
use gradstl::casestudy::{run_case_study, Scenario};
use gradstl::formula::{print_formula, Formula};
use gradstl::robustness::{drstar, gradient, gradient_per_variable, rstar, smooth_max};
use gradstl::semantics::{eval_estar, eval_estar_traced, eval_oracle};
use gradstl::signal::{parse_signal, render_signal};
use rand::RngExt;

const RAMP: &str = "t,v\n0.0,1.6\n2.3,1.9\n3.9,12.0\n7.7,15.3\n9.1,14.2\n11.4,28.2\n";

#[test]
fn window_trace_on_the_ramp_signal_is_exact() {
    let s = parse_signal(RAMP).unwrap();
    let names = vec!["v".to_string()];
    let f = gradstl::formula::parse_formula("F[5,10]{v>20}", &names).unwrap();

    let (sat, stats, trace) = eval_estar_traced(&s, &f, 0).unwrap();
    assert!(!sat);

    let expected = [
        (0, 5.0, 10.0, false),
        (1, 2.7, 7.7, false),
        (2, 1.1, 6.1, false),
        (3, -2.7, 2.3, false),
        (4, -4.1, 0.9, true),
    ];
    assert_eq!(trace.len(), expected.len(), "trace: {trace:?}");
    for (visit, (position, lo, hi, base)) in trace.iter().zip(expected) {
        assert_eq!(visit.position, position);
        assert_eq!(visit.base, base, "at position {position}");
        assert!((visit.window.lo - lo).abs() <= 1e-9, "lo at {position}: {}", visit.window.lo);
        assert!((visit.window.hi - hi).abs() <= 1e-9, "hi at {position}: {}", visit.window.hi);
    }
    // The chain stops at position 4, one sample short of the signal end.
    assert_eq!(stats.max_temporal_depth, 5);

    let start = Instant::now();
    for _ in 0..100 {
        eval_estar(&s, &f, 0).unwrap();
    }
    let per_eval = start.elapsed() / 100;
    assert!(per_eval < Duration::from_millis(1), "evaluation took {per_eval:?}");
}

#[test]
fn boolean_semantics_agree_with_the_interval_oracle() {
    let start = Instant::now();
    let set = standard_instances(1000);
    let mut with_until = 0usize;
    let mut with_nesting = 0usize;
    for (i, (s, f, n)) in set.iter().enumerate() {
        if contains_until(f) {
            with_until += 1;
        }
        if f.temporal_nesting() >= 2 {
            with_nesting += 1;
        }
        let (fast, _) = eval_estar(s, f, *n).unwrap();
        let slow = eval_oracle(s, f, *n).unwrap();
        assert_eq!(
            fast, slow,
            "instance {i} at n={n} on {}\nsignal:\n{}",
            print_formula(f),
            render_signal(s)
        );
    }
    assert!(with_until > 50, "only {with_until} instances exercised until");
    assert!(with_nesting > 50, "only {with_nesting} instances nested temporal operators");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn hard_robustness_sign_certifies_satisfaction() {
    let set = standard_instances(1000);
    let ln2 = std::f64::consts::LN_2;
    let mut positive = 0usize;
    let mut negative = 0usize;
    let mut margin_fired = 0usize;
    for (i, (s, f, n)) in set.iter().enumerate() {
        let value = rstar(s, f, *n, 0.0).unwrap();
        let (sat, _) = eval_estar(s, f, *n).unwrap();
        if value > 0.0 {
            positive += 1;
            assert!(sat, "instance {i}: hard robustness {value} on an unsatisfied formula");
        } else if value < 0.0 {
            negative += 1;
            assert!(!sat, "instance {i}: hard robustness {value} on a satisfied formula");
        }
        for gamma in [0.5, 0.1, 0.01] {
            let slack = f.depth() as f64 * gamma * ln2;
            if value > slack {
                margin_fired += 1;
                assert!(sat, "instance {i}: robustness {value} above slack {slack}");
            }
        }
    }
    assert!(positive > 200 && negative > 200, "lopsided sweep: {positive}+/{negative}-");
    assert!(margin_fired > 200, "slack premise fired only {margin_fired} times");
}

#[test]
fn smooth_derivatives_match_central_differences() {
    let start = Instant::now();
    let mut r = rng(0xd1ff_0001);
    let gamma = 0.5;
    let h = 1e-5;
    for i in 0..500 {
        let (s, f, n) = arb_derivative_instance(&mut r);
        for k in 0..s.sample_count() {
            for var in 0..s.width() {
                let d = drstar(&s, &f, n, gamma, k, var).unwrap();
                let mut plus = s.clone();
                plus.set_value(k, var, s.value(k, var) + h).unwrap();
                let mut minus = s.clone();
                minus.set_value(k, var, s.value(k, var) - h).unwrap();
                let fd = (rstar(&plus, &f, n, gamma).unwrap()
                    - rstar(&minus, &f, n, gamma).unwrap())
                    / (2.0 * h);
                let tol = 1e-8f64.max(1e-4 * d.abs().max(fd.abs()));
                assert!(
                    (d - fd).abs() <= tol,
                    "instance {i} entry ({k},{var}): analytic {d} vs numeric {fd} on {}",
                    print_formula(&f)
                );
            }
        }
    }
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn soft_maximum_converges_to_the_hard_maximum() {
    let mut r = rng(0x50f7_0001);
    let ln2 = std::f64::consts::LN_2;
    for _ in 0..10_000 {
        let a = (r.random::<f64>() - 0.5) * 200.0;
        let b = (r.random::<f64>() - 0.5) * 200.0;
        let hard = a.max(b);
        for gamma in [1.0, 0.1, 0.001] {
            let gap = smooth_max(gamma, a, b) - hard;
            assert!(gap >= -1e-12 && gap <= gamma * ln2 + 1e-12, "gap {gap} at gamma {gamma}");
        }
        assert_eq!(smooth_max(0.0, a, b).to_bits(), hard.to_bits());
    }
}

#[test]
fn batched_gradient_matches_the_per_entry_route() {
    let mut r = rng(0xba7c_0001);
    for i in 0..100 {
        let (s, f, n) = arb_derivative_instance(&mut r);
        let (v1, g1) = gradient(&s, &f, n, 0.5).unwrap();
        let (v2, g2) = gradient_per_variable(&s, &f, n, 0.5).unwrap();
        assert!((v1 - v2).abs() <= 1e-12);
        for k in 0..s.sample_count() {
            for var in 0..s.width() {
                let a = g1.get(k, var);
                let b = g2.get(k, var);
                assert!(
                    (a - b).abs() <= 1e-12,
                    "instance {i} entry ({k},{var}): batched {a} vs per-entry {b}"
                );
            }
        }
    }
}

#[test]
fn bundled_mission_is_learned_and_repeatable() {
    let scenario = Scenario::bundled();
    let start = Instant::now();
    let one = run_case_study(&scenario).unwrap();
    let two = run_case_study(&scenario).unwrap();
    let elapsed = start.elapsed();

    assert!(one.report.initial_robustness < 0.0, "initial {}", one.report.initial_robustness);
    assert!(one.report.final_robustness > 0.0, "final {}", one.report.final_robustness);
    assert!(one.report.satisfied);
    let (sat, _) = eval_estar(&one.optimized, &one.constraint, 0).unwrap();
    assert!(sat, "optimized trajectory fails the boolean check");
    assert!(
        one.trace.final_smooth > one.trace.steps[0].smooth,
        "no improvement: {} -> {}",
        one.trace.steps[0].smooth,
        one.trace.final_smooth
    );

    assert_eq!(one.trace, two.trace);
    assert_eq!(
        one.report.initial_robustness.to_bits(),
        two.report.initial_robustness.to_bits()
    );
    assert_eq!(one.report.final_robustness.to_bits(), two.report.final_robustness.to_bits());
    for k in 0..one.optimized.sample_count() {
        let a = one.optimized.sample(k);
        let b = two.optimized.sample(k);
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits(), "sample {k} differs between runs");
        }
    }

    assert!(elapsed < Duration::from_secs(300), "two runs took {elapsed:?}");
}

#[test]
fn flat_formula_evaluation_cost_is_linear() {
    let set = standard_instances(1000);
    let mut flat = 0usize;
    let mut worst_nested = 0.0f64;
    for (i, (s, f, n)) in set.iter().enumerate() {
        let (_, stats) = eval_estar(s, f, *n).unwrap();
        let bound = (4 * s.sample_count() * f.size()) as u64;
        if f.temporal_nesting() <= 1 {
            flat += 1;
            assert!(
                stats.call_count <= bound,
                "instance {i}: {} calls exceeds {bound} for {}",
                stats.call_count,
                print_formula(f)
            );
        } else {
            worst_nested = worst_nested.max(stats.call_count as f64 / bound as f64);
        }
    }
    assert!(flat >= 100, "only {flat} flat instances");
    // Nested cost is recorded but deliberately unbounded here.
    println!("worst nested call-count ratio over the flat bound: {worst_nested:.2}");
}

fn contains_until(f: &Formula) -> bool {
    match f {
        Formula::Atom { .. } => false,
        Formula::Not(a) | Formula::Always { body: a, .. } | Formula::Eventually { body: a, .. } => {
            contains_until(a)
        }
        Formula::And(a, b) => contains_until(a) || contains_until(b),
        Formula::Until { .. } => true,
    }
}
