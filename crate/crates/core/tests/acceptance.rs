//! Acceptance criteria. Runs without the test harness so that each
//! criterion prints one PASS/FAIL line; exits nonzero on any failure.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use num_traits::Zero;
use rand::Rng;

use common::*;
use teleo_core::machines::moore_to_transducer;
use teleo_core::planner::*;
use teleo_core::teleo::{
    couple, success_exact, success_interval, success_prefix, truncate_single_success, zoo, Action, Policy, State, TeleoEnvironment,
};
use teleo_core::transducer::{behaviorally_equal, mix, reroll, unroll, unrolled_step};
use teleo_core::{FiniteDist, Probability, Rational, Trajectory};

fn p(n: i64, d: i64) -> Probability {
    Probability::frac(n, d)
}

fn one_step(s: u32, a: u32) -> Trajectory<State, Action> {
    Trajectory::empty().then(State(s), Action(a))
}

fn c1_testing_specifiable() -> Result<String, String> {
    let mut r = rng(1);
    for k in 0..20 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(2..=3));
        let pi = policy_any(&mut r, s, a, true);
        let env = zoo::uniform_testing(&pi).map_err(|e| e.to_string())?;
        let v = success_exact(&pi, &env).map_err(|e| e.to_string())?;
        if v != Probability::one() {
            return Err(format!("instance {k}: success {v}"));
        }
        let spec = check_specifiable(&pi, &env, 3).map_err(|e| e.to_string())?;
        if !spec.specifiable {
            return Err(format!("instance {k}: not specifiable ({})", spec.verdict.label()));
        }
    }
    Ok("20 policies, success 1, specifiable".into())
}

fn c2_constant_mismatch() -> Result<String, String> {
    let mut count = 0;
    for s in 1..=3 {
        for a in 2..=3 {
            for x in 0..a {
                for y in 0..a {
                    if x == y {
                        continue;
                    }
                    let env = zoo::uniform_testing(&Policy::constant(y, s, a)).unwrap();
                    let v = success_exact(&Policy::constant(x, s, a), &env).unwrap();
                    if v != p(3, 4) {
                        return Err(format!("constant {x} vs {y} on |S|={s}: {v}"));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(format!("{count} pairs at 3/4"))
}

fn c3_sensorimotor_counterexample() -> Result<String, String> {
    let pi = Policy::constant(0, 1, 2);
    let other = Policy::constant(1, 1, 2);
    let tricky = zoo::tricky_testing(&pi, &other).unwrap();
    let evolved = teleo_core::teleo::ambivalent_evolve(&tricky, Action(0), State(0)).unwrap();
    let (mine, theirs) = (success_exact(&pi, &evolved).unwrap(), success_exact(&other, &evolved).unwrap());
    if (mine.clone(), theirs.clone()) != (p(13, 16), p(15, 16)) {
        return Err(format!("evolved values {mine}, {theirs}"));
    }
    let sm = sensorimotor_bellman_check(&pi, &tricky, &one_step(0, 0), 8).unwrap();
    let vl = bellman_check(&pi, &tricky, &one_step(0, 0), 8).unwrap();
    if !sm.before.is_optimal() || sm.passed() || !vl.passed() {
        return Err(format!("sensorimotor {}, value-laden {}", sm.after.label(), vl.after.label()));
    }
    Ok(format!("{mine} < {theirs}; sensorimotor fails, value-laden passes"))
}

fn c4_absent_minded() -> Result<String, String> {
    let mut r = rng(4);
    let env = zoo::absent_minded_env();
    for _ in 0..10 {
        let pc = prob(&mut r);
        let pol = iid_policy(&[pc.clone(), pc.complement()], 1);
        let v = success_exact(&pol, &env).unwrap();
        if v != &pc * &pc.complement() {
            return Err(format!("p_c = {pc}: {v}"));
        }
    }
    let sweep = iid_sweep(&env, 100).unwrap();
    if sweep.best != vec![p(1, 2), p(1, 2)] || sweep.value != p(1, 4) || !sweep.unique {
        return Err(format!("{sweep:?}"));
    }
    Ok("10 sampled p exact; sweep unique (1/2, 1/2) at 1/4".into())
}

fn c5_ufs_counterexample() -> Result<String, String> {
    let mut out = Vec::new();
    for (n, expected) in [(2u32, p(2, 3)), (3, p(5, 7))] {
        let env = zoo::counterexample_env(n);
        let pi = zoo::imperfect_mimic_policy(n);
        let v = success_exact(&pi, &env).unwrap();
        if v != expected {
            return Err(format!("n={n}: {v}"));
        }
        let search = det_ufs_search(&env, n as usize).unwrap();
        if search.best_value > v {
            return Err(format!("n={n}: enumeration found {}", search.best_value));
        }
        let report = ufs_counterexample_report(n, &p(1, 100)).unwrap();
        if !report.strict_improvement {
            return Err(format!("n={n}: no strict improvement {:?}", report.evolved));
        }
        out.push(format!("n={n} {v} ({} machines, {} optimal)", search.enumerated, search.optimal_count));
    }
    Ok(out.join("; "))
}

fn c6_mixture_linearity() -> Result<String, String> {
    let mut r = rng(6);
    for k in 0..50 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let np = r.gen_range(1..=3);
        let ne = r.gen_range(1..=3);
        let ps: Vec<Policy> = (0..np).map(|_| policy_any(&mut r, s, a, false)).collect();
        let es: Vec<TeleoEnvironment> = (0..ne).map(|_| env_any(&mut r, s, a)).collect();
        let alpha = dist(&mut r, &(0..np).collect::<Vec<_>>(), true);
        let beta = dist(&mut r, &(0..ne).collect::<Vec<_>>(), true);
        let aw: Vec<Probability> = (0..np).map(|i| alpha.prob(&i)).collect();
        let bw: Vec<Probability> = (0..ne).map(|i| beta.prob(&i)).collect();
        let mp = Policy::new(mix(&aw, &ps.iter().map(|x| x.t.clone()).collect::<Vec<_>>()).unwrap(), s, a);
        let me = TeleoEnvironment::new(mix(&bw, &es.iter().map(|x| x.t.clone()).collect::<Vec<_>>()).unwrap(), s, a);
        let mut expected = Rational::zero();
        for (i, pi) in ps.iter().enumerate() {
            for (j, e) in es.iter().enumerate() {
                expected += aw[i].value() * bw[j].value() * success_exact(pi, e).unwrap().value();
            }
        }
        let got = success_exact(&mp, &me).unwrap();
        if got.value() != &expected {
            return Err(format!("instance {k}: {got} vs {expected}"));
        }
        // termwise on the success sequence
        let h = 4;
        let lhs = success_prefix(&couple(&mp, &me).unwrap(), h).terms;
        for t in 0..=h {
            let mut rhs = Rational::zero();
            for (i, pi) in ps.iter().enumerate() {
                for (j, e) in es.iter().enumerate() {
                    rhs += aw[i].value() * bw[j].value() * success_prefix(&couple(pi, e).unwrap(), h).terms[t].value();
                }
            }
            if lhs[t].value() != &rhs {
                return Err(format!("instance {k}: term {t} {} vs {rhs}", lhs[t]));
            }
        }
    }
    Ok("50 instances, exact and termwise".into())
}

fn c7_truncation() -> Result<String, String> {
    let mut r = rng(7);
    let mut nonzero = 0;
    for k in 0..50 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let pi = policy_any(&mut r, s, a, false);
        let e = env_any(&mut r, s, a);
        let (x, y) = (success_exact(&pi, &e).unwrap(), success_exact(&pi, &truncate_single_success(&e)).unwrap());
        if x != y {
            return Err(format!("instance {k}: {x} vs truncated {y}"));
        }
        nonzero += usize::from(!x.is_zero());
    }
    for _ in 0..5 {
        let (s, a) = (r.gen_range(1..=2), r.gen_range(2..=3));
        let pi = policy_any(&mut r, s, a, true);
        let other = policy_any(&mut r, s, a, true);
        let zt = truncate_single_success(&zoo::tricky_testing(&pi, &other).unwrap());
        let zu = truncate_single_success(&zoo::uniform_testing(&pi).unwrap());
        if !behaviorally_equal(&zt.t, &zu.t, 4, &zt.action_alphabet()) {
            return Err("Z(tricky) differs from Z(testing) at depth 4".into());
        }
    }
    Ok(format!("50 instances ({nonzero} with positive success); Z(tricky) = Z(testing) to depth 4"))
}

fn c8_deterministification() -> Result<String, String> {
    let mut r = rng(8);
    for k in 0..50 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let pi = policy_any(&mut r, s, a, false);
        let e = env_any(&mut r, s, a);
        let h = r.gen_range(0..=4);
        let tree = deterministify(&pi, &e, h);
        let before = success_prefix(&couple(&pi, &e).unwrap(), h).sum();
        let after = success_prefix(&couple(&tree.to_policy(s, a), &e).unwrap(), h).sum();
        if after.value() != &tree.value || after < before {
            return Err(format!("instance {k}, h={h}: {after} (tree {}) vs {before}", tree.value));
        }
    }
    Ok("50 instances, no violations".into())
}

fn c9_value_laden_bellman() -> Result<String, String> {
    let mut r = rng(9);
    let mut checks = 0;
    for k in 0..25 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let width = r.gen_range(1..=2);
        let e = layered_env(&mut r, width, s, a);
        let h = 3;
        let tree = extract_optimal_policy(&e, h);
        let pi = tree.to_policy(s, a);
        if !check_optimal(&pi, &e, h, ConstraintClass::All).unwrap().is_optimal() {
            return Err(format!("instance {k}: extracted policy not optimal"));
        }
        for st in 0..s {
            if e.masses(State(st)).0.is_zero() {
                continue;
            }
            let rep = bellman_check(&pi, &e, &one_step(st, tree.action.0), h).unwrap();
            if !rep.passed() {
                return Err(format!("instance {k}: step s{st} gives {}", rep.after.label()));
            }
            checks += 1;
        }
    }
    Ok(format!("25 environments, {checks} evolved checks optimal"))
}

fn c10_plumbing() -> Result<String, String> {
    let mut r = rng(10);
    let (ins, outs) = ([0u8, 1], [0u8, 1, 2]);
    for k in 0..50 {
        let size = r.gen_range(1..=3);
        let m = machine(&mut r, size, &ins, &outs);
        let t = m.transducer(0).unwrap();
        let table = unroll(&t, 5, &ins);
        let back = unroll(&reroll(&table), 5, &ins);
        if back != table || !table.causality_holds() {
            return Err(format!("machine {k}: round trip or causality"));
        }
        for i in ins {
            for o in table.first().support() {
                let stepped = unrolled_step(&table, &i, o).unwrap();
                if !stepped.causality_holds() || stepped != unroll(&t.step(&i, o).unwrap(), 4, &ins) {
                    return Err(format!("machine {k}: conditioning on ({i}, {o})"));
                }
            }
        }
    }
    for k in 0..50 {
        let n = r.gen_range(2..=3);
        let ms: Vec<_> = (0..n)
            .map(|_| {
                let size = r.gen_range(1..=3);
                machine(&mut r, size, &ins, &outs)
            })
            .collect();
        let w = dist(&mut r, &(0..n).collect::<Vec<_>>(), true);
        let weights: Vec<Probability> = (0..n).map(|i| w.prob(&i)).collect();
        let mixed = mix(&weights, &ms.iter().map(|m| m.transducer(0).unwrap()).collect::<Vec<_>>()).unwrap();
        // brute-force joint of the first two outputs
        let joint = |i0: u8, o0: u8, o1: u8| -> Rational {
            let mut acc = Rational::zero();
            for (wk, m) in weights.iter().zip(&ms) {
                let p0 = m.output(0).prob(&o0);
                if p0.is_zero() {
                    continue;
                }
                let x1 = m.next_state(0, &i0, &o0).unwrap();
                acc += wk.value() * p0.value() * m.output(x1).prob(&o1).value();
            }
            acc
        };
        for i0 in ins {
            for o0 in outs {
                let marginal: Rational = outs.iter().map(|&o1| joint(i0, o0, o1)).sum();
                let stepped = mixed.step(&i0, &o0);
                match (marginal.is_zero(), stepped) {
                    (true, None) => {}
                    (false, Some(next)) => {
                        for o1 in outs {
                            if next.emit().prob(&o1).value() != &(joint(i0, o0, o1) / &marginal) {
                                return Err(format!("mixture {k}: posterior after ({i0}, {o0})"));
                            }
                        }
                    }
                    _ => return Err(format!("mixture {k}: support after ({i0}, {o0})")),
                }
            }
        }
    }
    Ok("50 round trips to depth 5, causal tables; 50 mixture updates".into())
}

fn c11_moore() -> Result<String, String> {
    let mut r = rng(11);
    let (ins, outs) = ([0u8, 1], [0u8, 1]);
    for k in 0..25 {
        let size = r.gen_range(1..=3);
        let m = moore(&mut r, size, &ins, &outs);
        let ys: Vec<usize> = (0..size).collect();
        let beta = dist(&mut r, &ys, false);
        let whole = moore_to_transducer(&m.with_init(beta.clone()).unwrap());
        let parts: Vec<_> = beta.support().map(|y| moore_to_transducer(&m.with_init(FiniteDist::point(*y)).unwrap())).collect();
        let weights: Vec<Probability> = beta.iter().map(|(_, p)| p.clone()).collect();
        if !behaviorally_equal(&whole, &mix(&weights, &parts).unwrap(), 4, &ins) {
            return Err(format!("machine {k}: state mixture"));
        }
        let t = moore_to_transducer(&m);
        let table = unroll(&t, 3, &ins);
        for (inputs, d) in &table.levels()[3] {
            let mut total = Rational::zero();
            for o in (0..16u8).map(|b| (0..4).map(|j| (b >> j) & 1).collect::<Vec<u8>>()) {
                // sum over hidden paths y0..y3
                let mut acc = Rational::zero();
                for y0 in 0..size {
                    for y1 in 0..size {
                        for y2 in 0..size {
                            for y3 in 0..size {
                                let ys = [y0, y1, y2, y3];
                                let mut w = m.init().prob(&y0).into_rational();
                                for t in 0..4 {
                                    w *= m.output(ys[t]).prob(&o[t]).value();
                                    if t < 3 {
                                        w *= m.kernel(ys[t], &inputs[t]).prob(&ys[t + 1]).value();
                                    }
                                }
                                acc += w;
                            }
                        }
                    }
                }
                if d.prob(&o).value() != &acc {
                    return Err(format!("machine {k}: P({o:?} | {inputs:?})"));
                }
                total += acc;
            }
            if total != Rational::from_integer(1.into()) {
                return Err(format!("machine {k}: oracle mass {total}"));
            }
        }
    }
    Ok("25 machines: state mixtures to depth 4, hidden-path oracle to depth 3".into())
}

fn c12_interval_soundness() -> Result<String, String> {
    let mut r = rng(12);
    let mut instances: Vec<(Policy, TeleoEnvironment)> = vec![
        (Policy::constant(0, 1, 2), zoo::absent_minded_env()),
        (zoo::imperfect_mimic_policy(2), zoo::counterexample_env(2)),
        (Policy::constant(1, 2, 2), zoo::uniform_testing(&Policy::constant(1, 2, 2)).unwrap()),
        (Policy::constant(0, 2, 2), zoo::tricky_testing(&Policy::constant(0, 2, 2), &Policy::constant(1, 2, 2)).unwrap()),
    ];
    for _ in 0..40 {
        let (s, a) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let pi = policy_any(&mut r, s, a, false);
        let e = env_any(&mut r, s, a);
        instances.push((pi, e));
    }
    let mut checked = 0;
    for (k, (pi, e)) in instances.iter().enumerate() {
        let mut prev: Option<(Probability, Probability)> = None;
        for h in 0..=8 {
            let iv = success_interval(pi, e, h).unwrap();
            let x = iv.exact.clone().ok_or(format!("instance {k}: no exact value"))?;
            if !(iv.lo <= x && x <= iv.hi) {
                return Err(format!("instance {k}, h={h}: {x} outside [{}, {}]", iv.lo, iv.hi));
            }
            if let Some((lo, hi)) = &prev {
                if iv.lo < *lo || iv.hi > *hi {
                    return Err(format!("instance {k}, h={h}: bounds not monotone"));
                }
            }
            prev = Some((iv.lo, iv.hi));
            checked += 1;
        }
    }
    Ok(format!("{} instances, {checked} horizons", instances.len()))
}

type Criterion = (u32, &'static str, fn() -> Result<String, String>);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "testing-environment specifiability", c1_testing_specifiable),
        (2, "constant-policy mismatch", c2_constant_mismatch),
        (3, "sensorimotor counterexample", c3_sensorimotor_counterexample),
        (4, "absent-minded driver", c4_absent_minded),
        (5, "UFS counterexample", c5_ufs_counterexample),
        (6, "mixture linearity", c6_mixture_linearity),
        (7, "truncation preservation", c7_truncation),
        (8, "deterministification dominance", c8_deterministification),
        (9, "value-laden Bellman property", c9_value_laden_bellman),
        (10, "coinductive plumbing", c10_plumbing),
        (11, "Moore/unifilar mixtures", c11_moore),
        (12, "interval soundness", c12_interval_soundness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
