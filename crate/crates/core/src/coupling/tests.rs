use std::sync::Arc;

use super::*;
use crate::arrows::{dominates, ArrowSource, ArrowSystem};
use crate::stats::Proportion;
use crate::walk::{simulate_replica, CookieEnvironment, JumpDistribution, Trajectory};

fn cfg(c: u32, ell: u32) -> MegaVertexConfig {
    MegaVertexConfig::new(c, ell).unwrap()
}

fn env(q: JumpDistribution) -> Arc<CookieEnvironment> {
    Arc::new(CookieEnvironment::one_cookie(q))
}

fn hand_path(positions: Vec<i64>) -> Trajectory {
    let e = env(JumpDistribution::epsilon_family(11, 0.1).unwrap());
    Trajectory::from_positions(positions, e, 0, 0).unwrap()
}

/// Re-evaluates every trigger condition from the definitions at every step,
/// recomputing cookie counts from the raw path each time.
fn brute_force(traj: &Trajectory, cfg: &MegaVertexConfig) -> Vec<TriggerRecord> {
    let y = traj.positions();
    let h = traj.horizon();
    let (c, l) = (i64::from(cfg.c), i64::from(cfg.ell));
    let in_block = |j: i64, v: i64| l * j <= v && v < l * j + c;
    let hit = |j: i64, t: usize| in_block(j, y[t]) && !y[..t].contains(&y[t]);
    let cookies = |j: i64, t: usize| MegaCookieLedger::count_at(traj, cfg, j, t);
    let first = |from: usize, p: &dyn Fn(usize) -> bool| (from..=h).find(|&t| p(t));
    let lo_block = y.iter().min().unwrap().div_euclid(l) - 1;
    let hi_block = y.iter().max().unwrap().div_euclid(l) + 1;
    let mut out = Vec::new();
    for j in lo_block..=hi_block {
        let mut opened = 0;
        for k in 1.. {
            let cookie = cookies(j, opened) > 0;
            let mut rec = TriggerRecord {
                j,
                k,
                opened,
                t: 0,
                u: None,
                v: None,
                branch: if cookie { Branch::Cookie } else { Branch::NoCookie },
                subcase: None,
                neighbor_state: None,
                arrow: None,
            };
            let lo = l * (j - 1) + c;
            if cookie {
                let Some(t) = first(opened, &|t| in_block(j, y[t])) else { break };
                rec.t = t;
                let Some(u) = first(t, &|s| y[s] < lo || y[s] > l * j + c - 1 || hit(j, s)) else {
                    out.push(rec);
                    break;
                };
                rec.u = Some(u);
                let nb = cookies(j + 1, u) > 0;
                rec.neighbor_state = Some(nb);
                let hi = if nb { l * (j + 1) - 1 } else { l * (j + 1) + c - 2 };
                let v = first(u, &|s| y[s] < lo || y[s] > hi || (s > u && hit(j, s - 1)));
                let departed = v.is_some_and(|v| v > u && hit(j, v - 1));
                rec.subcase = Some(if hit(j, u) && u == t {
                    Subcase::HitCookieAtT
                } else if hit(j, u) {
                    Subcase::HitCookieLater
                } else if y[u] < lo {
                    Subcase::ExitedLeft
                } else if departed {
                    Subcase::HitCookieAfterExit
                } else {
                    Subcase::ExitedWithoutCookie
                });
                let Some(v) = v else {
                    out.push(rec);
                    break;
                };
                rec.v = Some(v);
                let thr = if nb { l * (j + 1) } else { l * (j + 1) + c - 1 };
                rec.arrow = Some(if y[v] >= thr { 1 } else { -1 });
            } else {
                let top = l * j + c - 1;
                let Some(t) = first(opened, &|t| y[t] == top) else { break };
                rec.t = t;
                rec.u = Some(t);
                rec.subcase = Some(Subcase::NoCookie);
                let Some(v) = first(t, &|s| y[s] < lo || y[s] > l * (j + 1) + c - 2) else {
                    out.push(rec);
                    break;
                };
                rec.v = Some(v);
                rec.arrow = Some(if y[v] >= l * (j + 1) + c - 1 { 1 } else { -1 });
            }
            opened = rec.v.unwrap();
            out.push(rec);
        }
    }
    out.sort_by_key(|r| r.t);
    out
}

#[test]
fn config_validation_and_blocks() {
    assert!(MegaVertexConfig::new(2, 9).is_err());
    assert!(MegaVertexConfig::new(3, 8).is_err());
    let g = cfg(3, 13);
    assert_eq!((g.block_start(2), g.block_end(2)), (26, 28));
    assert_eq!(g.block_of(27), Some(2));
    assert_eq!(g.block_of(29), None);
    assert_eq!(g.block_of(-13), Some(-1));
    assert_eq!(g.block_of(-11), Some(-1));
    assert_eq!(g.block_of(-10), None);
}

#[test]
fn cookie_counts() {
    let g = cfg(3, 9);
    let traj = hand_path(vec![0, 11, 10, 9, 8, 9, 10]);
    assert_eq!(MegaCookieLedger::count_at(&traj, &g, 1, 0), 3);
    assert_eq!(MegaCookieLedger::count_at(&traj, &g, 1, 1), 3);
    // first entry at t = 1
    assert_eq!(MegaCookieLedger::count_at(&traj, &g, 1, 2), 2);
    assert_eq!(MegaCookieLedger::count_at(&traj, &g, 1, 4), 0);
    assert_eq!(MegaCookieLedger::count_at(&traj, &g, 1, 7), 0);
    let fresh = traj.fresh_flags();
    let mut ledger = MegaCookieLedger::new();
    for (t, &y) in traj.positions().iter().enumerate() {
        assert_eq!(ledger.cookies(&g, 1), MegaCookieLedger::count_at(&traj, &g, 1, t));
        ledger.record(&g, y, fresh[t]);
    }
}

#[test]
fn fresh_landing_resolves_next_step() {
    let g = cfg(3, 9);
    let recs = scan_triggers(&hand_path(vec![0, 11, 22]), &g);
    assert_eq!(recs.len(), 2);
    let b1 = &recs[1];
    assert_eq!((b1.j, b1.t, b1.u, b1.v), (1, 1, Some(1), Some(2)));
    assert_eq!(b1.subcase, Some(Subcase::HitCookieAtT));
    assert_eq!(b1.neighbor_state, Some(true));
    assert_eq!(b1.arrow, Some(1));
}

#[test]
fn hand_traced_path() {
    let g = cfg(3, 9);
    let mut p: Vec<i64> = (0..=9).collect();
    p.extend([8, 9, 8, 7, 6, 5, 4, 3, 2]);
    let traj = hand_path(p);
    let recs = scan_triggers(&traj, &g);
    let summary: Vec<_> = recs.iter().map(|r| (r.j, r.k, r.t, r.u, r.v, r.arrow)).collect();
    assert_eq!(
        summary,
        vec![
            (0, 1, 0, Some(0), Some(1), Some(-1)),
            (0, 2, 1, Some(1), Some(2), Some(-1)),
            (0, 3, 2, Some(2), Some(3), Some(-1)),
            (1, 1, 9, Some(9), Some(10), Some(-1)),
            (1, 2, 11, Some(18), Some(18), Some(-1)),
            (0, 4, 18, Some(18), None, None),
        ]
    );
    assert_eq!(recs[4].subcase, Some(Subcase::ExitedLeft));
    assert_eq!(recs[5].branch, Branch::NoCookie);
    assert_eq!(recs, brute_force(&traj, &g));
}

#[test]
fn scanner_matches_brute_force() {
    let laws = [
        (cfg(3, 9), JumpDistribution::epsilon_family(11, 0.3).unwrap()),
        (cfg(3, 13), JumpDistribution::epsilon_family(15, 0.01).unwrap()),
        (cfg(3, 9), JumpDistribution::from_pairs(&[-1, 1, 4, 11], &[0.45, 0.3, 0.15, 0.1]).unwrap()),
        (cfg(4, 12), JumpDistribution::from_pairs(&[-1, 2, 7], &[0.5, 0.3, 0.2]).unwrap()),
    ];
    let mut kinds = std::collections::BTreeSet::new();
    for (g, q) in laws {
        let e = env(q);
        for r in 0..6 {
            let traj = simulate_replica(&e, 77, r, 1500);
            let fast = scan_triggers(&traj, &g);
            assert_eq!(fast, brute_force(&traj, &g), "replica {r} of {g:?}");
            kinds.extend(fast.iter().filter_map(|r| r.subcase));
        }
    }
    assert_eq!(kinds.len(), 6, "every subcase exercised: {kinds:?}");
}

#[test]
fn arrow_rule_examples() {
    let g = cfg(3, 13);
    let rec = |branch, nb, v: Option<usize>| TriggerRecord {
        j: 2,
        k: 1,
        opened: 0,
        t: 0,
        u: Some(0),
        v,
        branch,
        subcase: None,
        neighbor_state: nb,
        arrow: None,
    };
    // l(j+1) + c - 1 = 41
    assert_eq!(assign_arrow(&rec(Branch::NoCookie, None, Some(5)), 41, &g), Ok(1));
    assert_eq!(assign_arrow(&rec(Branch::NoCookie, None, Some(5)), 40, &g), Ok(-1));
    assert_eq!(assign_arrow(&rec(Branch::Cookie, Some(true), Some(5)), 39, &g), Ok(1));
    assert_eq!(assign_arrow(&rec(Branch::Cookie, Some(false), Some(5)), 39, &g), Ok(-1));
    // exited left at l(j-1) + c - 1
    assert_eq!(assign_arrow(&rec(Branch::Cookie, Some(true), Some(5)), 15, &g), Ok(-1));
    assert_eq!(assign_arrow(&rec(Branch::Cookie, Some(true), None), 50, &g), Err(crate::Error::Censored));
}

#[test]
fn monotone_path_keeps_every_arrow_up() {
    let g = cfg(3, 13);
    let e = env(JumpDistribution::point_mass(15).unwrap());
    let traj = simulate_replica(&e, 0, 0, 200);
    let (arrows, recs) = build_e(&traj, &g);
    assert!(!recs.is_empty());
    assert!(arrows.materialized().all(|(_, _, v)| v == 1));
}

#[test]
fn block_change_insertion_rules() {
    let (h, k) = h_k_from_blocks(&[0, 3]);
    assert_eq!(k.dump(), "0 1 1\n1 1 1\n2 1 1\n");
    assert_eq!(h.dump(), "0 1 1\n");
    let (h, k) = h_k_from_blocks(&[0, 1, 2, 1]);
    assert_eq!((h.get(2, 1), k.get(2, 1)), (-1, -1));
}

#[test]
fn three_block_sandwich() {
    let g = cfg(3, 9);
    let mut p = vec![0, 11, 22];
    p.extend((10..=21).rev());
    p.push(9);
    let traj = hand_path(p);
    let bundle = build_h_k(&traj, &g);
    assert_eq!(bundle.changes.j_seq, vec![0, 1, 2, 1]);
    assert_eq!(bundle.changes.sigma_cum, vec![0, 1, 2, 3]);
    let rep = sandwich_check(&bundle, &traj, &g);
    assert_eq!((rep.checked, rep.violations), (4, 0));
    assert!(bundle.k_over_h_failure().is_none());
    assert!(bundle.h_over_e_failure().is_none());
}

#[test]
fn simulated_runs_satisfy_pathwise_checks() {
    let g = cfg(3, 13);
    let e = env(JumpDistribution::epsilon_family(15, 0.01).unwrap());
    for r in 0..4 {
        let traj = simulate_replica(&e, 5, r, 100_000);
        let rep = analyze_replica(&traj, &g);
        assert_eq!(rep.sandwich.violations, 0);
        assert_eq!(rep.k_over_h_failures + rep.h_over_e_failures, 0, "{:?}", rep.dominance_examples);
        assert_eq!(rep.h_order_violations, 0);
        assert!(rep.records > 1000);
    }
}

#[test]
fn comparison_arrows() {
    let g = cfg(3, 13);
    let q = JumpDistribution::epsilon_family(15, 0.01).unwrap();
    let m = build_m(&g, &q, 9);
    let p = 11.0 / 13.0 * 0.99;
    assert!((m.prob_plus(1) - p).abs() < 1e-12);
    assert_eq!(m.prob_plus(4), 0.5);
    assert!((m.total_drift() - 3.0 * (2.0 * p - 1.0)).abs() < 1e-12);
    assert!((m.total_drift() - 2.026).abs() < 1e-3);
    let coin = IndependentArrows::new(0.5, 3, 1).unwrap();
    assert_eq!(coin.total_drift(), 0.0);

    let mut early = Proportion::default();
    let mut late = Proportion::default();
    for j in 0..25_000 {
        for k in 1..=8 {
            let plus = m.arrow(j, k) == 1;
            if k <= 3 { early.record(plus) } else { late.record(plus) }
        }
    }
    assert!((early.estimate() - p).abs() < 3.0 * early.std_error());
    assert!((late.estimate() - 0.5).abs() < 3.0 * late.std_error());
}

fn indices(n: i64, depth: u32) -> impl Iterator<Item = (i64, u32)> {
    (0..n).flat_map(move |j| (1..=depth).map(move |k| (j, k)))
}

#[test]
fn strassen_coupling() {
    let m = IndependentArrows::new(0.8, 3, 4).unwrap();
    let mut exact = |_: i64, k: u32, _: &ArrowSystem| m.prob_plus(k);
    let pair = strassen_bundle(&mut exact, &m, indices(2000, 6)).unwrap();
    assert_eq!(pair.upper, pair.lower);
    assert_eq!(pair.strict, 0);

    let mut generous = |j: i64, k: u32, past: &ArrowSystem| {
        let base = m.prob_plus(k);
        let ups = past.stack(j).iter().filter(|&&a| a == 1).count() as f64;
        base + (1.0 - base) * 0.5 * ups / f64::from(k)
    };
    let pair = strassen_bundle(&mut generous, &m, indices(20_000, 5)).unwrap();
    assert_eq!(pair.indices, 100_000);
    assert!(pair.strict > 0);
    assert!(dominates(&pair.upper, &pair.lower, 0..=19_999, 5));
    assert!(pair.lower.materialized().all(|(j, k, v)| v <= pair.upper.get(j, k)));

    let mut broken = |_: i64, k: u32, _: &ArrowSystem| if k == 2 { 0.3 } else { 0.9 };
    match strassen_bundle(&mut broken, &m, indices(5, 3)) {
        Err(crate::Error::CouplingViolation { index, .. }) => assert_eq!(index, "(0, 2)"),
        other => panic!("expected a coupling violation, got {other:?}"),
    }
}

#[test]
fn landings_are_all_classified() {
    let g = cfg(3, 13);
    let e = env(JumpDistribution::point_mass(15).unwrap());
    let traj = simulate_replica(&e, 0, 0, 500);
    let recs = scan_triggers(&traj, &g);
    let s = landing_stats(&traj, &g, &recs);
    assert!(s.landings > 0);
    assert_eq!(s.successes + s.failures + s.censored, s.landings);
    assert_eq!(s.kappa, 0.0);
}

#[test]
fn coupling_report_rejects_many_cookies() {
    let q = JumpDistribution::epsilon_family(15, 0.01).unwrap();
    let e = Arc::new(CookieEnvironment::new(vec![q.clone(), q]).unwrap());
    assert!(verify_coupling(&e, &cfg(3, 13), 1, 10, 0).is_err());
}
