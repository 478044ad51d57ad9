//! Pooled Monte Carlo verification of the coupling over many replicas.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::bundle::{bundle_from_records, landing_stats, sandwich_check, LandingStats, SandwichReport};
use super::scan::{scan_with_idle, IdleSequence};
use super::{Branch, MegaVertexConfig, Subcase, TriggerRecord};
use crate::error::{Error, Result};
use crate::replicas::run_replicas;
use crate::stats::{Moments, Proportion};
use crate::walk::{simulate_replica, CookieEnvironment, Trajectory};

/// Plus-arrow frequencies split by stack depth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BranchStats {
    pub all: Proportion,
    /// `k <= c`.
    pub early: Proportion,
    /// `k > c`.
    pub late: Proportion,
}

impl BranchStats {
    fn record(&mut self, k: u32, c: u32, plus: bool) {
        self.all.record(plus);
        if k <= c {
            self.early.record(plus);
        } else {
            self.late.record(plus);
        }
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            all: self.all.merge(o.all),
            early: self.early.merge(o.early),
            late: self.late.merge(o.late),
        }
    }
}

const MAX_EXAMPLES: usize = 10;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ReplicaCoupling {
    pub replicas: u64,
    pub records: u64,
    pub censored: u64,
    /// Completed records, by branch, conditioning on `T` being reached.
    pub cookie_given_t: BranchStats,
    pub no_cookie_given_t: BranchStats,
    /// As above plus sequences opened early that never reached `T`, which
    /// keep their `+1`.
    pub cookie_given_open: BranchStats,
    pub no_cookie_given_open: BranchStats,
    pub subcases: BTreeMap<Subcase, u64>,
    /// `T <= U <= V` within a record, or `V <= T'` for the next record.
    pub ordering_violations: u64,
    pub ordering_examples: Vec<String>,
    pub k_over_h_failures: u64,
    pub h_over_e_failures: u64,
    pub dominance_examples: Vec<String>,
    pub sandwich: SandwichReport,
    pub long_backward: u64,
    /// Trigger times that broke `H_n >= n - 1` or strict increase.
    pub h_order_violations: u64,
    /// `H_N / N` per replica.
    pub h_slope: Moments,
    /// `tau_N / N` per replica.
    pub tau_ratio: Moments,
    /// Consecutive trigger times in the same block.
    pub block_stay: Proportion,
    pub landing: LandingStats,
}

impl ReplicaCoupling {
    pub fn merge(mut self, o: Self) -> Self {
        self.replicas += o.replicas;
        self.records += o.records;
        self.censored += o.censored;
        self.cookie_given_t = self.cookie_given_t.merge(o.cookie_given_t);
        self.no_cookie_given_t = self.no_cookie_given_t.merge(o.no_cookie_given_t);
        self.cookie_given_open = self.cookie_given_open.merge(o.cookie_given_open);
        self.no_cookie_given_open = self.no_cookie_given_open.merge(o.no_cookie_given_open);
        for (k, v) in o.subcases {
            *self.subcases.entry(k).or_insert(0) += v;
        }
        self.ordering_violations += o.ordering_violations;
        self.ordering_examples.extend(o.ordering_examples);
        self.ordering_examples.truncate(MAX_EXAMPLES);
        self.k_over_h_failures += o.k_over_h_failures;
        self.h_over_e_failures += o.h_over_e_failures;
        self.dominance_examples.extend(o.dominance_examples);
        self.dominance_examples.truncate(MAX_EXAMPLES);
        self.sandwich = self.sandwich.merge(o.sandwich);
        self.long_backward += o.long_backward;
        self.h_order_violations += o.h_order_violations;
        self.h_slope = self.h_slope.merge(o.h_slope);
        self.tau_ratio = self.tau_ratio.merge(o.tau_ratio);
        self.block_stay = self.block_stay.merge(o.block_stay);
        self.landing = self.landing.merge(o.landing);
        self
    }
}

fn ordering_violations(records: &[TriggerRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        let ok = match (r.u, r.v) {
            (Some(u), Some(v)) => r.t <= u && u <= v,
            (Some(u), None) => r.t <= u,
            _ => true,
        };
        if !ok {
            out.push(format!("block {} seq {}: T={} U={:?} V={:?}", r.j, r.k, r.t, r.u, r.v));
        }
    }
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.v.is_none_or(|v| v > b.t) {
            out.push(format!(
                "block {} seq {} (T={}, V={:?}) still open at T={} of block {} seq {}",
                a.j, a.k, a.t, a.v, b.t, b.j, b.k
            ));
        }
    }
    out
}

/// Every coupling diagnostic for one trajectory.
pub fn analyze_replica(traj: &Trajectory, cfg: &MegaVertexConfig) -> ReplicaCoupling {
    let (records, idle) = scan_with_idle(traj, cfg);
    let bundle = bundle_from_records(records);
    let records = &bundle.records;
    let mut rep = ReplicaCoupling {
        replicas: 1,
        records: records.len() as u64,
        censored: records.iter().filter(|r| r.is_censored()).count() as u64,
        ..ReplicaCoupling::default()
    };
    for r in records {
        if let (Some(a), Some(s)) = (r.arrow, r.subcase) {
            let (given_t, given_open) = match r.branch {
                Branch::Cookie => (&mut rep.cookie_given_t, &mut rep.cookie_given_open),
                Branch::NoCookie => (&mut rep.no_cookie_given_t, &mut rep.no_cookie_given_open),
            };
            given_t.record(r.k, cfg.c, a == 1);
            given_open.record(r.k, cfg.c, a == 1);
            *rep.subcases.entry(s).or_insert(0) += 1;
        }
    }
    // Sequences opened in the first nine tenths of the run and never
    // triggered are read as `T = infinity`.
    let cutoff = traj.horizon() - traj.horizon() / 10;
    for &IdleSequence { k, opened, branch, .. } in &idle {
        if opened <= cutoff {
            let stats = match branch {
                Branch::Cookie => &mut rep.cookie_given_open,
                Branch::NoCookie => &mut rep.no_cookie_given_open,
            };
            stats.record(k, cfg.c, true);
        }
    }

    let ord = ordering_violations(records);
    rep.ordering_violations = ord.len() as u64;
    rep.ordering_examples = ord.into_iter().take(MAX_EXAMPLES).collect();

    if let Some((j, m)) = bundle.k_over_h_failure() {
        rep.k_over_h_failures = 1;
        rep.dominance_examples.push(format!("K over H fails at stack {j}, depth {m}"));
    }
    if let Some((j, m)) = bundle.h_over_e_failure() {
        rep.h_over_e_failures = 1;
        rep.dominance_examples.push(format!("H over E fails at stack {j}, depth {m}"));
    }

    rep.sandwich = sandwich_check(&bundle, traj, cfg);
    let ch = &bundle.changes;
    rep.long_backward = ch.long_backward.len() as u64;
    let h = &ch.h_times;
    for n in 1..h.len() {
        if h[n] + 1 < n || (n >= 2 && h[n] <= h[n - 1]) {
            rep.h_order_violations += 1;
        }
    }
    if !ch.is_empty() {
        rep.h_slope.push(h[ch.len()] as f64 / ch.len() as f64);
    }
    if ch.j_seq.len() > 1 {
        let n = ch.j_seq.len() - 1;
        rep.tau_ratio.push(ch.tau[n] as f64 / n as f64);
    }
    for w in ch.h_blocks[1..].windows(2) {
        rep.block_stay.record(w[0] == w[1]);
    }
    rep.landing = landing_stats(traj, cfg, records);
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub observed: f64,
    pub threshold: f64,
    pub std_error: f64,
    pub detail: String,
}

impl Check {
    fn exact(name: &str, failures: u64, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if failures == 0 { CheckStatus::Pass } else { CheckStatus::Fail },
            observed: failures as f64,
            threshold: 0.0,
            std_error: 0.0,
            detail,
        }
    }

    /// `p_hat >= bound - 3 SE` (or `<= bound + 3 SE` when `upper`).
    fn proportion(name: &str, p: Proportion, bound: f64, upper: bool) -> Self {
        let (est, se) = (p.estimate(), p.std_error());
        let status = if p.trials == 0 {
            CheckStatus::Skipped
        } else if (!upper && est >= bound - 3.0 * se) || (upper && est <= bound + 3.0 * se) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            status,
            observed: est,
            threshold: bound,
            std_error: se,
            detail: format!("{} of {}", p.successes, p.trials),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub c: u32,
    pub ell: u32,
    pub seed: u64,
    pub replicas: u64,
    pub horizon: usize,
    /// `(1 - (c-1)/l) Q(l + c - 1)`.
    pub arrow_bound: f64,
    pub checks: Vec<Check>,
    pub all_pass: bool,
    pub totals: ReplicaCoupling,
}

impl CouplingReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn verify_coupling(
    env: &Arc<CookieEnvironment>,
    cfg: &MegaVertexConfig,
    replicas: usize,
    horizon: usize,
    seed: u64,
) -> Result<CouplingReport> {
    if env.cookies() != 1 {
        return Err(Error::Precondition(format!(
            "the block coupling needs a one-cookie walk, got {} cookies",
            env.cookies()
        )));
    }
    if replicas == 0 || horizon == 0 {
        return Err(Error::Precondition("need at least one replica and a positive horizon".into()));
    }
    let per = run_replicas(replicas, |r| analyze_replica(&simulate_replica(env, seed, r, horizon), cfg));
    let totals = per.into_iter().fold(ReplicaCoupling::default(), ReplicaCoupling::merge);
    let bound = cfg.arrow_bound(&env.laws()[0]);
    let t = &totals;
    let checks = vec![
        Check::exact("trigger-ordering", t.ordering_violations, t.ordering_examples.join("; ")),
        Check::exact("h-times-ordering", t.h_order_violations, String::new()),
        Check::exact(
            "dominance-k-h-e",
            t.k_over_h_failures + t.h_over_e_failures,
            t.dominance_examples.join("; "),
        ),
        Check::exact(
            "sandwich",
            t.sandwich.violations,
            format!(
                "{} block changes checked; literal reading fails {} times",
                t.sandwich.checked, t.sandwich.literal_violations
            ),
        ),
        Check::proportion("cookie-branch-plus", t.cookie_given_t.all, bound, false),
        Check::proportion("no-cookie-branch-plus", t.no_cookie_given_t.all, 0.5, false),
        Check::proportion("block-stay", t.block_stay, 0.5, true),
        Check::proportion(
            "landing-success",
            Proportion::new(t.landing.successes, t.landing.successes + t.landing.failures),
            t.landing.kappa,
            false,
        ),
    ];
    Ok(CouplingReport {
        c: cfg.c,
        ell: cfg.ell,
        seed,
        replicas: replicas as u64,
        horizon,
        arrow_bound: bound,
        all_pass: checks.iter().all(Check::passed),
        checks,
        totals,
    })
}
