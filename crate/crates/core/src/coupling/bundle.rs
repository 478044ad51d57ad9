//! Arrow systems derived from the trigger records: `E` directly, `H` and `K`
//! from the block-change sequence of `Y` at trigger times.

use serde::Serialize;

use super::scan::{scan_triggers, MegaCookieLedger};
use super::{MegaVertexConfig, TriggerRecord};
use crate::arrows::{materialized_dominance_failure, walk_from_arrows, ArrowSystem};
use crate::walk::Trajectory;

/// `E(j, k)` for every completed record; everything else stays `+1`.
pub fn arrows_from_records(records: &[TriggerRecord]) -> ArrowSystem {
    let mut e = ArrowSystem::new();
    for r in records {
        if let Some(a) = r.arrow {
            e.set(r.j, r.k, a);
        }
    }
    e
}

pub fn build_e(traj: &Trajectory, cfg: &MegaVertexConfig) -> (ArrowSystem, Vec<TriggerRecord>) {
    let records = scan_triggers(traj, cfg);
    (arrows_from_records(&records), records)
}

/// Trigger times in increasing order and their block-change subsequence.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BlockChanges {
    /// `H_0 = 0` followed by the `T` of every record up to the first
    /// censored one.
    pub h_times: Vec<usize>,
    /// Block of `Y` at each entry of `h_times`.
    pub h_blocks: Vec<i64>,
    /// Indices into `h_times` where the block changes (`tau_0 = 0`).
    pub tau: Vec<usize>,
    /// Block at each `tau_n`.
    pub j_seq: Vec<i64>,
    /// Running total of `|j_n - j_{n-1}|`.
    pub sigma_cum: Vec<u64>,
    /// Transitions `(n, from, to)` that moved back by more than one block.
    pub long_backward: Vec<(usize, i64, i64)>,
}

impl BlockChanges {
    pub fn from_records(records: &[TriggerRecord]) -> Self {
        let mut out = Self {
            h_times: vec![0],
            h_blocks: vec![0],
            ..Self::default()
        };
        for r in records.iter().take_while(|r| !r.is_censored()) {
            out.h_times.push(r.t);
            out.h_blocks.push(r.j);
        }
        out.tau.push(0);
        out.j_seq.push(0);
        out.sigma_cum.push(0);
        for (m, &b) in out.h_blocks.iter().enumerate().skip(1) {
            let prev = *out.j_seq.last().unwrap();
            if b != prev {
                let n = out.j_seq.len();
                if b < prev - 1 {
                    out.long_backward.push((n, prev, b));
                }
                out.tau.push(m);
                out.j_seq.push(b);
                let s = out.sigma_cum[n - 1] + prev.abs_diff(b);
                out.sigma_cum.push(s);
            }
        }
        out
    }

    /// Number of trigger times `H_1, H_2, ...` (excluding `H_0`).
    pub fn len(&self) -> usize {
        self.h_times.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct CoupledBundle {
    pub e: ArrowSystem,
    pub h: ArrowSystem,
    pub k: ArrowSystem,
    pub changes: BlockChanges,
    pub records: Vec<TriggerRecord>,
}

impl CoupledBundle {
    /// First stack position where `K ⪰ H` fails.
    pub fn k_over_h_failure(&self) -> Option<(i64, u32)> {
        materialized_dominance_failure(&self.k, &self.h)
    }

    /// First stack position where `H ⪰ E` fails.
    pub fn h_over_e_failure(&self) -> Option<(i64, u32)> {
        materialized_dominance_failure(&self.h, &self.e)
    }
}

/// `H` (one arrow per block change, at the block left) and `K` (one arrow
/// per unit block crossed) from a block-change sequence.
pub fn h_k_from_blocks(j_seq: &[i64]) -> (ArrowSystem, ArrowSystem) {
    let mut h = ArrowSystem::new();
    let mut k = ArrowSystem::new();
    for w in j_seq.windows(2) {
        let (from, to) = (w[0], w[1]);
        if to > from {
            h.push(from, 1);
            for i in from..to {
                k.push(i, 1);
            }
        } else {
            h.push(from, -1);
            // A longer backward move is reported in `long_backward`; `K`
            // still steps down through every block so its walk keeps pace.
            for i in (to + 1..=from).rev() {
                k.push(i, -1);
            }
        }
    }
    (h, k)
}

pub fn build_h_k(traj: &Trajectory, cfg: &MegaVertexConfig) -> CoupledBundle {
    bundle_from_records(scan_triggers(traj, cfg))
}

pub fn bundle_from_records(records: Vec<TriggerRecord>) -> CoupledBundle {
    let e = arrows_from_records(&records);
    let changes = BlockChanges::from_records(&records);
    let (h, k) = h_k_from_blocks(&changes.j_seq);
    CoupledBundle {
        e,
        h,
        k,
        changes,
        records,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SandwichViolation {
    pub n: usize,
    pub y: i64,
    pub x_k: i64,
    pub sigma: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SandwichReport {
    pub checked: u64,
    pub violations: u64,
    /// Same bracket with `sigma_n = |j_n - j_{n-1}|` taken literally.
    pub literal_violations: u64,
    pub examples: Vec<SandwichViolation>,
}

impl SandwichReport {
    pub fn merge(mut self, o: Self) -> Self {
        self.checked += o.checked;
        self.violations += o.violations;
        self.literal_violations += o.literal_violations;
        self.examples.extend(o.examples);
        self.examples.truncate(MAX_EXAMPLES);
        self
    }
}

const MAX_EXAMPLES: usize = 10;

/// `l X^K_{sigma_n} <= Y_{H_{tau_n}} <= l X^K_{sigma_n} + c - 1` for every `n`.
pub fn sandwich_check(bundle: &CoupledBundle, traj: &Trajectory, cfg: &MegaVertexConfig) -> SandwichReport {
    let ch = &bundle.changes;
    let steps = *ch.sigma_cum.last().unwrap() as usize;
    let x = walk_from_arrows(&bundle.k, steps);
    let inside = |xk: i64, y: i64| cfg.block_start(xk) <= y && y <= cfg.block_end(xk);
    let mut rep = SandwichReport::default();
    for n in 0..ch.j_seq.len() {
        let y = traj.position(ch.h_times[ch.tau[n]]);
        let sigma = ch.sigma_cum[n];
        let xk = x[sigma as usize];
        rep.checked += 1;
        if !inside(xk, y) {
            rep.violations += 1;
            if rep.examples.len() < MAX_EXAMPLES {
                rep.examples.push(SandwichViolation { n, y, x_k: xk, sigma });
            }
        }
        if n > 0 {
            let lit = ch.j_seq[n].abs_diff(ch.j_seq[n - 1]) as usize;
            if !inside(x[lit.min(steps)], y) {
                rep.literal_violations += 1;
            }
        }
    }
    rep
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LandingStats {
    pub landings: u64,
    pub successes: u64,
    pub failures: u64,
    pub censored: u64,
    /// Lower bound `q(-1)^(l - c)` on the success probability.
    pub kappa: f64,
}

impl LandingStats {
    pub fn merge(self, o: Self) -> Self {
        Self {
            landings: self.landings + o.landings,
            successes: self.successes + o.successes,
            failures: self.failures + o.failures,
            censored: self.censored + o.censored,
            kappa: self.kappa.max(o.kappa),
        }
    }
}

/// Classifies the landing at each completed `V`.
///
/// The walk lands in `I_h = [l(h-1)+c, l h+c-1]`. The landing succeeds if it
/// reaches `l(h-1)+c-1`, or the block `B_h` (the vertex `l h+c-1` when `B_h`
/// is empty), before reaching `l h+c` or beyond.
pub fn landing_stats(traj: &Trajectory, cfg: &MegaVertexConfig, records: &[TriggerRecord]) -> LandingStats {
    let pos = traj.positions();
    let fresh = traj.fresh_flags();
    let q_left = traj.env().laws()[0].prob(-1);
    let mut stats = LandingStats {
        kappa: q_left.powi((cfg.ell - cfg.c) as i32),
        ..LandingStats::default()
    };
    let mut vs: Vec<usize> = records.iter().filter_map(|r| r.v).collect();
    vs.sort_unstable();
    let mut ledger = MegaCookieLedger::new();
    let mut next = 0;
    for (t, &y) in pos.iter().enumerate() {
        while next < vs.len() && vs[next] == t {
            next += 1;
            stats.landings += 1;
            let h = (y - cfg.c()).div_euclid(cfg.l()) + 1;
            let left = cfg.block_end(h - 1);
            let top = cfg.block_end(h);
            let has_cookies = ledger.cookies(cfg, h) > 0;
            let resolved = pos[t..].iter().find_map(|&z| {
                let hit = if has_cookies {
                    cfg.block_of(z) == Some(h)
                } else {
                    z == top
                };
                if z == left || hit {
                    Some(true)
                } else if z > top {
                    Some(false)
                } else {
                    None
                }
            });
            match resolved {
                Some(true) => stats.successes += 1,
                Some(false) => stats.failures += 1,
                None => stats.censored += 1,
            }
        }
        ledger.record(cfg, y, fresh[t]);
    }
    stats
}
