//! Single forward pass over a trajectory producing every trigger sequence.

use rustc_hash::FxHashMap;

use super::{arrow_for, Branch, MegaVertexConfig, Subcase, TriggerRecord};
use crate::walk::Trajectory;

/// Visited-vertex counts per block, so `C^{(j)}_t = c - |R_{t-1} ∩ B_j|`.
#[derive(Clone, Debug, Default)]
pub struct MegaCookieLedger {
    visited: FxHashMap<i64, u32>,
}

impl MegaCookieLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cookies left in `B_j` before the current step is recorded.
    pub fn cookies(&self, cfg: &MegaVertexConfig, j: i64) -> u32 {
        cfg.c - self.visited.get(&j).copied().unwrap_or(0)
    }

    /// Records the visit at the current step.
    pub fn record(&mut self, cfg: &MegaVertexConfig, y: i64, fresh: bool) {
        if fresh {
            if let Some(j) = cfg.block_of(y) {
                *self.visited.entry(j).or_insert(0) += 1;
            }
        }
    }

    /// `C^{(j)}_t` for one `(j, t)`, computed from scratch.
    pub fn count_at(traj: &Trajectory, cfg: &MegaVertexConfig, j: i64, t: usize) -> u32 {
        let mut seen: Vec<i64> = traj.positions()[..t.min(traj.positions().len())]
            .iter()
            .copied()
            .filter(|&y| cfg.block_of(y) == Some(j))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        cfg.c - seen.len() as u32
    }
}

#[derive(Clone, Debug)]
enum Phase {
    /// Waiting for `T`.
    Idle { k: u32, opened: usize, branch: Branch },
    /// Cookie branch between `T` and `U`.
    SeekU { rec: TriggerRecord },
    /// Between `U` and `V`. `departing` marks a cookie eaten in `B_j` at the
    /// previous step, at or after `U`.
    SeekV { rec: TriggerRecord, right_exit: bool, departing: bool },
}

struct Scanner<'a> {
    cfg: &'a MegaVertexConfig,
    ledger: MegaCookieLedger,
    phases: FxHashMap<i64, Phase>,
    /// Blocks with an open `(T, U, V)` sequence.
    active: Vec<i64>,
    records: Vec<TriggerRecord>,
}

impl Scanner<'_> {
    fn cookie_window(&self, j: i64) -> (i64, i64) {
        (self.cfg.block_end(j - 1) + 1, self.cfg.block_end(j))
    }

    fn outer_window(&self, j: i64, neighbor_state: Option<bool>) -> (i64, i64) {
        let lo = self.cfg.block_end(j - 1) + 1;
        let hi = match neighbor_state {
            Some(true) => self.cfg.block_start(j + 1) - 1,
            _ => self.cfg.block_end(j + 1) - 1,
        };
        (lo, hi)
    }

    /// Advances block `j` through as many triggers as fire at time `t`.
    /// Returns `true` while the block keeps an open sequence.
    fn advance(&mut self, j: i64, t: usize, y: i64, hit: bool) -> bool {
        let mut phase = self.phases.remove(&j).expect("active block has a phase");
        loop {
            phase = match phase {
                Phase::Idle { .. } => {
                    self.phases.insert(j, phase);
                    return false;
                }
                Phase::SeekU { mut rec } => {
                    let (lo, hi) = self.cookie_window(j);
                    if hit || y < lo || y > hi {
                        rec.u = Some(t);
                        let neighbor = self.ledger.cookies(self.cfg, j + 1) > 0;
                        rec.neighbor_state = Some(neighbor);
                        rec.subcase = Some(if hit && t == rec.t {
                            Subcase::HitCookieAtT
                        } else if hit {
                            Subcase::HitCookieLater
                        } else if y < lo {
                            Subcase::ExitedLeft
                        } else {
                            Subcase::ExitedWithoutCookie
                        });
                        Phase::SeekV {
                            rec,
                            right_exit: !hit && y > hi,
                            departing: hit,
                        }
                    } else {
                        self.phases.insert(j, Phase::SeekU { rec });
                        return true;
                    }
                }
                Phase::SeekV {
                    mut rec,
                    right_exit,
                    departing,
                } => {
                    let u = rec.u.unwrap();
                    let (lo, hi) = self.outer_window(j, rec.neighbor_state);
                    let left_cookie = t > u && departing;
                    if left_cookie || y < lo || y > hi {
                        rec.v = Some(t);
                        if right_exit && left_cookie {
                            rec.subcase = Some(Subcase::HitCookieAfterExit);
                        }
                        rec.arrow = Some(arrow_for(self.cfg, j, rec.branch, rec.neighbor_state, y));
                        let branch = if self.ledger.cookies(self.cfg, j) > 0 {
                            Branch::Cookie
                        } else {
                            Branch::NoCookie
                        };
                        let next = Phase::Idle {
                            k: rec.k + 1,
                            opened: t,
                            branch,
                        };
                        self.records.push(rec);
                        next
                    } else {
                        let departing =
                            rec.branch == Branch::Cookie && hit && self.cfg.block_of(y) == Some(j);
                        self.phases.insert(
                            j,
                            Phase::SeekV {
                                rec,
                                right_exit,
                                departing,
                            },
                        );
                        return true;
                    }
                }
            };
            // A sequence just closed; a new one may open at the same step.
            if let Phase::Idle { k, opened, branch } = phase {
                if !self.opens(j, branch, y) {
                    self.phases.insert(j, phase);
                    return false;
                }
                phase = self.open(j, k, opened, branch, t);
            }
        }
    }

    fn opens(&self, j: i64, branch: Branch, y: i64) -> bool {
        match branch {
            Branch::Cookie => self.cfg.block_of(y) == Some(j),
            Branch::NoCookie => y == self.cfg.block_end(j),
        }
    }

    fn open(&self, j: i64, k: u32, opened: usize, branch: Branch, t: usize) -> Phase {
        let rec = TriggerRecord {
            j,
            k,
            opened,
            t,
            u: None,
            v: None,
            branch,
            subcase: None,
            neighbor_state: None,
            arrow: None,
        };
        match branch {
            Branch::Cookie => Phase::SeekU { rec },
            Branch::NoCookie => Phase::SeekV {
                rec: TriggerRecord {
                    u: Some(t),
                    subcase: Some(Subcase::NoCookie),
                    ..rec
                },
                right_exit: false,
                departing: false,
            },
        }
    }
}

/// A sequence that opened at `opened` and had not reached its `T` by the
/// horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdleSequence {
    pub j: i64,
    pub k: u32,
    pub opened: usize,
    pub branch: Branch,
}

/// Every trigger sequence of every block, ordered by `T`.
///
/// Sequences still open at the horizon are returned with `V` (and possibly
/// `U`) unset and no arrow.
pub fn scan_triggers(traj: &Trajectory, cfg: &MegaVertexConfig) -> Vec<TriggerRecord> {
    scan_with_idle(traj, cfg).0
}

/// Like [`scan_triggers`], also listing the blocks whose next sequence was
/// opened but never triggered.
pub fn scan_with_idle(traj: &Trajectory, cfg: &MegaVertexConfig) -> (Vec<TriggerRecord>, Vec<IdleSequence>) {
    let fresh = traj.fresh_flags();
    let mut s = Scanner {
        cfg,
        ledger: MegaCookieLedger::new(),
        phases: FxHashMap::default(),
        active: Vec::new(),
        records: Vec::new(),
    };
    for (t, &y) in traj.positions().iter().enumerate() {
        let here = cfg.block_of(y);
        let hit = fresh[t] && here.is_some();
        let mut still = Vec::with_capacity(s.active.len());
        for j in std::mem::take(&mut s.active) {
            if s.advance(j, t, y, hit && here == Some(j)) {
                still.push(j);
            }
        }
        // Only the block holding `Y_t` can see its `T` now.
        if let Some(j) = here {
            if !still.contains(&j) {
                let phase = s.phases.remove(&j).unwrap_or(Phase::Idle {
                    k: 1,
                    opened: 0,
                    branch: Branch::Cookie,
                });
                match phase {
                    Phase::Idle { k, opened, branch } if s.opens(j, branch, y) => {
                        let p = s.open(j, k, opened, branch, t);
                        s.phases.insert(j, p);
                        if s.advance(j, t, y, hit) {
                            still.push(j);
                        }
                    }
                    other => {
                        s.phases.insert(j, other);
                    }
                }
            }
        }
        s.active = still;
        s.ledger.record(cfg, y, fresh[t]);
    }
    let mut idle = Vec::new();
    for (j, phase) in s.phases {
        match phase {
            Phase::SeekU { rec } | Phase::SeekV { rec, .. } => s.records.push(rec),
            Phase::Idle { k, opened, branch } => idle.push(IdleSequence { j, k, opened, branch }),
        }
    }
    s.records.sort_by_key(|r| r.t);
    idle.sort_by_key(|i| (i.opened, i.j));
    (s.records, idle)
}
