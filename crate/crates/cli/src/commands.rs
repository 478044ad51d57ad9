use std::time::Instant;

use anyhow::anyhow;
use cookie_walk::coupling::{verify_coupling, CheckStatus};
use cookie_walk::criteria::{
    ballisticity_condition, classify, frontier_epsilon, search_parameters, total_drift, Classification,
};
use cookie_walk::oracles::{
    exit_time_moments, geometric_block_bound, martingale_lln_check, strassen_pair, CoinWalk, DiscreteLaw,
    ShiftedCookieWalk,
};
use cookie_walk::renewal::{
    aggregate_naive, check_speed_sandwich, default_guard, detect_cut_times, estimate_speed_renewal,
    renewal_moments, speed_from_moments, SpeedMethod, DEFAULT_LEVEL,
};
use cookie_walk::replicas::run_replicas;
use cookie_walk::stats::RatioMoments;
use cookie_walk::walk::checks::{check_increment_support, check_no_jump_over_range};
use cookie_walk::walk::{DistributionSpec, EnvironmentSpec};
use cookie_walk::{simulate_replica, JumpDistribution, UniformSource};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_grid, parse_range, FamilyArg, Format, Resolved};
use crate::output::{csv_string, json_report, write_output};
use crate::Failure;

/// Renders and writes the output, returning the pass flag.
fn finish(
    command: &str,
    run: &Resolved,
    result: Value,
    csv: impl FnOnce() -> anyhow::Result<String>,
    pass: bool,
    start: Instant,
) -> Result<bool, Failure> {
    let body = match run.format {
        Format::Json => json_report(command, run, result, pass, start),
        Format::Csv => csv(),
        Format::Record => Err(anyhow!("record output is only available for `simulate`")),
    }
    .map_err(Failure::Config)?;
    write_output(run.raw.output.as_deref(), &body).map_err(Failure::Runtime)?;
    Ok(pass)
}

fn family_max_jump(run: &Resolved) -> Option<(i64, f64)> {
    match run.raw.distribution.as_ref()? {
        EnvironmentSpec::Single(DistributionSpec::Family { max_jump, epsilon }) => Some((*max_jump, *epsilon)),
        _ => None,
    }
}

#[derive(Serialize)]
struct CriteriaRow {
    c: u32,
    ell: u32,
    delta: f64,
    condition_lhs: f64,
    condition_rhs: f64,
    satisfied: bool,
    frontier_epsilon: Option<f64>,
}

pub fn criteria(run: &Resolved) -> Result<bool, Failure> {
    let start = Instant::now();
    let q = run.single_law().map_err(Failure::Config)?;
    let (c, ell) = (run.blocks.c, run.blocks.ell);
    let report = ballisticity_condition(q, c, ell).map_err(|e| Failure::Config(e.into()))?;
    let frontier = family_max_jump(run)
        .and_then(|(l, _)| frontier_epsilon(c, ell, |e| JumpDistribution::epsilon_family(l, e)).ok());
    let delta = total_drift(&run.env);
    let result = json!({
        "criteria": report,
        "total_drift": delta,
        "classification": classify(delta).ok(),
        "assumptions": run.env.assumptions(),
        "frontier_epsilon": frontier,
        "first_satisfying_parameters": search_parameters(q),
    });
    let row = CriteriaRow {
        c,
        ell,
        delta: report.delta,
        condition_lhs: report.condition_lhs,
        condition_rhs: report.condition_rhs,
        satisfied: report.satisfied,
        frontier_epsilon: frontier,
    };
    finish("criteria", run, result, || csv_string(&[row]), report.consequences_hold, start)
}

#[derive(Serialize)]
struct SimulateRow {
    seed: u64,
    replica: u64,
    horizon: usize,
    final_position: i64,
    min_position: i64,
    max_position: i64,
    naive_speed: f64,
    checks_pass: bool,
}

pub fn simulate(run: &Resolved) -> Result<bool, Failure> {
    let start = Instant::now();
    if run.format == Format::Record {
        if run.replicas != 1 {
            return Err(Failure::Config(anyhow!(
                "config field `replicas`: record output holds exactly one trajectory"
            )));
        }
        let traj = simulate_replica(&run.env, run.seed, 0, run.horizon);
        let pass = check_no_jump_over_range(&traj).is_ok() && check_increment_support(&traj).is_ok();
        write_output(run.raw.output.as_deref(), &traj.to_record()).map_err(Failure::Runtime)?;
        return Ok(pass);
    }
    let rows = run_replicas(run.replicas, |r| {
        let traj = simulate_replica(&run.env, run.seed, r, run.horizon);
        let pos = traj.positions();
        SimulateRow {
            seed: run.seed,
            replica: r,
            horizon: run.horizon,
            final_position: traj.final_position(),
            min_position: traj.min_position(),
            max_position: pos.iter().copied().max().unwrap_or(0),
            naive_speed: traj.final_position() as f64 / run.horizon as f64,
            checks_pass: check_no_jump_over_range(&traj).is_ok() && check_increment_support(&traj).is_ok(),
        }
    });
    let pass = rows.iter().all(|r| r.checks_pass);
    let result = json!({ "horizon": run.horizon, "trajectories": rows });
    finish("simulate", run, result, || csv_string(&rows), pass, start)
}

#[derive(Serialize)]
struct SpeedRow {
    seed: u64,
    /// Empty for the across-replica aggregate.
    replica: Option<u64>,
    method: &'static str,
    point: f64,
    ci_low: f64,
    ci_high: f64,
    n_renewals: usize,
}

struct ReplicaSpeed {
    naive: f64,
    renewal: Option<cookie_walk::renewal::SpeedEstimate>,
    moments: RatioMoments,
    sandwich: Option<String>,
}

pub fn speed(run: &Resolved) -> Result<bool, Failure> {
    let start = Instant::now();
    let guard = run
        .guard
        .unwrap_or_else(|| default_guard(run.env.max_jump(), total_drift(&run.env)));
    let per = run_replicas(run.replicas, |r| {
        let traj = simulate_replica(&run.env, run.seed, r, run.horizon);
        let cuts = detect_cut_times(&traj, guard);
        ReplicaSpeed {
            naive: traj.final_position() as f64 / run.horizon as f64,
            renewal: estimate_speed_renewal(&cuts, DEFAULT_LEVEL).ok(),
            moments: renewal_moments(&cuts),
            sandwich: check_speed_sandwich(&traj, &cuts)
                .err()
                .map(|v| format!("replica {r}, step {}: {}", v.step, v.detail)),
        }
    });
    let mut rows = Vec::new();
    for (r, p) in per.iter().enumerate() {
        rows.push(SpeedRow {
            seed: run.seed,
            replica: Some(r as u64),
            method: SpeedMethod::Naive.as_str(),
            point: p.naive,
            ci_low: p.naive,
            ci_high: p.naive,
            n_renewals: 0,
        });
        if let Some(e) = p.renewal {
            rows.push(SpeedRow {
                seed: run.seed,
                replica: Some(r as u64),
                method: e.method.as_str(),
                point: e.point,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                n_renewals: e.n_renewals,
            });
        }
    }
    let points: Vec<f64> = per.iter().map(|p| p.naive).collect();
    let naive = aggregate_naive(&points, DEFAULT_LEVEL, run.seed).map_err(|e| Failure::Runtime(e.into()))?;
    rows.push(SpeedRow {
        seed: run.seed,
        replica: None,
        method: SpeedMethod::Naive.as_str(),
        point: naive.estimate.point,
        ci_low: naive.estimate.ci_low,
        ci_high: naive.estimate.ci_high,
        n_renewals: 0,
    });
    let pooled = per.iter().fold(RatioMoments::default(), |a, p| a.merge(p.moments));
    let renewal = speed_from_moments(&pooled, DEFAULT_LEVEL);
    if let Ok(e) = &renewal {
        rows.push(SpeedRow {
            seed: run.seed,
            replica: None,
            method: e.method.as_str(),
            point: e.point,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            n_renewals: e.n_renewals,
        });
    }
    let violations: Vec<&String> = per.iter().filter_map(|p| p.sandwich.as_ref()).collect();
    let pass = violations.is_empty();
    let result = json!({
        "guard": guard,
        "level": DEFAULT_LEVEL,
        "naive": naive,
        "renewal": renewal.as_ref().ok(),
        "renewal_error": renewal.as_ref().err().map(ToString::to_string),
        "relative_gap": renewal.as_ref().ok().map(|e| (e.point - naive.estimate.point).abs() / naive.estimate.point.abs()),
        "speed_bracket_violations": violations,
        "estimates": rows,
    });
    finish("speed", run, result, || csv_string(&rows), pass, start)
}

#[derive(Serialize)]
struct CheckRow<'a> {
    seed: u64,
    replicas: usize,
    name: &'a str,
    status: CheckStatus,
    observed: f64,
    threshold: f64,
    std_error: f64,
    detail: &'a str,
}

pub fn couple(run: &Resolved) -> Result<bool, Failure> {
    let start = Instant::now();
    run.single_law().map_err(Failure::Config)?;
    let report = verify_coupling(&run.env, &run.blocks, run.replicas, run.horizon, run.seed)
        .map_err(|e| Failure::Config(e.into()))?;
    let rows: Vec<CheckRow> = report
        .checks
        .iter()
        .map(|c| CheckRow {
            seed: run.seed,
            replicas: run.replicas,
            name: &c.name,
            status: c.status,
            observed: c.observed,
            threshold: c.threshold,
            std_error: c.std_error,
            detail: &c.detail,
        })
        .collect();
    let csv = csv_string(&rows);
    let result = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.into()))?;
    finish("couple", run, result, || csv, report.all_pass, start)
}

#[derive(Serialize)]
struct SuiteRow {
    seed: u64,
    replicas: usize,
    suite: &'static str,
    pass: bool,
}

/// Exit-time moments, the pathwise block bound, martingale averaging and the
/// monotone coupling, on the coin walk and on the configured walk.
pub fn verify_lemmas(run: &Resolved, gap_bound: f64) -> Result<bool, Failure> {
    let start = Instant::now();
    let (a, b, from) = (0, 6, 3);
    let env = run.env.as_ref();

    let coin = exit_time_moments(|| CoinWalk(from), a, b, run.replicas, run.seed);
    let walk = exit_time_moments(|| ShiftedCookieWalk::new(env, from), a, b, run.replicas, run.seed);
    let horizon = 1usize << 20;
    let block = run_replicas(run.replicas, |r| {
        let coin = geometric_block_bound(&mut CoinWalk(from), UniformSource::new(run.seed, r), a, b, horizon);
        let walk = geometric_block_bound(
            &mut ShiftedCookieWalk::new(env, from),
            UniformSource::new(run.seed, r),
            a,
            b,
            horizon,
        );
        (coin.map(|s| s.holds).unwrap_or(false), walk.map(|s| s.holds).map_err(|e| e.to_string()))
    });
    let coin_misses = block.iter().filter(|x| !x.0).count();
    let walk_misses = block.iter().filter(|x| x.1 == Ok(false)).count();
    let walk_error = block.iter().find_map(|x| x.1.clone().err());
    let exit_pass = coin.as_ref().is_ok_and(|r| r.within_bound)
        && walk.as_ref().is_ok_and(|r| r.within_bound)
        && coin_misses == 0
        && walk_misses == 0
        && walk_error.is_none();
    let exit = json!({
        "interval": [a, b],
        "start": from,
        "coin": coin.as_ref().ok(),
        "walk": walk.as_ref().ok(),
        "walk_error": walk.as_ref().err().map(ToString::to_string).or(walk_error),
        "block_bound_checked": 2 * run.replicas,
        "block_bound_violations": coin_misses + walk_misses,
        "pass": exit_pass,
    });

    let uniform = martingale_lln_check(|_, s| 2.0 * s.next_uniform() - 1.0, 1.0, run.horizon, run.seed);
    let traj = simulate_replica(&run.env, run.seed, 0, run.horizon);
    let guard = run
        .guard
        .unwrap_or_else(|| default_guard(run.env.max_jump(), total_drift(&run.env)));
    let cuts = detect_cut_times(&traj, guard);
    let gaps: Vec<f64> = cuts.windows(2).map(|w| (w[1].tau - w[0].tau) as f64).collect();
    let renewal = (gaps.len() >= 2).then(|| martingale_lln_check(|i, _| gaps[i], gap_bound, gaps.len(), run.seed));
    let mart_pass = uniform.holds && renewal.as_ref().is_none_or(|r| r.holds);
    let martingale = json!({
        "uniform": uniform,
        "renewal_gaps": renewal,
        "declared_gap_bound": gap_bound,
        "pass": mart_pass,
    });

    let law = DiscreteLaw::from_jumps(run.single_law().map_err(Failure::Config)?);
    let shifted = law.shifted(1.0);
    let n = run.horizon;
    let mut summaries = Vec::new();
    let mut strassen_pass = true;
    for (name, upper) in [("identical", &law), ("shifted", &shifted)] {
        match strassen_pair(|_, _| upper.clone(), |_| law.clone(), run.seed, n) {
            Ok(s) => {
                let (ku, kl) = (s.ks_upper(upper), s.ks_lower(&law));
                let ok = ku < 0.02 && kl < 0.02;
                strassen_pass &= ok;
                summaries.push(json!({"case": name, "n": n, "strict": s.strict, "ks_upper": ku, "ks_lower": kl, "pass": ok}));
            }
            Err(e) => {
                strassen_pass = false;
                summaries.push(json!({"case": name, "error": e.to_string(), "pass": false}));
            }
        }
    }
    let strassen = json!({ "cases": summaries, "pass": strassen_pass });

    let pass = exit_pass && mart_pass && strassen_pass;
    let rows = [("exit-time", exit_pass), ("martingale", mart_pass), ("monotone-coupling", strassen_pass)]
        .map(|(suite, pass)| SuiteRow { seed: run.seed, replicas: run.replicas, suite, pass });
    let result = json!({
        "exit_time": exit,
        "martingale": martingale,
        "monotone_coupling": strassen,
    });
    finish("verify-lemmas", run, result, || csv_string(&rows), pass, start)
}

#[derive(Serialize)]
struct SweepRow {
    epsilon: Option<f64>,
    c: u32,
    ell: u32,
    delta: f64,
    condition_lhs: f64,
    condition_rhs: f64,
    satisfied: bool,
    classification: Option<Classification>,
    seed: Option<u64>,
    replicas: Option<usize>,
    horizon: Option<usize>,
    speed: Option<f64>,
    speed_ci_low: Option<f64>,
    speed_ci_high: Option<f64>,
}

pub struct SweepArgs<'a> {
    pub family: Option<FamilyArg>,
    pub eps: Option<&'a str>,
    pub c_range: Option<&'a str>,
    pub ell_range: Option<&'a str>,
    pub with_speed: bool,
}

pub fn sweep(run: &Resolved, args: &SweepArgs) -> Result<bool, Failure> {
    let start = Instant::now();
    let cfg = |e: anyhow::Error| Failure::Config(e);
    let laws: Vec<(Option<f64>, JumpDistribution)> = match args.eps {
        Some(grid) => {
            let max_jump = args
                .family
                .map(|f| f.max_jump)
                .or_else(|| family_max_jump(run).map(|f| f.0))
                .ok_or_else(|| cfg(anyhow!("--eps needs the family's L (use --family L=...)")))?;
            parse_grid(grid)
                .map_err(cfg)?
                .into_iter()
                .map(|e| {
                    JumpDistribution::epsilon_family(max_jump, e)
                        .map(|q| (Some(e), q))
                        .map_err(|err| cfg(anyhow!("--eps: {err}")))
                })
                .collect::<Result<_, _>>()?
        }
        None => vec![(None, run.single_law().map_err(cfg)?.clone())],
    };
    let cs = match args.c_range {
        Some(r) => parse_range(r).map_err(cfg)?,
        None => vec![run.blocks.c],
    };
    let ells = match args.ell_range {
        Some(r) => parse_range(r).map_err(cfg)?,
        None => vec![run.blocks.ell],
    };
    let cells: Vec<(u32, u32)> = cs
        .iter()
        .flat_map(|&c| ells.iter().map(move |&l| (c, l)))
        .filter(|&(c, l)| c >= 3 && l >= 3 * c)
        .collect();
    if cells.is_empty() {
        return Err(cfg(anyhow!("no (c, ell) cell with c >= 3 and ell >= 3c in the requested ranges")));
    }

    let mut rows = Vec::new();
    let mut pass = true;
    for (eps, q) in &laws {
        let speed = if args.with_speed {
            let env = std::sync::Arc::new(cookie_walk::CookieEnvironment::one_cookie(q.clone()));
            let points = run_replicas(run.replicas, |r| {
                simulate_replica(&env, run.seed, r, run.horizon).final_position() as f64 / run.horizon as f64
            });
            Some(aggregate_naive(&points, DEFAULT_LEVEL, run.seed).map_err(|e| Failure::Runtime(e.into()))?)
        } else {
            None
        };
        for &(c, ell) in &cells {
            let rep = ballisticity_condition(q, c, ell).map_err(|e| cfg(e.into()))?;
            pass &= rep.consequences_hold;
            rows.push(SweepRow {
                epsilon: *eps,
                c,
                ell,
                delta: rep.delta,
                condition_lhs: rep.condition_lhs,
                condition_rhs: rep.condition_rhs,
                satisfied: rep.satisfied,
                classification: rep.classification,
                seed: speed.map(|_| run.seed),
                replicas: speed.map(|_| run.replicas),
                horizon: speed.map(|_| run.horizon),
                speed: speed.map(|s| s.estimate.point),
                speed_ci_low: speed.map(|s| s.estimate.ci_low),
                speed_ci_high: speed.map(|s| s.estimate.ci_high),
            });
        }
    }
    // Along an epsilon grid the left-hand side falls strictly whenever the
    // long jump reaches past the block.
    let mut monotone = true;
    if args.eps.is_some() {
        for &(c, ell) in &cells {
            let reach = laws[0].1.max_jump() >= i64::from(ell + c - 1);
            let lhs: Vec<f64> = rows
                .iter()
                .filter(|r| r.c == c && r.ell == ell)
                .map(|r| r.condition_lhs)
                .collect();
            if reach && lhs.windows(2).any(|w| w[1] >= w[0]) {
                monotone = false;
            }
        }
    }
    pass &= monotone;
    let result = json!({ "rows": rows, "lhs_strictly_decreasing": monotone });
    finish("sweep", run, result, || csv_string(&rows), pass, start)
}
