//! Text record for trajectories: a header with the regeneration key and the
//! environment digest, followed by the increments.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{CookieEnvironment, Trajectory};
use crate::error::{Error, Result};

const MAGIC: &str = "cookie-walk-trajectory v1";
const PER_LINE: usize = 32;

impl Trajectory {
    pub fn to_record(&self) -> String {
        let mut out = String::with_capacity(self.horizon() * 3 + 128);
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "seed {}", self.seed());
        let _ = writeln!(out, "stream {}", self.stream());
        let _ = writeln!(out, "env {}", self.env().digest());
        let _ = writeln!(out, "horizon {}", self.horizon());
        let incs: Vec<i64> = self.increments().collect();
        for chunk in incs.chunks(PER_LINE) {
            let line: Vec<String> = chunk.iter().map(i64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses a record produced by [`Trajectory::to_record`]; `env` must match
    /// the digest stored in the header.
    pub fn from_record(text: &str, env: Arc<CookieEnvironment>) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Parse("missing header line".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {name}")))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse(format!("expected {name}, got {line:?}")))
        };
        let num = |s: String, name: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Parse(format!("bad {name}: {s}")))
        };
        let seed = num(field("seed")?, "seed")?;
        let stream = num(field("stream")?, "stream")?;
        let digest = field("env")?;
        let horizon = num(field("horizon")?, "horizon")? as usize;
        if digest != env.digest() {
            return Err(Error::Parse(format!(
                "environment digest {digest} does not match {}",
                env.digest()
            )));
        }
        let mut positions = Vec::with_capacity(horizon + 1);
        positions.push(0i64);
        for line in lines {
            for tok in line.split_whitespace() {
                let inc: i64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad increment {tok:?}")))?;
                positions.push(positions.last().unwrap() + inc);
            }
        }
        if positions.len() != horizon + 1 {
            return Err(Error::Parse(format!(
                "expected {horizon} increments, found {}",
                positions.len() - 1
            )));
        }
        Trajectory::from_positions(positions, env, seed, stream)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{simulate_replica, JumpDistribution};
    use proptest::prelude::*;

    fn env(eps: f64) -> Arc<CookieEnvironment> {
        Arc::new(CookieEnvironment::one_cookie(
            JumpDistribution::epsilon_family(15, eps).unwrap(),
        ))
    }

    #[test]
    fn identical_keys_serialize_identically() {
        let e = env(0.05);
        let a = simulate_replica(&e, 17, 2, 5000).to_record();
        let b = simulate_replica(&e, 17, 2, 5000).to_record();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn rejects_mismatched_environment_and_garbage() {
        let rec = simulate_replica(&env(0.05), 1, 0, 100).to_record();
        assert!(Trajectory::from_record(&rec, env(0.06)).is_err());
        assert!(Trajectory::from_record("nonsense", env(0.05)).is_err());
        let truncated: String = rec.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(Trajectory::from_record(&truncated, env(0.05)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn record_round_trips(seed in any::<u64>(), stream in 0u64..1000, horizon in 0usize..700) {
            let e = env(0.2);
            let traj = simulate_replica(&e, seed, stream, horizon);
            let back = Trajectory::from_record(&traj.to_record(), e).unwrap();
            prop_assert_eq!(back, traj);
        }
    }
}
