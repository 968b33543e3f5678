//! Three-level gated scoring and the `[a, b]` efficiency band.
//!
//! All arithmetic is exact over `Ratio<i128>`; scores are rounded only when
//! rendered.

use std::path::Path;

use num_integer::Roots;
use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::itinerary::Itinerary;
use crate::simulator::{simulate, Trace};
use crate::task::{Objective, Task};
use crate::world::World;

pub type Q = Ratio<i128>;

pub const W1: i128 = 60;
pub const W2: i128 = 20;
pub const W3: i128 = 20;

/// Fixed-point scale for the standard deviation: σ is floored to 1e-6.
pub const SIGMA_SCALE: i128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub a1: usize,
    pub b1: usize,
    pub a2: usize,
    pub b2: usize,
}

impl Counts {
    pub fn of(trace: &Trace) -> Counts {
        let (a1, b1) = trace.l1();
        let (a2, b2) = trace.l2();
        Counts { a1, b1, a2, b2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub s1: Q,
    pub s2: Q,
    pub s3: Q,
    pub total: Q,
    pub binary: bool,
    pub counts: Counts,
    pub objective_value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calibration {
    pub objective: Objective,
    pub mu: Q,
    pub sigma: Q,
    pub a: Q,
    pub b: Q,
    pub sample_values: Vec<u64>,
}

impl Calibration {
    pub fn sample_size(&self) -> usize {
        self.sample_values.len()
    }

    /// A band that awards full efficiency at or below `a` and none from `b`.
    pub fn fixed(objective: Objective, a: i128, b: i128) -> Calibration {
        Calibration {
            objective,
            mu: Q::new(a + b, 2),
            sigma: Q::new(b - a, 2),
            a: Q::from_integer(a),
            b: Q::from_integer(b),
            sample_values: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("calibration objective {calib:?} does not match task objective {task:?}")]
    ObjectiveMismatch { calib: Objective, task: Objective },
    #[error("calibration infeasible: only {got} of {needed} valid itineraries")]
    CalibrationInfeasible { got: usize, needed: usize },
    #[error("cannot read calibration file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed calibration JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad rational `{0}`")]
    Rational(String),
}

/// Level 3 term: full weight at or below `a`, nothing from `b` up, linear
/// in between. With `a == b` the middle branch is empty.
pub fn level3(s: Q, a: Q, b: Q) -> Q {
    let w3 = Q::from_integer(W3);
    if s <= a {
        w3
    } else if s >= b {
        Q::zero()
    } else {
        w3 * (Q::from_integer(1) - (s - a) / (b - a))
    }
}

/// The gated score for given item counts and objective value.
pub fn score_counts(c: Counts, s: u64, a: Q, b: Q) -> Score {
    let s1 = if c.b1 == 0 { Q::zero() } else { Q::new(W1 * c.a1 as i128, c.b1 as i128) };
    let l1_full = c.b1 > 0 && c.a1 == c.b1;
    let s2 = match (l1_full, c.b2) {
        (false, _) => Q::zero(),
        (true, 0) => Q::from_integer(W2),
        (true, b2) => Q::new(W2 * c.a2 as i128, b2 as i128),
    };
    let l2_full = l1_full && c.a2 == c.b2;
    let s3 = if l2_full { level3(Q::from_integer(s as i128), a, b) } else { Q::zero() };
    Score { s1, s2, s3, total: s1 + s2 + s3, binary: l1_full, counts: c, objective_value: s }
}

pub fn objective_value(trace: &Trace, objective: Objective) -> u64 {
    match objective {
        Objective::CostCents => trace.total_cost.cents(),
        Objective::TotalMinutes => u64::from(trace.total_minutes),
    }
}

pub fn evaluate(trace: &Trace, task: &Task, calib: &Calibration) -> Result<Score, EvalError> {
    if calib.objective != task.objective {
        return Err(EvalError::ObjectiveMismatch { calib: calib.objective, task: task.objective });
    }
    let s = objective_value(trace, task.objective);
    Ok(score_counts(Counts::of(trace), s, calib.a, calib.b))
}

pub fn binary_score(score: &Score) -> bool {
    score.s1 == Q::from_integer(W1)
}

/// Mean and floored population standard deviation of `values`, and the band
/// `[μ − σ, μ + σ]`.
pub fn calibration_from_values(objective: Objective, values: &[u64]) -> Calibration {
    if values.is_empty() {
        return Calibration {
            objective,
            mu: Q::zero(),
            sigma: Q::zero(),
            a: Q::zero(),
            b: Q::zero(),
            sample_values: Vec::new(),
        };
    }
    let n = values.len() as i128;
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    let sq: i128 = values.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let mu = Q::new(sum, n);
    // var = (nΣx² − (Σx)²) / n²
    let num = n * sq - sum * sum;
    let scaled = num * SIGMA_SCALE * SIGMA_SCALE / (n * n);
    let sigma = Q::new(scaled.sqrt(), SIGMA_SCALE);
    Calibration { objective, mu, sigma, a: mu - sigma, b: mu + sigma, sample_values: values.to_vec() }
}

/// Draws `n` valid itineraries from `sampler` and derives the band from their
/// objective values. Every sample is re-simulated; invalid ones are dropped
/// and the sampler is asked again, for at most `rounds` rounds. The sampler
/// receives the number still needed and the round index.
pub fn calibrate(
    world: &World,
    task: &Task,
    n: usize,
    rounds: usize,
    mut sampler: impl FnMut(usize, usize) -> Vec<Itinerary>,
) -> Result<(Calibration, Vec<Itinerary>), EvalError> {
    let mut kept: Vec<Itinerary> = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for round in 0..rounds.max(1) {
        if kept.len() >= n {
            break;
        }
        for it in sampler(n - kept.len(), round) {
            if kept.len() >= n || kept.contains(&it) {
                continue;
            }
            let trace = simulate(world, task, &it);
            if trace.fully_valid() {
                values.push(objective_value(&trace, task.objective));
                kept.push(it);
            }
        }
    }
    if kept.len() < n {
        return Err(EvalError::CalibrationInfeasible { got: kept.len(), needed: n });
    }
    Ok((calibration_from_values(task.objective, &values), kept))
}

// ---- presentation ----

/// Round half away from zero to two decimals.
pub fn render2(q: &Q) -> String {
    let hundredths = (q * Q::from_integer(100)).round().to_integer();
    let sign = if hundredths < 0 { "-" } else { "" };
    let h = hundredths.abs();
    format!("{sign}{}.{:02}", h / 100, h % 100)
}

pub fn render_exact(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse_exact(s: &str) -> Result<Q, EvalError> {
    let bad = || EvalError::Rational(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: i128 = n.parse().map_err(|_| bad())?;
    let d: i128 = d.parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub s1: String,
    pub s2: String,
    pub s3: String,
    pub total: String,
    pub binary: bool,
    pub exact: ExactScore,
    pub counts: Counts,
    pub objective_value: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactScore {
    pub s1: String,
    pub s2: String,
    pub s3: String,
    pub total: String,
}

impl Score {
    pub fn to_file(&self) -> ScoreFile {
        ScoreFile {
            s1: render2(&self.s1),
            s2: render2(&self.s2),
            s3: render2(&self.s3),
            total: render2(&self.total),
            binary: self.binary,
            exact: ExactScore {
                s1: render_exact(&self.s1),
                s2: render_exact(&self.s2),
                s3: render_exact(&self.s3),
                total: render_exact(&self.total),
            },
            counts: self.counts,
            objective_value: self.objective_value,
        }
    }

    pub fn from_file(f: &ScoreFile) -> Result<Score, EvalError> {
        Ok(Score {
            s1: parse_exact(&f.exact.s1)?,
            s2: parse_exact(&f.exact.s2)?,
            s3: parse_exact(&f.exact.s3)?,
            total: parse_exact(&f.exact.total)?,
            binary: f.binary,
            counts: f.counts,
            objective_value: f.objective_value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub objective: Objective,
    pub sample_size: usize,
    pub mu: String,
    pub sigma: String,
    pub a: String,
    pub b: String,
    pub sample_values: Vec<u64>,
}

impl Calibration {
    pub fn to_file(&self) -> CalibrationFile {
        CalibrationFile {
            objective: self.objective,
            sample_size: self.sample_size(),
            mu: render_exact(&self.mu),
            sigma: render_exact(&self.sigma),
            a: render_exact(&self.a),
            b: render_exact(&self.b),
            sample_values: self.sample_values.clone(),
        }
    }

    pub fn from_file(f: &CalibrationFile) -> Result<Calibration, EvalError> {
        let a = parse_exact(&f.a)?;
        let b = parse_exact(&f.b)?;
        if a > b {
            return Err(EvalError::Rational(format!("a = {} exceeds b = {}", f.a, f.b)));
        }
        Ok(Calibration {
            objective: f.objective,
            mu: parse_exact(&f.mu)?,
            sigma: parse_exact(&f.sigma)?,
            a,
            b,
            sample_values: f.sample_values.clone(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("calibration serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Calibration, EvalError> {
        Calibration::from_file(&serde_json::from_str(s)?)
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<Calibration, EvalError> {
    Calibration::from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i128) -> Q {
        Q::from_integer(n)
    }

    fn counts(a1: usize, b1: usize, a2: usize, b2: usize) -> Counts {
        Counts { a1, b1, a2, b2 }
    }

    #[test]
    fn worked_cases() {
        let full = score_counts(counts(8, 8, 3, 3), 50, q(100), q(200));
        assert_eq!((full.s1, full.s2, full.s3, full.total), (q(60), q(20), q(20), q(100)));
        assert!(full.binary);

        let half = score_counts(counts(3, 6, 2, 2), 0, q(0), q(1));
        assert_eq!((half.s1, half.s2, half.s3, half.total), (q(30), q(0), q(0), q(30)));
        assert!(!half.binary && !binary_score(&half));

        let l2 = score_counts(counts(4, 4, 1, 2), 0, q(0), q(1));
        assert_eq!((l2.s1, l2.s2, l2.s3, l2.total), (q(60), q(10), q(0), q(70)));

        assert_eq!(level3(q(15000), q(10000), q(20000)), q(10));
        assert_eq!(level3(q(20000), q(10000), q(20000)), q(0));
        assert_eq!(level3(q(10000), q(10000), q(20000)), q(20));
        assert_eq!(level3(q(7), q(7), q(7)), q(20));
        assert_eq!(level3(q(8), q(7), q(7)), q(0));
    }

    #[test]
    fn degenerate_denominators() {
        let empty = score_counts(counts(0, 0, 0, 2), 0, q(0), q(1));
        assert_eq!(empty.total, q(0));
        assert!(!binary_score(&empty));
        let no_constraints = score_counts(counts(4, 4, 0, 0), 5, q(0), q(10));
        assert_eq!(no_constraints.s2, q(20));
        assert_eq!(no_constraints.s3, q(10));
    }

    #[test]
    fn binary_needs_exact_full_level_one() {
        let almost = Score {
            s1: Q::new(5999, 100),
            s2: q(0),
            s3: q(0),
            total: Q::new(5999, 100),
            binary: false,
            counts: Counts::default(),
            objective_value: 0,
        };
        assert!(!binary_score(&almost));
        let s = score_counts(counts(2, 2, 0, 1), 0, q(0), q(1));
        assert!(binary_score(&s) && s.s2 == q(0));
    }

    #[test]
    fn calibration_examples() {
        let c = calibration_from_values(Objective::CostCents, &[9000, 11000]);
        assert_eq!((c.mu, c.sigma, c.a, c.b), (q(10000), q(1000), q(9000), q(11000)));
        let flat = calibration_from_values(Objective::CostCents, &[5, 5, 5]);
        assert_eq!((flat.a, flat.b), (q(5), q(5)));
        // σ² = 2/9 for {1, 2, 3}: floored at micro resolution.
        let c = calibration_from_values(Objective::TotalMinutes, &[1, 2, 3]);
        assert_eq!(c.mu, q(2));
        assert_eq!(c.sigma, Q::new(816_496, 1_000_000));
    }

    #[test]
    fn rendering() {
        assert_eq!(render2(&Q::new(200, 3)), "66.67");
        assert_eq!(render2(&Q::new(1, 200)), "0.01");
        assert_eq!(render2(&q(60)), "60.00");
        assert_eq!(render_exact(&Q::new(200, 3)), "200/3");
        assert_eq!(parse_exact("200/3").unwrap(), Q::new(200, 3));
        assert_eq!(parse_exact("-4").unwrap(), q(-4));
        assert!(parse_exact("1/0").is_err());
        let c = calibration_from_values(Objective::CostCents, &[1, 2, 3, 10]);
        assert_eq!(Calibration::from_json_str(&c.to_json_string()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn gating_and_range(b1 in 0usize..20, a1f in 0usize..=20, b2 in 0usize..6, a2f in 0usize..=6,
                            s in 0u64..1000, a in 0i128..1000, w in 0i128..500) {
            let c = counts(a1f.min(b1), b1, a2f.min(b2), b2);
            let sc = score_counts(c, s, q(a), q(a + w));
            prop_assert!(sc.s2.is_zero() || c.a1 == c.b1);
            prop_assert!(sc.s3.is_zero() || (c.a1 == c.b1 && c.a2 == c.b2));
            prop_assert!(sc.total >= q(0) && sc.total <= q(100));
            prop_assert_eq!(sc.total, sc.s1 + sc.s2 + sc.s3);
            prop_assert_eq!(sc.binary, sc.s1 == q(60));
        }

        #[test]
        fn level3_is_monotone_and_continuous(a in 0i128..1000, w in 1i128..500, s in 0i128..2000, d in 0i128..50) {
            let (qa, qb) = (q(a), q(a + w));
            prop_assert!(level3(q(s + d), qa, qb) <= level3(q(s), qa, qb));
            // The middle branch meets the outer ones at the ends.
            prop_assert_eq!(q(20) * (q(1) - (qa - qa) / (qb - qa)), level3(qa, qa, qb));
            prop_assert_eq!(q(20) * (q(1) - (qb - qa) / (qb - qa)), level3(qb, qa, qb));
        }

        #[test]
        fn more_passed_items_never_lower_total(b1 in 1usize..20, a1 in 0usize..20, b2 in 0usize..6, a2 in 0usize..6) {
            let a1 = a1.min(b1 - 1);
            let a2 = a2.min(b2);
            let lo = score_counts(counts(a1, b1, a2, b2), 3, q(0), q(10));
            let hi = score_counts(counts(a1 + 1, b1, a2, b2), 3, q(0), q(10));
            prop_assert!(hi.total >= lo.total);
        }

        #[test]
        fn sigma_is_the_floored_root(values in prop::collection::vec(0u64..2_000_000, 1..60)) {
            let c = calibration_from_values(Objective::CostCents, &values);
            let n = values.len() as i128;
            let mu = Q::new(values.iter().map(|&v| v as i128).sum(), n);
            let var = values.iter().map(|&v| { let d = q(v as i128) - mu; d * d }).sum::<Q>() / q(n);
            let step = Q::new(1, SIGMA_SCALE);
            prop_assert_eq!(c.mu, mu);
            prop_assert!(c.sigma * c.sigma <= var);
            prop_assert!((c.sigma + step) * (c.sigma + step) > var);
            prop_assert_eq!(c.a, mu - c.sigma);
            prop_assert_eq!(c.b, mu + c.sigma);
        }
    }
}
