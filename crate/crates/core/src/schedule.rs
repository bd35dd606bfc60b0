//! Peer-sampling probability schedules `p_t`.
//!
//! `p_t` is the per-node probability of sampling one specific peer at step
//! `t` (steps count from 0). A valid schedule keeps `0 < N * p_t < 1`, so a
//! node's random view is empty with probability `1 - N * p_t`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("sampling probability at t={t} is {p}: need 0 < N*p < 1, got N*p = {np} with N = {n}")]
    OutOfRange { t: u64, p: f64, n: usize, np: f64 },
    #[error("invalid schedule parameters: {0}")]
    Parameters(String),
    #[error("cannot parse schedule {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// What a tabulated schedule does past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    HoldLast,
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingSchedule {
    Constant(f64),
    /// `p_t = base / (1 + t / scale)^exponent`.
    PolynomialDecay {
        base: f64,
        scale: f64,
        exponent: f64,
    },
    Tabulated {
        values: Vec<f64>,
        tail: Tail,
    },
}

impl SamplingSchedule {
    /// The decaying schedule `(1/N) (1 + t/100)^-2`, with the base pulled
    /// in by a relative `1e-12` so that `N * p_0` stays strictly below 1.
    pub fn inverse_square_decay(node_count: usize) -> Self {
        SamplingSchedule::PolynomialDecay {
            base: (1.0 - 1e-12) / node_count as f64,
            scale: 100.0,
            exponent: 2.0,
        }
    }

    /// Checks the parameters themselves (not the `N * p_t < 1` range, which
    /// depends on the population).
    pub fn validate_parameters(&self) -> Result<(), ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::Parameters(msg));
        match self {
            SamplingSchedule::Constant(p) if !(p.is_finite() && *p > 0.0) => {
                bad(format!("constant probability {p} must be positive"))
            }
            SamplingSchedule::PolynomialDecay {
                base,
                scale,
                exponent,
            } => {
                if !(base.is_finite() && *base > 0.0) {
                    bad(format!("decay base {base} must be positive"))
                } else if !(scale.is_finite() && *scale > 0.0) {
                    bad(format!("decay scale {scale} must be positive"))
                } else if !(exponent.is_finite() && *exponent >= 0.0) {
                    bad(format!("decay exponent {exponent} must be non-negative"))
                } else {
                    Ok(())
                }
            }
            SamplingSchedule::Tabulated { values, .. } if values.is_empty() => {
                bad("tabulated schedule has no entries".into())
            }
            _ => Ok(()),
        }
    }

    /// `p_t`.
    pub fn p(&self, t: u64) -> f64 {
        match self {
            SamplingSchedule::Constant(p) => *p,
            SamplingSchedule::PolynomialDecay {
                base,
                scale,
                exponent,
            } => base / (1.0 + t as f64 / scale).powf(*exponent),
            SamplingSchedule::Tabulated { values, tail } => {
                let len = values.len() as u64;
                let idx = if t < len {
                    t
                } else {
                    match tail {
                        Tail::HoldLast => len - 1,
                        Tail::Cycle => t % len,
                    }
                };
                values[idx as usize]
            }
        }
    }

    /// `p_t`, checked against `0 < N * p_t < 1`.
    pub fn checked_p(&self, t: u64, node_count: usize) -> Result<f64, ScheduleError> {
        let p = self.p(t);
        let np = node_count as f64 * p;
        if p > 0.0 && np < 1.0 && np.is_finite() {
            Ok(p)
        } else {
            Err(ScheduleError::OutOfRange {
                t,
                p,
                n: node_count,
                np,
            })
        }
    }

    /// Checks `0 < N * p_t < 1` for every `t < horizon`. Constant and
    /// decaying schedules are monotone, so only their first step matters;
    /// tables are checked entry by entry.
    pub fn validate_for(&self, node_count: usize, horizon: u64) -> Result<(), ScheduleError> {
        self.validate_parameters()?;
        match self {
            SamplingSchedule::Constant(_) | SamplingSchedule::PolynomialDecay { .. } => {
                self.checked_p(0, node_count).map(|_| ())
            }
            SamplingSchedule::Tabulated { values, .. } => {
                let upto = (values.len() as u64).min(horizon.max(1));
                (0..upto).try_for_each(|t| self.checked_p(t, node_count).map(|_| ()))
            }
        }
    }
}

impl fmt::Display for SamplingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingSchedule::Constant(p) => write!(f, "constant:{p}"),
            SamplingSchedule::PolynomialDecay {
                base,
                scale,
                exponent,
            } => write!(f, "decay:{base},{scale},{exponent}"),
            SamplingSchedule::Tabulated { values, tail } => {
                let tail = match tail {
                    Tail::HoldLast => "hold",
                    Tail::Cycle => "cycle",
                };
                write!(f, "table:{tail}:")?;
                for (k, v) in values.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses the textual forms produced by `Display`:
/// `constant:P`, `decay:BASE,SCALE,EXPONENT`, `table:hold|cycle:P0,P1,...`,
/// plus `inverse_square:N` for [`SamplingSchedule::inverse_square_decay`].
impl FromStr for SamplingSchedule {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| ScheduleError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let numbers = |list: &str| -> Result<Vec<f64>, ScheduleError> {
            list.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| fail("bad number")))
                .collect()
        };
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| fail("missing ':'"))?;
        let schedule = match kind {
            "constant" => SamplingSchedule::Constant(
                rest.trim().parse().map_err(|_| fail("bad probability"))?,
            ),
            "decay" => match numbers(rest)?.as_slice() {
                &[base, scale, exponent] => SamplingSchedule::PolynomialDecay {
                    base,
                    scale,
                    exponent,
                },
                _ => return Err(fail("decay takes base,scale,exponent")),
            },
            "inverse_square" => SamplingSchedule::inverse_square_decay(
                rest.trim()
                    .parse()
                    .ok()
                    .filter(|&n: &usize| n > 0)
                    .ok_or_else(|| fail("inverse_square takes a positive node count"))?,
            ),
            "table" => {
                let (tail, list) = rest
                    .split_once(':')
                    .ok_or_else(|| fail("missing tail rule"))?;
                let tail = match tail {
                    "hold" => Tail::HoldLast,
                    "cycle" => Tail::Cycle,
                    _ => return Err(fail("tail must be hold or cycle")),
                };
                SamplingSchedule::Tabulated {
                    values: numbers(list)?,
                    tail,
                }
            }
            _ => return Err(fail("unknown schedule kind")),
        };
        schedule.validate_parameters()?;
        Ok(schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_values() {
        let s = SamplingSchedule::inverse_square_decay(100);
        assert!((s.p(0) - 0.01).abs() < 1e-13);
        assert!(s.checked_p(0, 100).is_ok());
        assert_eq!("inverse_square:100".parse::<SamplingSchedule>().unwrap(), s);
        assert!((s.p(100) - 0.0025).abs() < 1e-13);
        assert!(s.p(1_000_000) < 1e-7);
    }

    #[test]
    fn range_check() {
        let s = SamplingSchedule::Constant(0.01);
        assert!(s.checked_p(0, 99).is_ok());
        assert!(matches!(
            s.checked_p(3, 100),
            Err(ScheduleError::OutOfRange { t: 3, .. })
        ));
        assert!(SamplingSchedule::Constant(0.0).validate_for(10, 1).is_err());
    }

    #[test]
    fn table_tails() {
        let hold = SamplingSchedule::Tabulated {
            values: vec![0.1, 0.2],
            tail: Tail::HoldLast,
        };
        let cycle = SamplingSchedule::Tabulated {
            values: vec![0.1, 0.2],
            tail: Tail::Cycle,
        };
        assert_eq!(hold.p(5), 0.2);
        assert_eq!(cycle.p(4), 0.1);
        let bad = SamplingSchedule::Tabulated {
            values: vec![0.1, 0.6],
            tail: Tail::HoldLast,
        };
        assert!(matches!(
            bad.validate_for(2, 10),
            Err(ScheduleError::OutOfRange { t: 1, .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        for s in [
            SamplingSchedule::Constant(1.0 / 200.0),
            SamplingSchedule::inverse_square_decay(100),
            SamplingSchedule::Tabulated {
                values: vec![0.001, 0.0025, 1e-5],
                tail: Tail::Cycle,
            },
        ] {
            assert_eq!(s.to_string().parse::<SamplingSchedule>().unwrap(), s);
        }
        assert!("linear:1".parse::<SamplingSchedule>().is_err());
        assert!("decay:1,2".parse::<SamplingSchedule>().is_err());
    }
}
