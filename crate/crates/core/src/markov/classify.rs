use crate::schedule::SamplingSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AlmostSureConvergence,
    NotAlmostSure,
    Unknown,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::AlmostSureConvergence => "almost_sure",
            Verdict::NotAlmostSure => "not_almost_sure",
            Verdict::Unknown => "unknown",
        }
    }
}

/// Whether a node reaches `X = 1` with probability one under a schedule.
///
/// The verdict comes from the schedule family: convergence is almost sure
/// exactly when `Σ p_t` diverges. The partial product and sum up to the
/// horizon are reported alongside but never decide the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleClassification {
    pub verdict: Verdict,
    pub horizon: u64,
    /// `∏_{t=0}^{horizon} (1 - p_t)`.
    pub residual_product: f64,
    /// `Σ_{t=0}^{horizon} p_t`.
    pub sum_pt: f64,
}

pub fn classify_schedule(schedule: &SamplingSchedule, horizon: u64) -> ScheduleClassification {
    let verdict = match schedule {
        SamplingSchedule::Constant(_) => Verdict::AlmostSureConvergence,
        SamplingSchedule::PolynomialDecay { exponent, .. } if *exponent > 1.0 => {
            Verdict::NotAlmostSure
        }
        SamplingSchedule::PolynomialDecay { .. } => Verdict::AlmostSureConvergence,
        SamplingSchedule::Tabulated { .. } => Verdict::Unknown,
    };
    let mut sum_pt = 0.0;
    let mut log_product = 0.0;
    for t in 0..=horizon {
        let p = schedule.p(t);
        sum_pt += p;
        log_product += if p < 1.0 {
            (-p).ln_1p()
        } else {
            f64::NEG_INFINITY
        };
    }
    ScheduleClassification {
        verdict,
        horizon,
        residual_product: log_product.exp(),
        sum_pt,
    }
}
