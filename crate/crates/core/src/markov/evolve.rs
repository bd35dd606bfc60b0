use crate::schedule::SamplingSchedule;

use super::dd::Dd;
use super::distribution::Distribution;
use super::eigen::decompose_initial;
use super::MarkovError;

fn step_probability(schedule: &SamplingSchedule, t: u64, m: usize) -> Result<f64, MarkovError> {
    let p = schedule.p(t);
    let reason = if !(p.is_finite() && p > 0.0) {
        "must be positive"
    } else if (m - 1) as f64 * p >= 1.0 {
        "(m - 1) p_t must stay below 1"
    } else {
        return Ok(p);
    };
    Err(MarkovError::Schedule {
        t,
        p,
        reason: reason.into(),
    })
}

/// Step-by-step `π(t+1) = π(t) P_t`, carried in double-double so mass is
/// conserved far below the distribution tolerance over long runs.
#[derive(Debug, Clone)]
pub struct ExactEvolution<'a> {
    schedule: &'a SamplingSchedule,
    t: u64,
    state: Vec<Dd>,
    flow: Vec<Dd>,
}

impl<'a> ExactEvolution<'a> {
    pub fn new(pi0: &Distribution, schedule: &'a SamplingSchedule) -> Self {
        Self {
            schedule,
            t: 0,
            state: pi0.probs().iter().map(|&x| Dd::from(x)).collect(),
            flow: vec![Dd::ZERO; pi0.states()],
        }
    }

    /// Number of steps applied so far.
    pub fn tick(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self) -> Result<(), MarkovError> {
        let m = self.state.len();
        let p = step_probability(self.schedule, self.t, m)?;
        for pos in 0..m - 1 {
            self.flow[pos] = self.state[pos] * Dd::product((m - 1 - pos) as f64, p);
        }
        for pos in 0..m - 1 {
            self.state[pos] = self.state[pos] - self.flow[pos];
        }
        for pos in 1..m {
            self.state[pos] = self.state[pos] + self.flow[pos - 1];
        }
        self.t += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, t: u64) -> Result<(), MarkovError> {
        while self.t < t {
            self.step()?;
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<Distribution, MarkovError> {
        Distribution::new(self.state.iter().map(|d| d.to_f64().max(0.0)).collect())
    }
}

/// `π(T) = π(0) P_0 P_1 ... P_{T-1}` by direct multiplication.
pub fn evolve_exact(
    pi0: &Distribution,
    schedule: &SamplingSchedule,
    horizon: u64,
) -> Result<Distribution, MarkovError> {
    let mut ev = ExactEvolution::new(pi0, schedule);
    ev.advance_to(horizon)?;
    ev.distribution()
}

/// `π(T) = Σ_i α_i ξ^i ∏_{t<T} λ_i(t)` with `λ_m = 1`.
///
/// The coefficients alternate in sign and grow like binomials, so the
/// eigenvalue products and the final sum are formed in double-double.
pub fn evolve_spectral(
    pi0: &Distribution,
    schedule: &SamplingSchedule,
    horizon: u64,
) -> Result<Distribution, MarkovError> {
    let m = pi0.states();
    let alpha = decompose_initial(pi0)?;
    let mut products = vec![Dd::ONE; m];
    for t in 0..horizon {
        let p = step_probability(schedule, t, m)?;
        for (i, prod) in products.iter_mut().enumerate().take(m - 1) {
            let lambda = Dd::ONE - Dd::product((m - 1 - i) as f64, p);
            *prod = *prod * lambda;
        }
    }
    let raw = alpha.combine(Some(&products))?;
    let mut probs = Vec::with_capacity(m);
    for (j, x) in raw.into_iter().enumerate() {
        if x < -Distribution::TOLERANCE {
            return Err(MarkovError::InvalidDistribution(format!(
                "spectral sum lost precision at position {j}: {x}"
            )));
        }
        probs.push(x.max(0.0));
    }
    Distribution::new(probs)
}

/// `max_j |a_j - b_j| / max_j |b_j|`.
pub fn relative_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    diff / scale
}
