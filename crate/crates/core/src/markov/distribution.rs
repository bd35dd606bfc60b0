use super::MarkovError;

/// A probability vector over the positions of the X chain.
///
/// Position `j` (one-based) holds `P{X = m - j + 1}`: the first entry is the
/// worst state `X = m`, the last the absorbing state `X = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Allowed deviation of the total mass from 1.
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self, MarkovError> {
        if probs.len() < 2 {
            return Err(MarkovError::InvalidDistribution(format!(
                "need at least 2 states, got {}",
                probs.len()
            )));
        }
        if let Some((j, &x)) = probs
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(MarkovError::InvalidDistribution(format!(
                "entry {j} is {x}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(MarkovError::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalises non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self, MarkovError> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(MarkovError::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// All mass on `X = x`.
    pub fn point(m: usize, x: usize) -> Result<Self, MarkovError> {
        if !(1..=m).contains(&x) {
            return Err(MarkovError::InvalidArgument(format!(
                "state {x} outside 1..={m}"
            )));
        }
        let mut probs = vec![0.0; m];
        probs[m - x] = 1.0;
        Self::new(probs)
    }

    /// `e_1`: every node starts with `X = m`.
    pub fn worst_start(m: usize) -> Result<Self, MarkovError> {
        Self::point(m, m)
    }

    /// `e_m`: the absorbing state.
    pub fn absorbed(m: usize) -> Result<Self, MarkovError> {
        Self::point(m, 1)
    }

    pub fn states(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P{X = x}`.
    pub fn state_probability(&self, x: usize) -> f64 {
        let m = self.probs.len();
        if (1..=m).contains(&x) {
            self.probs[m - x]
        } else {
            0.0
        }
    }

    /// Mass on the absorbing state `X = 1`.
    pub fn absorbed_mass(&self) -> f64 {
        self.probs[self.probs.len() - 1]
    }

    pub fn total_variation(&self, other: &[f64]) -> f64 {
        assert_eq!(other.len(), self.probs.len(), "length mismatch");
        0.5 * self
            .probs
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![1.0]).is_err());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-13]).is_ok());
    }

    #[test]
    fn positions_map_to_states() {
        let d = Distribution::worst_start(5).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert_eq!(d.state_probability(5), 1.0);
        let d = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        assert_eq!(d.state_probability(1), 0.7);
        assert_eq!(d.absorbed_mass(), 0.7);
        assert_eq!(d.state_probability(3), 0.1);
    }

    #[test]
    fn total_variation_of_disjoint_points() {
        let a = Distribution::worst_start(4).unwrap();
        let b = Distribution::absorbed(4).unwrap();
        assert_eq!(a.total_variation(b.probs()), 1.0);
    }
}
