use super::{check_chain, row_entries, MarkovError};

/// The `m x m` transition matrix of the X chain at sampling probability
/// `p`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    m: usize,
    p: f64,
    entries: Vec<f64>,
}

pub fn transition_matrix(m: usize, p: f64) -> Result<TransitionMatrix, MarkovError> {
    check_chain(m, p)?;
    let mut entries = vec![0.0; m * m];
    for pos in 0..m {
        let (stay, leave) = row_entries(m, pos, p);
        entries[pos * m + pos] = stay;
        if pos + 1 < m {
            entries[pos * m + pos + 1] = leave;
        }
    }
    Ok(TransitionMatrix { m, p, entries })
}

impl TransitionMatrix {
    pub fn states(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.m + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.m..(row + 1) * self.m]
    }

    /// Row sums deviate from 1 by at most `tol` and every entry lies in
    /// `[0, 1]`.
    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.m).all(|r| {
            let row = self.row(r);
            row.iter().all(|&x| (0.0..=1.0).contains(&x))
                && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// `v P` for a row vector `v`.
    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.m, "vector length must match the matrix");
        (0..self.m)
            .map(|c| (0..self.m).map(|r| v[r] * self.get(r, c)).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_states() {
        let p = transition_matrix(3, 0.1).unwrap();
        let expected = [[0.8, 0.2, 0.0], [0.0, 0.9, 0.1], [0.0, 0.0, 1.0]];
        for (r, row) in expected.iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                assert!((p.get(r, c) - x).abs() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn two_states() {
        let p = transition_matrix(2, 0.3).unwrap();
        assert_eq!(p.row(0), &[1.0 - 0.3, 0.3]);
        assert_eq!(p.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn rows_sum_to_one_exactly() {
        for m in 2..60 {
            for &p in &[1e-4, 0.001, 0.0123, 0.5 / m as f64, 0.999 / (m - 1) as f64] {
                let mat = transition_matrix(m, p).unwrap();
                assert!(mat.is_row_stochastic(0.0), "m = {m}, p = {p}");
            }
        }
    }

    #[test]
    fn range_errors() {
        assert!(transition_matrix(1, 0.1).is_err());
        assert!(transition_matrix(3, 0.0).is_err());
        assert!(transition_matrix(3, 0.5).is_err());
        assert!(transition_matrix(3, f64::NAN).is_err());
    }
}
