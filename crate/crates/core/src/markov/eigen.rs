use super::dd::Dd;
use super::distribution::Distribution;
use super::{check_chain, MarkovError};

/// Largest chain whose eigenvector recurrence stays inside `i128`.
pub const MAX_EXACT_STATES: usize = 120;

/// Eigenvalues and left eigenvectors of the transition matrix.
///
/// `eigenvalues[i - 1] = 1 - (m - i) p` and `eigenvectors[i - 1]` is `ξ^i`,
/// normalised to `ξ^i_i = 1`. The eigenvectors do not depend on `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    m: usize,
    p: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl EigenSystem {
    pub fn states(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }
}

pub fn eigen_system(m: usize, p: f64) -> Result<EigenSystem, MarkovError> {
    if p == 0.0 && m >= 2 {
        return Err(MarkovError::DegenerateSpectrum);
    }
    check_chain(m, p)?;
    let eigenvalues = (1..=m).map(|i| 1.0 - (m - i) as f64 * p).collect();
    Ok(EigenSystem {
        m,
        p,
        eigenvalues,
        eigenvectors: eigenvectors(m)?,
    })
}

/// The integer rows `ξ^i_j = (-1)^(j-i) C(m-i, j-i)` for `j >= i`,
/// generated by `ξ^i_j = ξ^i_(j-1) (m-j+1) / (i-j)`.
fn exact_rows(m: usize) -> Result<Vec<Vec<i128>>, MarkovError> {
    if m > MAX_EXACT_STATES {
        return Err(MarkovError::TooManyStates {
            m,
            max: MAX_EXACT_STATES,
        });
    }
    let mut rows = vec![vec![0i128; m]; m];
    for i in 1..=m {
        let row = &mut rows[i - 1];
        row[i - 1] = 1;
        for j in i + 1..=m {
            let num = row[j - 2] * (m - j + 1) as i128;
            let den = i as i128 - j as i128;
            debug_assert_eq!(num % den, 0);
            row[j - 1] = num / den;
        }
    }
    Ok(rows)
}

/// Left eigenvectors `ξ^1 ... ξ^m` for a chain of `m` states.
pub fn eigenvectors(m: usize) -> Result<Vec<Vec<f64>>, MarkovError> {
    Ok(exact_rows(m)?
        .into_iter()
        .map(|row| row.into_iter().map(|x| x as f64).collect())
        .collect())
}

/// Coordinates `α_1 ... α_m` of a distribution in the eigenvector basis,
/// held in double-double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    values: Vec<Dd>,
}

impl Coefficients {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.values.iter().map(|d| d.to_f64()).collect()
    }

    pub fn alpha_dd(&self) -> &[Dd] {
        &self.values
    }

    /// `Σ α_i ξ^i`, weighting each term by `weights[i]` when given.
    pub(crate) fn combine(&self, weights: Option<&[Dd]>) -> Result<Vec<f64>, MarkovError> {
        let m = self.values.len();
        let xi = eigenvectors(m)?;
        let mut acc = vec![Dd::ZERO; m];
        for (i, row) in xi.iter().enumerate() {
            let c = match weights {
                Some(w) => self.values[i] * w[i],
                None => self.values[i],
            };
            for j in i..m {
                acc[j] = acc[j] + c * row[j];
            }
        }
        Ok(acc.into_iter().map(Dd::to_f64).collect())
    }

    /// `Σ α_i ξ^i`, which recovers the decomposed distribution.
    pub fn reconstruct(&self) -> Result<Vec<f64>, MarkovError> {
        self.combine(None)
    }
}

/// Solves `Σ α_i ξ^i = pi0` by forward substitution.
///
/// The eigenvector matrix is upper triangular with unit diagonal, so
/// `α_j = pi0_j - Σ_{i<j} α_i ξ^i_j`. Only `ξ^m = e_m` touches the last
/// position, hence `α_m = pi0 · 1`.
pub fn decompose_initial(pi0: &Distribution) -> Result<Coefficients, MarkovError> {
    let m = pi0.states();
    let xi = eigenvectors(m)?;
    let mut values = vec![Dd::ZERO; m];
    for j in 0..m {
        let mut a = Dd::from(pi0.probs()[j]);
        for i in 0..j {
            a = a - values[i] * xi[i][j];
        }
        values[j] = a;
    }
    Ok(Coefficients { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_state_basis() {
        let e = eigen_system(3, 0.1).unwrap();
        assert_eq!(
            e.eigenvectors(),
            &[
                vec![1.0, -2.0, 1.0],
                vec![0.0, 1.0, -1.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
        let lambda = e.eigenvalues();
        assert!((lambda[0] - 0.8).abs() < 1e-15);
        assert!((lambda[1] - 0.9).abs() < 1e-15);
        assert_eq!(lambda[2], 1.0);
    }

    #[test]
    fn rows_are_signed_binomials() {
        let rows = exact_rows(12).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let mut c: i128 = 1;
            for (k, &x) in row[i..].iter().enumerate() {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                assert_eq!(x, sign * c);
                c = c * (11 - i - k) as i128 / (k + 1) as i128;
            }
        }
    }

    #[test]
    fn largest_chain_fits() {
        assert!(exact_rows(MAX_EXACT_STATES).is_ok());
        assert!(matches!(
            exact_rows(MAX_EXACT_STATES + 1),
            Err(MarkovError::TooManyStates { .. })
        ));
    }

    #[test]
    fn zero_p_is_degenerate() {
        assert_eq!(eigen_system(4, 0.0), Err(MarkovError::DegenerateSpectrum));
    }

    #[test]
    fn worst_start_coefficients() {
        let pi0 = Distribution::worst_start(3).unwrap();
        let alpha = decompose_initial(&pi0).unwrap().alpha();
        assert_eq!(alpha, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn absorbed_start_coefficients() {
        let pi0 = Distribution::absorbed(6).unwrap();
        let alpha = decompose_initial(&pi0).unwrap().alpha();
        assert_eq!(alpha, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
