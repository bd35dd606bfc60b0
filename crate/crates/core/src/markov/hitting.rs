use super::MarkovError;

fn check_p(p: f64) -> Result<(), MarkovError> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(MarkovError::InvalidArgument(format!(
            "sampling probability {p} must be positive"
        )))
    }
}

/// Expected number of steps from `X = i` to `X = 1` at constant `p`:
/// `M_i = H_{i-1} / p`.
pub fn expected_hitting_time(i: usize, p: f64) -> Result<f64, MarkovError> {
    check_p(p)?;
    if i == 0 {
        return Err(MarkovError::InvalidArgument("states start at 1".into()));
    }
    let harmonic: f64 = (1..i).rev().map(|n| 1.0 / n as f64).sum();
    Ok(harmonic / p)
}

/// Upper bound `(1 + ln(m - 1)) / p` on the worst-case hitting time `M_m`.
pub fn hitting_time_bound(m: usize, p: f64) -> Result<f64, MarkovError> {
    check_p(p)?;
    if m < 2 {
        return Err(MarkovError::InvalidArgument(format!(
            "need at least 2 states, got {m}"
        )));
    }
    Ok((1.0 + ((m - 1) as f64).ln()) / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(expected_hitting_time(1, 0.3).unwrap(), 0.0);
        let m10 = expected_hitting_time(10, 0.005).unwrap();
        assert!((m10 - 565.7936507936508).abs() < 1e-9, "{m10}");
        let m50 = expected_hitting_time(50, 0.001).unwrap();
        assert!((m50 - 4479.205338).abs() < 1e-5, "{m50}");
        assert_eq!(m10.round(), 566.0);
        assert_eq!(m50.round(), 4479.0);
    }

    #[test]
    fn bound_values() {
        let b = hitting_time_bound(10, 0.005).unwrap();
        assert!((b - 639.4449154672439).abs() < 1e-9, "{b}");
        assert_eq!(hitting_time_bound(2, 0.25).unwrap(), 4.0);
        assert_eq!(expected_hitting_time(2, 0.25).unwrap(), 4.0);
        for m in 2..=100 {
            assert!(
                expected_hitting_time(m, 0.01).unwrap() <= hitting_time_bound(m, 0.01).unwrap()
            );
        }
    }

    #[test]
    fn argument_errors() {
        assert!(expected_hitting_time(3, 0.0).is_err());
        assert!(expected_hitting_time(3, -0.1).is_err());
        assert!(expected_hitting_time(0, 0.1).is_err());
        assert!(hitting_time_bound(1, 0.1).is_err());
        assert!(hitting_time_bound(5, f64::NAN).is_err());
    }
}
