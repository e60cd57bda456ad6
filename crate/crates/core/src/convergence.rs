//! Observed convergence orders.

/// Least-squares slope of log(err) against log(h).
///
/// `None` when fewer than two levels have a positive error (e.g. an exact
/// discretization, where every error is zero).
pub fn fitted_order(h: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Orders between consecutive levels.
pub fn pairwise_orders(h: &[f64], err: &[f64]) -> Vec<Option<f64>> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| fitted_order(h, e))
        .collect()
}
