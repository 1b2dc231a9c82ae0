use super::TrafficError;

/// Mean and lower median of response-to-next-request delays, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats {
    pub count: usize,
    pub avg: f64,
    pub median: f64,
}

/// Summarizes `(response_ts, next_request_ts)` pairs. For an even count the
/// median is the lower of the two middle deltas.
pub fn interval_stats(exchanges: &[(f64, f64)]) -> Result<IntervalStats, TrafficError> {
    if exchanges.is_empty() {
        return Err(TrafficError::EmptyInput);
    }
    let mut deltas = Vec::with_capacity(exchanges.len());
    for (index, &(resp, next)) in exchanges.iter().enumerate() {
        let delta = next - resp;
        if !delta.is_finite() || delta < 0.0 {
            return Err(TrafficError::NegativeInterval { index, delta });
        }
        deltas.push(delta);
    }
    let avg = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let mid = (deltas.len() - 1) / 2;
    let (_, median, _) = deltas.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(IntervalStats {
        count: exchanges.len(),
        avg,
        median: *median,
    })
}
