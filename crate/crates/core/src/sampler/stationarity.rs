/// Halves of the post-burn-in window may differ in mean by at most this many
/// pooled standard deviations.
pub const STATIONARITY_TOLERANCE: f64 = 0.1;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Split-half stationarity check on `trace[burn_in..]`.
///
/// The window is cut into two halves (the middle element is dropped for odd
/// lengths); the trace passes iff both halves have positive variance and their
/// means differ by at most `0.1 ×` the pooled standard deviation.
pub fn check_stationarity(trace: &[f64], burn_in: usize) -> bool {
    if trace.len() <= burn_in {
        return false;
    }
    let window = &trace[burn_in..];
    let half = window.len() / 2;
    if half < 2 || window.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let (m1, v1) = mean_var(&window[..half]);
    let (m2, v2) = mean_var(&window[window.len() - half..]);
    if !(v1 > 0.0 && v2 > 0.0) {
        return false;
    }
    let pooled = libm::sqrt(0.5 * (v1 + v2));
    (m1 - m2).abs() <= STATIONARITY_TOLERANCE * pooled
}
