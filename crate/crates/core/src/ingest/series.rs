use crate::real::Real;

/// Differences a cumulative count series into daily increments.
///
/// The first element is kept as is; downward revisions are clamped to zero.
pub fn cumulative_to_daily(series: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(series.len());
    let mut prev: Option<u64> = None;
    for &c in series {
        out.push(match prev {
            None => c,
            Some(p) => c.saturating_sub(p),
        });
        prev = Some(c);
    }
    out
}

/// Centered 3-day moving average; the two endpoints average the two
/// available days.
///
/// Written as an offset from the center value so that constant series are
/// reproduced exactly.
pub fn smooth_3day_centered<R: Real>(series: &[R]) -> Vec<R> {
    let n = series.len();
    if n < 2 {
        return series.to_vec();
    }
    let two = R::lit(2.0);
    let three = R::lit(3.0);
    (0..n)
        .map(|j| {
            let c = series[j];
            if j == 0 {
                c + (series[1] - c) / two
            } else if j == n - 1 {
                c + (series[n - 2] - c) / two
            } else {
                c + ((series[j - 1] - c) + (series[j + 1] - c)) / three
            }
        })
        .collect()
}
