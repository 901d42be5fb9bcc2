//! Small descriptive-statistics helpers.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        (v[h - 1] + v[h]) / 2.0
    }
}

/// Equal-width histogram over `[min, max]`; the top edge falls in the last
/// bin. When every value is equal, all counts land in the first bin.
pub fn histogram(xs: &[f64], bins: usize) -> Vec<u32> {
    let mut counts = vec![0u32; bins.max(1)];
    if xs.is_empty() {
        return counts;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / counts.len() as f64;
    for &x in xs {
        let b = if width > 0.0 {
            (((x - lo) / width) as usize).min(counts.len() - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    counts
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            mean(&xs[lo..hi])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((sample_std(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(median(&xs), 4.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn histogram_counts_everything() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h = histogram(&xs, 20);
        assert_eq!(h.iter().sum::<u32>(), 100);
        assert!(h.iter().all(|&c| c == 5));
        assert_eq!(histogram(&[3.0; 7], 20)[0], 7);
    }

    #[test]
    fn moving_average_edges() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = moving_average(&xs, 3);
        assert_eq!(s, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    }
}
