//! Small numerical helpers shared across the models.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Relative closeness with an absolute floor: `|a-b| <= max(rel*max(|a|,|b|), abs)`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    let d = (a - b).abs();
    d <= abs || d <= rel * a.abs().max(b.abs())
}

/// `((1+a)^m - (1+b)^m) / (a - b)` without cancellation when `a` is near `b`.
///
/// Uses `(1+b)^m * expm1(m * ln1p((a-b)/(1+b))) / (a-b)`.
pub fn power_divided_difference(a: f64, b: f64, m: f64) -> f64 {
    let d = a - b;
    let base = (1.0 + b).powf(m);
    if d == 0.0 {
        return m * base / (1.0 + b);
    }
    base * (m * (d / (1.0 + b)).ln_1p()).exp_m1() / d
}

/// First integer index in `values` whose entry is negative.
pub fn first_negative(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| *v < 0.0)
}

/// Linear interpolation of the zero between `k-1` and `k`, given `y[k-1] >= 0 > y[k]`.
pub fn interpolate_crossing(values: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (a, b) = (values[k - 1], values[k]);
    (k - 1) as f64 + a / (a - b)
}

/// Linear interpolation of a series at a real index, clamped to its range.
pub fn sample_linear(values: &[f64], t: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    if t <= 0.0 {
        return values[0];
    }
    let last = values.len() - 1;
    if t >= last as f64 {
        return values[last];
    }
    let k = t.floor() as usize;
    let w = t - k as f64;
    if w == 0.0 {
        values[k]
    } else {
        values[k] + w * (values[k + 1] - values[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.extend([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn divided_difference_matches_naive_away_from_resonance() {
        let (a, b, m) = (0.1, 0.02, 17.0);
        let naive = ((1.0_f64 + a).powf(m) - (1.0_f64 + b).powf(m)) / (a - b);
        assert!(close(power_divided_difference(a, b, m), naive, 1e-13, 0.0));
    }

    #[test]
    fn divided_difference_limit_is_derivative() {
        let v = power_divided_difference(0.05, 0.05, 10.0);
        assert!(close(v, 10.0 * 1.05_f64.powi(9), 1e-14, 0.0));
    }

    #[test]
    fn crossing_interpolation() {
        let y = [3.0, 1.0, -1.0];
        assert_eq!(first_negative(&y), Some(2));
        assert_eq!(interpolate_crossing(&y, 2), 1.5);
        assert_eq!(sample_linear(&y, 0.5), 2.0);
    }
}
