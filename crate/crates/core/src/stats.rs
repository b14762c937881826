//! Summary statistics shared by the bootstrap and the simulation engine.

/// Streaming mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + delta * other.count as f64 / n,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / n,
        }
    }

    /// Unbiased (n - 1) variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Moments of `values` by a fixed pairwise reduction tree.
    pub fn of(values: &[f64]) -> Moments {
        match values.len() {
            0 => Moments::default(),
            1..=64 => {
                let mut m = Moments::default();
                values.iter().for_each(|&v| m.push(v));
                m
            }
            n => {
                let (l, r) = values.split_at(n / 2);
                Moments::of(l).merge(&Moments::of(r))
            }
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    Moments::of(values).mean
}

pub fn variance(values: &[f64]) -> f64 {
    Moments::of(values).variance()
}

/// Inverse-ECDF quantile of already sorted values: the order statistic
/// `x_(ceil(q n))`, so the result is always an observed value.
pub fn order_statistic_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_two_pass() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3 + 1e6).collect();
        let m = Moments::of(&v);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((m.mean - mean).abs() < 1e-8);
        assert!((m.variance() - var).abs() / var < 1e-10);
    }

    #[test]
    fn quantile_is_order_statistic() {
        let v = sorted(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(order_statistic_quantile(&v, 0.5), 3.0);
        assert_eq!(order_statistic_quantile(&v, 0.0), 1.0);
        assert_eq!(order_statistic_quantile(&v, 1.0), 5.0);
        assert_eq!(order_statistic_quantile(&v, 0.21), 2.0);
    }
}
