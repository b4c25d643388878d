/// Count, mean and centered sum of squares, updated one sample at a time
/// (Welford) and merged pairwise (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / total as f64;
        self.mean += delta * weight;
        self.m2 += other.m2 + delta * delta * self.count as f64 * weight;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Divisor `n − 1`; zero for fewer than two samples.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut whole = RunningMoments::new();
            xs.iter().for_each(|&x| whole.push(x));
            let (mut left, mut right) = (RunningMoments::new(), RunningMoments::new());
            xs[..split].iter().for_each(|&x| left.push(x));
            xs[split..].iter().for_each(|&x| right.push(x));
            left.merge(&right);

            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            prop_assert!((left.sample_variance() - var).abs() <= 1e-9 * (1.0 + var));
            prop_assert!((whole.sample_variance() - var).abs() <= 1e-9 * (1.0 + var));
        }
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let mut m = RunningMoments::new();
        (0..1000).for_each(|_| m.push(2.5));
        assert_eq!(m.sample_variance(), 0.0);
        assert_relative_eq!(m.mean(), 2.5);
    }
}
