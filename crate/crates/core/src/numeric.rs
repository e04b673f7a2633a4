//! Order-stable summation and moment helpers.

/// Neumaier-compensated sum. Deterministic for a fixed input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Central moments of a sample: mean and population moments m2, m3, m4.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        let nf = count as f64;
        let mean = compensated_sum(values.iter().copied()) / nf;
        let m2 = compensated_sum(values.iter().map(|x| (x - mean).powi(2))) / nf;
        let m3 = compensated_sum(values.iter().map(|x| (x - mean).powi(3))) / nf;
        let m4 = compensated_sum(values.iter().map(|x| (x - mean).powi(4))) / nf;
        Moments {
            count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    /// Sample (N-1) standard deviation.
    pub fn sample_std(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 * self.count as f64 / (self.count as f64 - 1.0)).sqrt()
    }

    /// Moment-based skewness g1; NaN for a constant sample.
    pub fn skewness(&self) -> f64 {
        if self.m2 > 0.0 {
            self.m3 / self.m2.powf(1.5)
        } else {
            f64::NAN
        }
    }

    /// Moment-based excess kurtosis g2; NaN for a constant sample.
    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 > 0.0 {
            self.m4 / (self.m2 * self.m2) - 3.0
        } else {
            f64::NAN
        }
    }
}
