//! Fixed-vs-random timing test over per-invocation instruction counts.

use serde::Serialize;

/// |t| above this flags a leak.
pub const T_THRESHOLD: f64 = 4.5;
/// Samples per class needed before declaring constant time.
pub const N_MIN: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingSample {
    pub function: String,
    pub class: u8,
    pub cost: u64,
}

/// Streaming count, mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ClassStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance (n - 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("insufficient samples: class 0 has {0}, class 1 has {1}")]
pub struct InsufficientSamples(pub u64, pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ConstantTime,
    TimingLeak,
    Inconclusive,
}

impl Verdict {
    pub fn word(self) -> &'static str {
        match self {
            Verdict::ConstantTime => "ConstantTime",
            Verdict::TimingLeak => "TimingLeak",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestState {
    pub classes: [ClassStats; 2],
    pub threshold: f64,
    pub n_min: u64,
}

impl Default for TTestState {
    fn default() -> Self {
        TTestState {
            classes: [ClassStats::default(); 2],
            threshold: T_THRESHOLD,
            n_min: N_MIN,
        }
    }
}

impl TTestState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `class` is not 0 or 1.
    pub fn record(&mut self, class: u8, cost: u64) {
        self.classes[class as usize].push(cost as f64);
    }

    pub fn record_sample(&mut self, sample: &TimingSample) {
        self.record(sample.class, sample.cost);
    }

    /// Welch's t. When both classes have zero variance the result is 0 for
    /// equal means and an infinity carrying the sign of `m0 - m1` otherwise.
    pub fn welch_t(&self) -> Result<f64, InsufficientSamples> {
        let [a, b] = self.classes;
        if a.n < 2 || b.n < 2 {
            return Err(InsufficientSamples(a.n, b.n));
        }
        let diff = a.mean - b.mean;
        let se2 = a.variance() / a.n as f64 + b.variance() / b.n as f64;
        if se2 == 0.0 {
            return Ok(if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            });
        }
        Ok(diff / se2.sqrt())
    }

    pub fn verdict(&self) -> Verdict {
        match self.welch_t() {
            Ok(t) if t.abs() > self.threshold => Verdict::TimingLeak,
            Ok(_) if self.classes.iter().all(|c| c.n >= self.n_min) => Verdict::ConstantTime,
            _ => Verdict::Inconclusive,
        }
    }
}
