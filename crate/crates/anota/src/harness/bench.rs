//! Monitor overhead on a fixed suite of scripts.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::vm::{compile, execute, ExecConfig, ExecResult, Escalation};

/// Built-in benchmark scripts: `(name, source)`.
pub const SUITE: [(&str, &str); 5] = [
    ("arith", include_str!("bench/arith.anota")),
    ("strings", include_str!("bench/strings.anota")),
    ("sieve", include_str!("bench/sieve.anota")),
    ("recursion", include_str!("bench/recursion.anota")),
    ("files", include_str!("bench/files.anota")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No monitor runs at all.
    Disabled,
    /// Monitors on, script carries no annotations.
    ZeroAnnotations,
    /// Every value carries a label.
    TaintAll,
    /// Every pseudo-syscall event is kept.
    SyscallLogAll,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Disabled, Mode::ZeroAnnotations, Mode::TaintAll, Mode::SyscallLogAll];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Disabled => "disabled",
            Mode::ZeroAnnotations => "zero-annotations",
            Mode::TaintAll => "taint-all",
            Mode::SyscallLogAll => "syscall-log-all",
        }
    }

    pub fn config(self) -> ExecConfig {
        let base = ExecConfig {
            escalation: Escalation::Collect,
            cost_limit: u64::MAX,
            ..ExecConfig::default()
        };
        match self {
            Mode::Disabled => ExecConfig { monitors: false, ..base },
            Mode::ZeroAnnotations => base,
            Mode::TaintAll => ExecConfig { taint_all: true, ..base },
            Mode::SyscallLogAll => ExecConfig {
                record_trace: true,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub name: String,
    /// Instructions per run.
    pub cost: u64,
    /// Best wall time per mode, in [`Mode::ALL`] order.
    pub times: [Duration; 4],
}

impl BenchRow {
    pub fn ratio(&self, mode: Mode) -> f64 {
        let i = Mode::ALL.iter().position(|&m| m == mode).unwrap();
        self.times[i].as_secs_f64() / self.times[0].as_secs_f64()
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Geometric mean of the per-benchmark ratios for `mode`.
    pub fn geomean(&self, mode: Mode) -> f64 {
        let logs: f64 = self.rows.iter().map(|r| r.ratio(mode).ln()).sum();
        (logs / self.rows.len() as f64).exp()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10} {:>10}", "benchmark", "insns");
        for m in Mode::ALL {
            let _ = write!(out, " {:>17}", m.name());
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<10} {:>10}", r.name, r.cost);
            for (m, t) in Mode::ALL.iter().zip(r.times) {
                let _ = write!(out, " {:>8.1}ms {:>5.2}x", t.as_secs_f64() * 1e3, r.ratio(*m));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<10} {:>10}", "geomean", "");
        for m in Mode::ALL {
            let _ = write!(out, " {:>17.2}", self.geomean(m));
        }
        out.push('\n');
        out
    }
}

/// Time one run of `source` under `mode`.
pub fn run_once(program: &crate::vm::Program, mode: Mode) -> (Duration, ExecResult) {
    let cfg = mode.config();
    let start = Instant::now();
    let r = execute(program, b"", &cfg);
    (start.elapsed(), r)
}

/// Run the suite, keeping the best of `reps` runs per benchmark and mode.
/// Modes are interleaved within each repetition so drift affects all alike.
pub fn bench(reps: usize) -> BenchReport {
    let rows = SUITE
        .iter()
        .map(|(name, src)| {
            let program = compile(src).expect("benchmark scripts compile");
            let mut times = [Duration::MAX; 4];
            let mut cost = 0;
            for _ in 0..reps.max(1) {
                for (i, m) in Mode::ALL.iter().enumerate() {
                    let (t, r) = run_once(&program, *m);
                    cost = r.cost;
                    times[i] = times[i].min(t);
                }
            }
            BenchRow {
                name: name.to_string(),
                cost,
                times,
            }
        })
        .collect();
    BenchReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::ExecStatus;

    #[test]
    fn every_benchmark_is_long_and_clean_in_every_mode() {
        for (name, src) in SUITE {
            let p = compile(src).unwrap();
            let mut outputs = Vec::new();
            for m in Mode::ALL {
                let r = execute(&p, b"", &m.config());
                assert_eq!(r.status, ExecStatus::Clean, "{name} in {}", m.name());
                assert!(r.cost >= 1_000_000, "{name}: {} instructions", r.cost);
                outputs.push((r.output, r.cost));
            }
            assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{name} differs across modes");
        }
    }
}
