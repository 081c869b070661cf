//! Fixed-vs-random timing experiment on one function of a script.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::{input_digest, Violation, ViolationKind};
use crate::timing::{TTestState, Verdict};
use crate::vm::{execute, Escalation, ExecConfig, Program};

#[derive(Debug, Clone)]
pub struct TimecheckConfig {
    pub function: String,
    /// Class 0 input. Class 1 inputs are random bytes of the same length.
    pub fixed: Vec<u8>,
    /// Samples wanted per class.
    pub n: u64,
    pub seed: u64,
    pub exec: ExecConfig,
}

#[derive(Debug, Clone)]
pub struct TimecheckReport {
    pub function: String,
    /// `None` when a class has fewer than two samples.
    pub t: Option<f64>,
    pub verdict: Verdict,
    pub state: TTestState,
    /// Present for a leak in a function named by a timing annotation.
    pub violation: Option<Violation>,
}

impl TimecheckReport {
    /// `fn=<name> t=<float> verdict=<word>`
    pub fn line(&self) -> String {
        let t = self.t.unwrap_or(f64::NAN);
        format!("fn={} t={} verdict={}", self.function, t, self.verdict.word())
    }
}

/// Run the script repeatedly, choosing the class of each run at random, and
/// collect the instruction cost of every call to the target function.
pub fn timecheck(program: &Program, config: &TimecheckConfig) -> TimecheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let exec = ExecConfig {
        escalation: Escalation::Collect,
        timing_targets: vec![config.function.clone()],
        auto_target: true,
        ..config.exec.clone()
    };
    let mut state = TTestState::new();
    let mut timing_policy = None;
    let mut random = vec![0u8; config.fixed.len()];
    // Runs that never reach the target still count against this budget.
    let mut budget = config.n.saturating_mul(4).max(16);
    while budget > 0 && state.classes.iter().any(|c| c.n < config.n) {
        budget -= 1;
        let mut class: u8 = rng.random_range(0..2);
        if state.classes[class as usize].n >= config.n {
            class ^= 1;
        }
        let input = if class == 0 {
            &config.fixed
        } else {
            rng.fill_bytes(&mut random);
            &random
        };
        let result = execute(program, input, &exec);
        for s in result.samples.iter().filter(|s| s.function == config.function) {
            state.record(class, s.cost);
        }
        if timing_policy.is_none() {
            if let Some(&(id, site)) = result.timing_policies.get(&config.function) {
                let text = result.policies.iter().find(|p| p.id == id).map(|p| p.text.clone());
                timing_policy = Some((id, site, text.unwrap_or_default()));
            }
        }
    }
    let t = state.welch_t().ok();
    let verdict = state.verdict();
    let violation = match (verdict, timing_policy) {
        (Verdict::TimingLeak, Some((policy_id, site, policy_text))) => {
            let t = t.expect("a leak verdict implies a statistic");
            let shown = if t.is_finite() { json!(t) } else { json!(t.to_string()) };
            let [c0, c1] = state.classes;
            Some(Violation {
                policy_id,
                policy_text,
                kind: ViolationKind::TimingLeak,
                site,
                event: json!({
                    "function": config.function,
                    "t": shown,
                    "n": [c0.n, c1.n],
                    "mean": [c0.mean, c1.mean],
                }),
                message: format!("cost of `{}` depends on its input", config.function),
                input_digest: input_digest(&config.fixed),
            })
        }
        _ => None,
    };
    TimecheckReport {
        function: config.function.clone(),
        t,
        verdict,
        state,
        violation,
    }
}
