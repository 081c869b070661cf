//! In-process coverage-guided fuzzing with violations as crashes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annot::Site;
use crate::policy::PolicyId;
use crate::report::{input_digest, Violation};
use crate::vm::{execute, Escalation, ExecConfig, ExecStatus, Program};

/// Inputs never grow past this many bytes.
pub const MAX_INPUT_LEN: usize = 4096;

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub seeds: Vec<Vec<u8>>,
    pub dictionary: Vec<Vec<u8>>,
    pub max_iterations: u64,
    pub max_time: Option<Duration>,
    pub rng_seed: u64,
    /// Stop once this many distinct findings exist.
    pub max_findings: Option<usize>,
    pub jobs: usize,
    /// Each finding's input is written here, named by its digest.
    pub findings_dir: Option<PathBuf>,
    pub exec: ExecConfig,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seeds: Vec::new(),
            dictionary: Vec::new(),
            max_iterations: 100_000,
            max_time: None,
            rng_seed: 0,
            max_findings: None,
            jobs: 1,
            findings_dir: None,
            exec: ExecConfig {
                escalation: Escalation::Exit,
                ..ExecConfig::default()
            },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FuzzError {
    #[error("the seed corpus is empty")]
    EmptyCorpus,
    #[error("cannot write finding: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Finding {
    pub violation: Violation,
    pub input: Vec<u8>,
    /// 1-based execution count at which the finding first appeared.
    pub execution: u64,
}

#[derive(Debug, Clone)]
pub struct FuzzSummary {
    pub findings: Vec<Finding>,
    pub executions: u64,
    pub edges: usize,
    pub corpus_size: usize,
    pub elapsed: Duration,
}

impl FuzzSummary {
    pub fn execs_per_second(&self) -> f64 {
        self.executions as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Inputs kept for their coverage, keyed by digest.
#[derive(Debug, Default)]
pub struct Corpus {
    entries: BTreeMap<String, CorpusEntry>,
    order: Vec<String>,
    edges: HashSet<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub input: Vec<u8>,
    pub coverage: BTreeSet<(u32, u32)>,
}

impl Corpus {
    /// Insert `input` if its coverage has an edge not seen before. Returns
    /// whether it was kept.
    pub fn offer(&mut self, input: &[u8], coverage: &BTreeSet<(u32, u32)>) -> bool {
        let new: Vec<_> = coverage.iter().filter(|e| !self.edges.contains(e)).copied().collect();
        if new.is_empty() {
            return false;
        }
        self.edges.extend(new);
        let digest = input_digest(input);
        if !self.entries.contains_key(&digest) {
            self.order.push(digest.clone());
        }
        self.entries.insert(
            digest,
            CorpusEntry {
                input: input.to_vec(),
                coverage: coverage.clone(),
            },
        );
        true
    }

    /// Keep a seed regardless of coverage.
    fn add_seed(&mut self, input: &[u8], coverage: &BTreeSet<(u32, u32)>) {
        if !self.offer(input, coverage) {
            let digest = input_digest(input);
            if !self.entries.contains_key(&digest) {
                self.order.push(digest.clone());
                self.entries.insert(
                    digest,
                    CorpusEntry {
                        input: input.to_vec(),
                        coverage: coverage.clone(),
                    },
                );
            }
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.entries[&self.order[i]].input
    }
}

/// Byte-level mutator: flips, random bytes, deletions, dictionary
/// overwrites and insertions, and splices with another corpus input.
pub struct Mutator<'d> {
    dictionary: &'d [Vec<u8>],
}

impl<'d> Mutator<'d> {
    pub fn new(dictionary: &'d [Vec<u8>]) -> Self {
        Mutator { dictionary }
    }

    /// Apply one to four stacked mutations to `data` in place.
    pub fn mutate(&self, rng: &mut impl Rng, data: &mut Vec<u8>, other: &[u8]) {
        let rounds = 1 << rng.random_range(0..3u32);
        for _ in 0..rounds {
            self.mutate_once(rng, data, other);
        }
        data.truncate(MAX_INPUT_LEN);
    }

    fn mutate_once(&self, rng: &mut impl Rng, data: &mut Vec<u8>, other: &[u8]) {
        let n_ops = if self.dictionary.is_empty() { 6 } else { 8 };
        match rng.random_range(0..n_ops) {
            0 if !data.is_empty() => {
                let i = rng.random_range(0..data.len());
                data[i] ^= 1 << rng.random_range(0..8);
            }
            1 if !data.is_empty() => {
                let i = rng.random_range(0..data.len());
                data[i] = rng.random();
            }
            2 => {
                let i = rng.random_range(0..=data.len());
                data.insert(i, rng.random());
            }
            3 if !data.is_empty() => {
                let i = rng.random_range(0..data.len());
                let n = rng.random_range(1..=(data.len() - i).min(8));
                data.drain(i..i + n);
            }
            4 if !other.is_empty() => {
                // Splice: keep a prefix of `data`, continue with a suffix of `other`.
                let cut = rng.random_range(0..=data.len());
                let from = rng.random_range(0..other.len());
                data.truncate(cut);
                data.extend_from_slice(&other[from..]);
            }
            5 if data.len() > 1 => {
                let i = rng.random_range(0..data.len());
                let j = rng.random_range(0..data.len());
                data.swap(i, j);
            }
            6 => {
                let word = self.dictionary.choose(rng).expect("dictionary is non-empty");
                let i = rng.random_range(0..=data.len());
                data.splice(i..i, word.iter().copied());
            }
            7 => {
                let word = self.dictionary.choose(rng).expect("dictionary is non-empty");
                let i = rng.random_range(0..=data.len());
                let end = (i + word.len()).min(data.len());
                data.splice(i..end, word.iter().copied());
            }
            _ => {
                let i = rng.random_range(0..=data.len());
                data.insert(i, rng.random());
            }
        }
    }
}

struct Shared {
    corpus: Mutex<Corpus>,
    findings: Mutex<HashMap<(PolicyId, Site), Finding>>,
    executions: AtomicU64,
    stop: AtomicBool,
}

/// Run a campaign against `program`. With `jobs == 1` the whole campaign is
/// a function of `rng_seed`.
pub fn fuzz(program: &Program, config: &FuzzConfig) -> Result<FuzzSummary, FuzzError> {
    if config.seeds.is_empty() {
        return Err(FuzzError::EmptyCorpus);
    }
    let start = Instant::now();
    let shared = Shared {
        corpus: Mutex::new(Corpus::default()),
        findings: Mutex::new(HashMap::new()),
        executions: AtomicU64::new(0),
        stop: AtomicBool::new(false),
    };
    for seed in &config.seeds {
        let n = shared.executions.fetch_add(1, Ordering::Relaxed) + 1;
        let result = execute(program, seed, &config.exec);
        record(&shared, config, seed, &result.violations, n);
        shared.corpus.lock().unwrap().add_seed(seed, &result.coverage);
    }
    let jobs = config.jobs.max(1);
    std::thread::scope(|s| {
        for worker in 0..jobs {
            let shared = &shared;
            s.spawn(move || work(program, config, shared, worker as u64, start));
        }
    });
    let findings: Vec<Finding> = {
        let mut f: Vec<_> = shared.findings.into_inner().unwrap().into_values().collect();
        f.sort_by_key(|f| f.execution);
        f
    };
    if let Some(dir) = &config.findings_dir {
        std::fs::create_dir_all(dir)?;
        for f in &findings {
            std::fs::write(dir.join(&f.violation.input_digest), &f.input)?;
        }
    }
    let corpus = shared.corpus.into_inner().unwrap();
    Ok(FuzzSummary {
        findings,
        executions: shared.executions.load(Ordering::Relaxed),
        edges: corpus.edge_count(),
        corpus_size: corpus.len(),
        elapsed: start.elapsed(),
    })
}

fn work(program: &Program, config: &FuzzConfig, shared: &Shared, worker: u64, start: Instant) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(worker.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    let mutator = Mutator::new(&config.dictionary);
    let mut input = Vec::new();
    let mut other = Vec::new();
    loop {
        if shared.stop.load(Ordering::Relaxed) {
            return;
        }
        let n = shared.executions.fetch_add(1, Ordering::Relaxed) + 1;
        if n > config.max_iterations || config.max_time.is_some_and(|t| start.elapsed() >= t) {
            shared.executions.fetch_sub(1, Ordering::Relaxed);
            shared.stop.store(true, Ordering::Relaxed);
            return;
        }
        {
            let corpus = shared.corpus.lock().unwrap();
            let len = corpus.len();
            input.clear();
            input.extend_from_slice(corpus.get(rng.random_range(0..len)));
            other.clear();
            other.extend_from_slice(corpus.get(rng.random_range(0..len)));
        }
        mutator.mutate(&mut rng, &mut input, &other);
        let result = execute(program, &input, &config.exec);
        if result.status == ExecStatus::Violation {
            record(shared, config, &input, &result.violations, n);
        }
        shared.corpus.lock().unwrap().offer(&input, &result.coverage);
    }
}

fn record(shared: &Shared, config: &FuzzConfig, input: &[u8], violations: &[Violation], execution: u64) {
    let mut findings = shared.findings.lock().unwrap();
    for v in violations {
        findings.entry(v.key()).or_insert_with(|| Finding {
            violation: v.clone(),
            input: input.to_vec(),
            execution,
        });
    }
    if config.max_findings.is_some_and(|m| findings.len() >= m) {
        shared.stop.store(true, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::compile;

    #[test]
    fn corpus_keeps_only_new_coverage() {
        let mut c = Corpus::default();
        let a: BTreeSet<_> = [(0, 1), (1, 2)].into_iter().collect();
        assert!(c.offer(b"a", &a));
        assert!(!c.offer(b"b", &a));
        let b: BTreeSet<_> = [(0, 1), (1, 3)].into_iter().collect();
        assert!(c.offer(b"c", &b));
        assert_eq!((c.len(), c.edge_count()), (2, 3));
    }

    #[test]
    fn mutator_respects_length_cap() {
        let dict = vec![vec![b'x'; 3000]];
        let m = Mutator::new(&dict);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data = b"seed".to_vec();
        for _ in 0..200 {
            m.mutate(&mut rng, &mut data, b"other");
            assert!(data.len() <= MAX_INPUT_LEN);
        }
    }

    #[test]
    fn unannotated_script_has_no_findings() {
        let p = compile("x = input()\nif len(x) > 3:\n    print(x)\n").unwrap();
        let cfg = FuzzConfig {
            seeds: vec![b"ab".to_vec()],
            max_iterations: 500,
            ..FuzzConfig::default()
        };
        let s = fuzz(&p, &cfg).unwrap();
        assert!(s.findings.is_empty());
        assert_eq!(s.executions, 500);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let p = compile("").unwrap();
        assert!(matches!(fuzz(&p, &FuzzConfig::default()), Err(FuzzError::EmptyCorpus)));
    }
}
