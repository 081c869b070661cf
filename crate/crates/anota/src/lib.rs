//! Annotation-driven policy enforcement for AnotaScript programs.

pub mod access;
pub mod annot;
pub mod dataflow;
pub mod harness;
pub mod policy;
pub mod report;
pub mod syscall;
pub mod timing;
pub mod vm;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/getting-started.md")]
    mod getting_started {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/annotations.md")]
    mod annotations {}
    #[doc = include_str!("../../../book/src/syscalls.md")]
    mod syscalls {}
    #[doc = include_str!("../../../book/src/dataflow.md")]
    mod dataflow {}
    #[doc = include_str!("../../../book/src/access.md")]
    mod access {}
    #[doc = include_str!("../../../book/src/timing.md")]
    mod timing {}
    #[doc = include_str!("../../../book/src/fuzzing.md")]
    mod fuzzing {}
    #[doc = include_str!("../../../book/src/replay.md")]
    mod replay {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/bench.md")]
    mod bench {}
}
