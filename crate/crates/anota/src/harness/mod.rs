//! Drivers around the VM: single runs, fuzzing, trace replay, timing
//! checks and the overhead benchmark.

pub mod bench;
pub mod fuzz;
pub mod replay;
pub mod run;
pub mod timecheck;

/// Exit status for command-line misuse.
pub const USAGE_EXIT_CODE: i32 = 2;
/// Exit status for script and compile errors.
pub const ERROR_EXIT_CODE: i32 = 1;
