//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.

#![allow(dead_code)]

pub mod glob;
pub mod syscall;
pub mod taint;
