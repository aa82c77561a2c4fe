//! End-to-end acceptance suite for the regfbm toolkit; the checks are in
//! `tests/acceptance.rs`.
