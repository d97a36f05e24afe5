//! Shared problem builders for the benchmark suite live in the bench
//! targets themselves; this crate exists to host them.

