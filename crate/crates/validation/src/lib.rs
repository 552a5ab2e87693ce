//! Acceptance run for the workspace. The checks live in
//! `tests/acceptance.rs` and run with `cargo test -p rfr-sabr-validation`.
