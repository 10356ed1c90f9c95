//! Acceptance checks for `peekstat`, kept in their own package so that the
//! rest of the workspace's tests still run when one of them fails.
//!
//! Run with `cargo test -p peekstat-validation --test acceptance`.
