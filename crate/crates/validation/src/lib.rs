//! Home of the `acceptance` test target. The library itself is empty.
//!
//! The package sorts after the other workspace members, so `cargo test
//! --workspace` runs every other suite before the acceptance criteria.
