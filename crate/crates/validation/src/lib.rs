//! Acceptance criteria for `specdom`; see `tests/acceptance.rs`.
