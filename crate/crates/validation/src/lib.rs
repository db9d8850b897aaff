//! Holds the acceptance gate (`tests/acceptance.rs`); the library is empty.
