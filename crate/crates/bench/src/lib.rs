//! Bench crate has no library code; see benches/.
