//! Placeholder main for the CLI; replaced as modules land.
fn main() {}
