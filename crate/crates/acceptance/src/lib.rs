//! Acceptance suite for gastimate. Run with `cargo test -p gastimate-acceptance --test acceptance`.
