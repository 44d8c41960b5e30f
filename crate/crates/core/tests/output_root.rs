// Kept alone in its own binary: it mutates the process environment.
use std::path::{Path, PathBuf};

use paczero::harness::{output_root, OUTPUT_ROOT_ENV};

#[test]
fn env_var_overrides_configured_root() {
    unsafe { std::env::set_var(OUTPUT_ROOT_ENV, "/tmp/elsewhere") };
    assert_eq!(output_root(Some(Path::new("configured"))), PathBuf::from("/tmp/elsewhere"));
    unsafe { std::env::set_var(OUTPUT_ROOT_ENV, "") };
    assert_eq!(output_root(Some(Path::new("configured"))), PathBuf::from("configured"));
    unsafe { std::env::remove_var(OUTPUT_ROOT_ENV) };
    assert_eq!(output_root(None), PathBuf::from("runs"));
}
