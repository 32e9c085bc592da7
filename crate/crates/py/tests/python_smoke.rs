use std::process::Command;

/// Builds alongside the cdylib, so the script can load target/*/libcarbid.so.
#[test]
fn python_smoke_script_passes() {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/python/smoke_test.py");
    let out = match Command::new("python3").arg(script).output() {
        Ok(out) => out,
        Err(e) => {
            eprintln!("skipping: python3 unavailable ({e})");
            return;
        }
    };
    assert!(
        out.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
