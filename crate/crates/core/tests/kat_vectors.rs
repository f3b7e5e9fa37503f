// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use dprand::kat::{bundled_files, run_dir, run_rsp};

#[test]
fn each_bundled_file_passes_every_record() {
    for (name, text) in bundled_files() {
        let s = run_rsp(name, text);
        assert_eq!(s.total, 240, "{name}");
        assert!(s.all_passed(), "{name}: {:?}", s.failures.first());
    }
}

#[test]
fn kat_directory_matches_bundled() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("kat");
    let s = run_dir(&dir).unwrap();
    assert_eq!(s.files.len(), 3);
    assert_eq!((s.total, s.passed), (720, 720));
}

#[test]
fn empty_directory_does_not_pass() {
    let dir = std::env::temp_dir().join(format!("dprand-kat-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let s = run_dir(&dir).unwrap();
    assert!(!s.all_passed());
    std::fs::remove_dir_all(&dir).unwrap();
}
