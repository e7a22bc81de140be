//! Replays the checked-in fuzz corpora through the fuzz targets' invariants.

use std::fs;
use std::path::PathBuf;

use weakstat::config::{parse_matrix_json, MatrixJson, RunConfig};

fn corpus(name: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(name);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    files.sort();
    assert!(!files.is_empty());
    files
}

#[test]
fn run_config_seeds() {
    let mut parsed = 0;
    for (name, text) in corpus("run_config") {
        match RunConfig::from_json(&text) {
            Ok(cfg) => {
                let again = RunConfig::from_json(&cfg.resolved_json()).unwrap();
                assert_eq!(again.resolved_json(), cfg.resolved_json(), "{name}");
                parsed += 1;
            }
            Err(e) => {
                assert!(e.is_config(), "{name}: {e}");
                assert_eq!(name, "truncated.json", "{e}");
            }
        }
    }
    assert!(parsed >= 6);
}

#[test]
fn matrix_json_seeds() {
    for (name, text) in corpus("matrix_json") {
        match parse_matrix_json(&text) {
            Ok(m) => assert_eq!(MatrixJson::from_matrix(&m).to_matrix().unwrap(), m, "{name}"),
            Err(e) => assert!(["ragged.json", "empty.json"].contains(&name.as_str()), "{name}: {e}"),
        }
    }
}
