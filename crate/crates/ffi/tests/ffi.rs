use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use driftlab_ffi::*;

fn last_error() -> String {
    let p = dl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn procrustes_recovers_a_rotation() {
    // 90 degree rotation in the plane
    let r = [0.0, 1.0, -1.0, 0.0];
    let a = [1.0, 0.0, 0.0, 1.0, 2.0, 3.0];
    let b: Vec<f64> = a.chunks(2).flat_map(|x| [x[0] * r[0] + x[1] * r[2], x[0] * r[1] + x[1] * r[3]]).collect();
    let mut w = [0.0; 4];
    let s = unsafe { dl_procrustes(a.as_ptr(), b.as_ptr(), 3, 2, w.as_mut_ptr()) };
    assert_eq!(s, DlStatus::Ok);
    for (x, y) in w.iter().zip(r) {
        assert!((x - y).abs() < 1e-12);
    }
    let s = unsafe { dl_procrustes(ptr::null(), b.as_ptr(), 3, 2, w.as_mut_ptr()) };
    assert_eq!(s, DlStatus::NullPointer);
    assert!(last_error().contains("`a`"));
}

#[test]
fn cosine_and_errors() {
    let mut c = 0.0;
    let s = unsafe { dl_cosine([1.0, 0.0].as_ptr(), [1.0, 1.0].as_ptr(), 2, &mut c) };
    assert_eq!(s, DlStatus::Ok);
    assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
    let s = unsafe { dl_cosine([0.0, 0.0].as_ptr(), [1.0, 1.0].as_ptr(), 2, &mut c) };
    assert_eq!(s, DlStatus::Insufficient);
}

/// Runs the CLI pipeline on a tiny synthetic corpus and returns the workspace.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let spec = ws.join("spec.toml");
    std::fs::write(&spec, "vocab_size = 30\nn_periods = 3\nn_topics = 3\nwindow = 2\nsentences_per_period = 600\n").unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["driftlab", "--workspace", ws.to_str().unwrap()];
        full.extend_from_slice(args);
        let out = driftlab::cli::invoke(full);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    };
    run(&["synth", "--spec", spec.to_str().unwrap(), "--sentiment-examples", "30"]);
    let corpus = ws.join("synth/corpus.jsonl");
    let periods = ws.join("synth/periods.toml");
    run(&["ingest", "--input", corpus.to_str().unwrap(), "--periods", periods.to_str().unwrap()]);
    run(&["train", "--vector-size", "6", "--epochs", "1", "--sample", "1e-3"]);
    run(&["align"]);
    dir
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn handles_expose_spaces_and_chains() {
    let dir = workspace();
    let ws = dir.path();
    let key = CString::new("w0003#NOUN").unwrap();

    let mut emb = ptr::null_mut();
    assert_eq!(unsafe { dl_embedding_open(c_path(&ws.join("spaces/period_0.bin")).as_ptr(), &mut emb) }, DlStatus::Ok);
    let (mut dim, mut len) = (0, 0);
    assert_eq!(unsafe { dl_embedding_shape(emb, &mut dim, &mut len) }, DlStatus::Ok);
    assert_eq!((dim, len), (6, 30));
    let mut v = vec![0.0; dim];
    assert_eq!(unsafe { dl_embedding_vector(emb, key.as_ptr(), v.as_mut_ptr(), dim) }, DlStatus::Ok);
    assert!(v.iter().any(|x| *x != 0.0));
    assert_eq!(unsafe { dl_embedding_vector(emb, key.as_ptr(), v.as_mut_ptr(), 2) }, DlStatus::BufferTooSmall);
    let absent = CString::new("nema#NOUN").unwrap();
    assert_eq!(unsafe { dl_embedding_vector(emb, absent.as_ptr(), v.as_mut_ptr(), dim) }, DlStatus::MissingWord);
    unsafe { dl_embedding_free(emb) };

    let mut chain = ptr::null_mut();
    assert_eq!(unsafe { dl_chain_open(c_path(&ws.join("chain")).as_ptr(), &mut chain) }, DlStatus::Ok);
    let (mut periods, mut cdim) = (0, 0);
    assert_eq!(unsafe { dl_chain_shape(chain, &mut periods, &mut cdim) }, DlStatus::Ok);
    assert_eq!((periods, cdim), (3, 6));
    let (mut total, mut steps) = (0.0, [0.0; 2]);
    assert_eq!(unsafe { dl_chain_shift(chain, key.as_ptr(), &mut total, steps.as_mut_ptr(), 2) }, DlStatus::Ok);
    assert!((total - steps.iter().sum::<f64>()).abs() < 1e-12);

    let expected = driftlab::shift::cumulative_shift("w0003#NOUN", &driftlab::align::read_chain(&ws.join("chain")).unwrap()).unwrap();
    assert_eq!(total, expected.cumulative);
    assert_eq!(unsafe { dl_chain_vector(chain, 7, key.as_ptr(), v.as_mut_ptr(), dim) }, DlStatus::InvalidArgument);
    unsafe { dl_chain_free(chain) };

    let mut missing = ptr::null_mut();
    let nowhere = c_path(&ws.join("nowhere"));
    assert_eq!(unsafe { dl_chain_open(nowhere.as_ptr(), &mut missing) }, DlStatus::Io);
    assert!(missing.is_null());
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let out = tempfile::tempdir().unwrap();
    let src = out.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "driftlab.h"
int main(void) {
    double a[6] = {1, 0, 0, 1, 2, 3};
    double w[4];
    if (dl_procrustes(a, a, 3, 2, w) != DL_STATUS_OK) return 1;
    if (w[0] < 0.999999 || w[3] < 0.999999) return 2;
    double c;
    double z[2] = {0, 0};
    if (dl_cosine(z, a, 2, &c) != DL_STATUS_INSUFFICIENT) return 3;
    if (dl_last_error_message() == NULL) return 4;
    DlChain *chain = NULL;
    if (dl_chain_open("/nonexistent", &chain) != DL_STATUS_IO) return 5;
    dl_chain_free(chain);
    printf("%s\n", dl_version());
    return 0;
}
"#,
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libdriftlab_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = out.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
