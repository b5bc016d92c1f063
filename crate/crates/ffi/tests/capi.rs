use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pegc_ffi::*;

const TRIANGLES: &str = "0\t1\n1\t2\n0\t2\n3\t4\n4\t5\n3\t5\n";

fn last_error() -> String {
    let p = pegc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn triangles() -> *mut PegcGraph {
    let text = CString::new(TRIANGLES).unwrap();
    let mut g = ptr::null_mut();
    let st = unsafe { pegc_graph_parse(text.as_ptr(), false, false, &mut g) };
    assert_eq!(st, PegcStatus::Ok);
    g
}

#[test]
fn run_and_read_back() {
    let g = triangles();
    unsafe {
        assert_eq!(pegc_graph_vertex_count(g), 6);
        assert_eq!(pegc_graph_edge_count(g), 6);
        let mut cfg = pegc_config_default(2, 3);
        cfg.privacy_disabled = true;
        let queries = [0usize, 4];
        let mut r = ptr::null_mut();
        assert_eq!(pegc_run(g, &cfg, queries.as_ptr(), 2, &mut r), PegcStatus::Ok);
        assert_eq!(pegc_result_vertex_count(r), 6);

        let mut buf = [0usize; 6];
        assert_eq!(pegc_result_assignment(r, buf.as_mut_ptr(), 6), PegcStatus::Ok);
        assert!(buf[0] == buf[1] && buf[1] == buf[2]);
        assert!(buf[3] == buf[4] && buf[4] == buf[5]);
        assert_ne!(buf[0], buf[3]);
        assert_eq!(
            pegc_result_assignment(r, buf.as_mut_ptr(), 5),
            PegcStatus::BufferTooSmall
        );

        let mut exp = -1.0;
        assert_eq!(pegc_result_explanation(r, 4, &mut exp), PegcStatus::Ok);
        assert!(exp >= 0.0);
        assert_eq!(pegc_result_explanation(r, 2, &mut exp), PegcStatus::InvalidArgument);
        assert!(last_error().contains("not queried"));

        assert!(pegc_result_cost(r).is_finite());
        let json = CStr::from_ptr(pegc_result_json(r)).to_str().unwrap();
        let doc: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["budget"]["privacy_disabled"], true);

        pegc_result_free(r);
        pegc_graph_free(g);
    }
}

#[test]
fn privacy_must_be_chosen() {
    let g = triangles();
    unsafe {
        let cfg = pegc_config_default(2, 0);
        let mut r = ptr::null_mut();
        assert_eq!(pegc_run(g, &cfg, ptr::null(), 0, &mut r), PegcStatus::InvalidArgument);
        assert!(r.is_null());
        assert!(last_error().contains("epsilon"));
        pegc_graph_free(g);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(pegc_graph_parse(ptr::null(), false, false, &mut g), PegcStatus::NullPointer);
        let bad = CString::new("0\t0\n").unwrap();
        assert_eq!(pegc_graph_parse(bad.as_ptr(), false, false, &mut g), PegcStatus::InvalidInput);
        assert!(last_error().contains("self-loop") || last_error().contains("loop"));
        let src = [0usize, 1];
        let dst = [1usize, 5];
        assert_eq!(
            pegc_graph_from_edges(3, src.as_ptr(), dst.as_ptr(), 2, &mut g),
            PegcStatus::InvalidInput
        );
        assert_eq!(pegc_graph_vertex_count(ptr::null()), 0);
        assert!(pegc_result_cost(ptr::null()).is_nan());
        pegc_graph_free(ptr::null_mut());
        pegc_result_free(ptr::null_mut());
    }
}

#[test]
fn ari_through_c_abi() {
    let a = [0usize, 0, 0, 1, 1, 1];
    let b = [0usize, 0, 1, 1, 1, 1];
    let mut out = 0.0;
    unsafe {
        assert_eq!(pegc_adjusted_rand_index(a.as_ptr(), b.as_ptr(), 6, &mut out), PegcStatus::Ok);
    }
    assert!((out - 1.2 / 3.7).abs() < 1e-12);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pegc.h")).unwrap();
    for name in [
        "pegc_last_error",
        "pegc_config_default",
        "pegc_graph_from_edges",
        "pegc_graph_parse",
        "pegc_graph_vertex_count",
        "pegc_graph_edge_count",
        "pegc_graph_free",
        "pegc_run",
        "pegc_result_vertex_count",
        "pegc_result_assignment",
        "pegc_result_cost",
        "pegc_result_explanation",
        "pegc_result_json",
        "pegc_result_free",
        "pegc_adjusted_rand_index",
        "typedef struct PegcGraph PegcGraph;",
        "PEGC_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "pegc.h"

int main(void) {
    size_t src[] = {0, 1, 0, 3, 4, 3};
    size_t dst[] = {1, 2, 2, 4, 5, 5};
    PegcGraph *g = NULL;
    if (pegc_graph_from_edges(6, src, dst, 6, &g) != PEGC_STATUS_OK) return 1;
    PegcConfig cfg = pegc_config_default(2, 1);
    PegcResult *r = NULL;
    if (pegc_run(g, &cfg, NULL, 0, &r) != PEGC_STATUS_INVALID_ARGUMENT) return 2;
    cfg.privacy_disabled = true;
    if (pegc_run(g, &cfg, NULL, 0, &r) != PEGC_STATUS_OK) return 3;
    size_t labels[6];
    if (pegc_result_assignment(r, labels, 6) != PEGC_STATUS_OK) return 4;
    if (labels[0] != labels[2] || labels[0] == labels[3]) return 5;
    printf("%zu %zu\n", labels[0], labels[3]);
    pegc_result_free(r);
    pegc_graph_free(g);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler on PATH; skipping");
        return;
    }
    // The test binary and the freshly built static library share deps/.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("libpegc_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());

    let work = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = work.join("capi_smoke.c");
    let bin = work.join("capi_smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
}
