use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/adafw.h")
}

fn compiler() -> Option<&'static str> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let source = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct AdafwRegion AdafwRegion;"));
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Builds and runs a C program against the static library when both a
/// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let Some(archive) = exe
        .ancestors()
        .skip(1)
        .take(3)
        .map(|d| d.join("libadafw_ffi.a"))
        .find(|p| p.exists())
    else {
        eprintln!("static library not found next to the test binary; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "adafw.h"

int main(void) {
    AdafwRegion *region = NULL;
    if (adafw_region_new(ADAFW_REGION_KIND_LINF_BALL, NULL, 2, 1.0, &region) != ADAFW_STATUS_OK) return 1;
    double g[2] = {0.5, -2.0};
    double v[2];
    if (adafw_region_lmo(region, g, 2, v) != ADAFW_STATUS_OK) return 2;
    if (v[0] != -1.0 || v[1] != 1.0) return 3;
    double bad[3] = {0, 0, 0};
    if (adafw_region_lmo(region, bad, 3, v) != ADAFW_STATUS_DIMENSION_MISMATCH) return 4;
    if (adafw_last_error() == NULL) return 5;
    adafw_region_free(region);
    printf("ok %s\n", adafw_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let build = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
