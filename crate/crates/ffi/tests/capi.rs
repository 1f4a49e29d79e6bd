use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use zsr_ffi::*;

fn c(s: &Path) -> CString {
    CString::new(s.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = zsr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_spec() -> ZsrSyntheticSpec {
    ZsrSyntheticSpec {
        classes: 4,
        attribute_dim: 4,
        samples_per_class: 2,
        min_frames: 2,
        max_frames: 3,
        frame_size: 24,
        ..zsr_synthetic_spec_default()
    }
}

fn tiny_config() -> ZsrModelConfig {
    ZsrModelConfig {
        embed_dim: 8,
        num_heads: 2,
        num_layers: 1,
        mlp_ratio: 2,
        segment_size: 4,
        hidden: 8,
        max_frames: 2,
        ..zsr_model_config_default()
    }
}

#[test]
fn version_and_defaults() {
    let v = unsafe { CStr::from_ptr(zsr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let d = zsr_model_config_default();
    assert_eq!((d.embed_dim, d.hidden, d.fc_count), (64, 1024, 2));
    assert_eq!(d.modality, ZsrModality::Both);
}

#[test]
fn similarity_and_null_handling() {
    let a = [1.0, 2.0, 2.0];
    let b = [2.0, 1.0, 2.0];
    let mut out = 0.0;
    assert_eq!(unsafe { zsr_similarity(a.as_ptr(), b.as_ptr(), 3, &mut out) }, ZsrStatus::Ok);
    assert!((out - 8.0 / 9.0).abs() < 1e-12);
    assert!(zsr_last_error().is_null());

    assert_eq!(unsafe { zsr_similarity(ptr::null(), b.as_ptr(), 3, &mut out) }, ZsrStatus::NullPointer);
    assert!(last_error().contains("null"));
    let zero = [0.0; 3];
    assert_eq!(unsafe { zsr_similarity(zero.as_ptr(), b.as_ptr(), 3, &mut out) }, ZsrStatus::Degenerate);
}

#[test]
fn split_fills_both_buffers() {
    let (mut seen, mut unseen) = ([0usize; 20], [0usize; 20]);
    let (mut ns, mut nu) = (0, 0);
    let status = unsafe {
        zsr_split_classes(20, ZsrProtocol::P1, 5, seen.as_mut_ptr(), &mut ns, unseen.as_mut_ptr(), &mut nu)
    };
    assert_eq!(status, ZsrStatus::Ok);
    assert_eq!((ns, nu), (18, 2));
    let mut all: Vec<usize> = seen[..ns].iter().chain(&unseen[..nu]).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..20).collect::<Vec<_>>());

    let status = unsafe {
        zsr_split_classes(1, ZsrProtocol::P1, 5, seen.as_mut_ptr(), &mut ns, unseen.as_mut_ptr(), &mut nu)
    };
    assert_eq!(status, ZsrStatus::Protocol);
}

#[test]
fn dataset_model_and_checkpoint_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec();
    assert_eq!(unsafe { zsr_generate_synthetic(&spec, c(dir.path()).as_ptr()) }, ZsrStatus::Ok);

    let mut table = ptr::null_mut();
    let emb = c(&dir.path().join("embeddings.tsv"));
    assert_eq!(unsafe { zsr_table_load(emb.as_ptr(), &mut table) }, ZsrStatus::Ok);
    assert_eq!(unsafe { zsr_table_len(table) }, 4);
    let dim = unsafe { zsr_table_dim(table) };

    let mut dataset = ptr::null_mut();
    let manifest = c(&dir.path().join("manifest.jsonl"));
    assert_eq!(unsafe { zsr_dataset_load(manifest.as_ptr(), ZsrModality::Both, &mut dataset) }, ZsrStatus::Ok);
    assert_eq!(unsafe { zsr_dataset_len(dataset) }, 8);
    let mut class = usize::MAX;
    assert_eq!(unsafe { zsr_dataset_class(dataset, 7, &mut class) }, ZsrStatus::Ok);
    assert_eq!(class, 3);
    assert_eq!(unsafe { zsr_dataset_class(dataset, 8, &mut class) }, ZsrStatus::InvalidArgument);

    let cfg = tiny_config();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { zsr_model_new(&cfg, 1, &mut model) }, ZsrStatus::Ok);
    assert!(unsafe { zsr_model_param_count(model) } > 0);

    let mut z = vec![0.0; dim];
    let mut len = 0;
    assert_eq!(
        unsafe { zsr_model_embed(model, dataset, 0, z.as_mut_ptr(), 2, &mut len) },
        ZsrStatus::BufferTooSmall
    );
    assert_eq!(len, dim);
    assert_eq!(unsafe { zsr_model_embed(model, dataset, 0, z.as_mut_ptr(), dim, &mut len) }, ZsrStatus::Ok);
    let mut predicted = usize::MAX;
    assert_eq!(unsafe { zsr_classify(table, z.as_ptr(), dim, &mut predicted) }, ZsrStatus::Ok);
    assert!(predicted < 4);
    assert_eq!(unsafe { zsr_classify(table, z.as_ptr(), 3, &mut predicted) }, ZsrStatus::InvalidArgument);

    let ckpt = c(&dir.path().join("m.zsrm"));
    assert_eq!(unsafe { zsr_model_save(model, ckpt.as_ptr()) }, ZsrStatus::Ok);
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { zsr_model_new(&cfg, 2, &mut other) }, ZsrStatus::Ok);
    assert_eq!(unsafe { zsr_model_load(other, ckpt.as_ptr()) }, ZsrStatus::Ok);
    let mut z2 = vec![0.0; dim];
    assert_eq!(unsafe { zsr_model_embed(other, dataset, 0, z2.as_mut_ptr(), dim, &mut len) }, ZsrStatus::Ok);
    assert_eq!(z, z2);

    let bigger = ZsrModelConfig { hidden: 16, ..cfg };
    let mut mismatched = ptr::null_mut();
    assert_eq!(unsafe { zsr_model_new(&bigger, 2, &mut mismatched) }, ZsrStatus::Ok);
    assert_ne!(unsafe { zsr_model_load(mismatched, ckpt.as_ptr()) }, ZsrStatus::Ok);

    unsafe {
        zsr_model_free(mismatched);
        zsr_model_free(other);
        zsr_model_free(model);
        zsr_dataset_free(dataset);
        zsr_table_free(table);
        zsr_model_free(ptr::null_mut());
    }
}

#[test]
fn missing_files_and_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = ptr::null_mut();
    let missing = c(&dir.path().join("none.tsv"));
    assert_eq!(unsafe { zsr_table_load(missing.as_ptr(), &mut table) }, ZsrStatus::Io);
    assert!(table.is_null());

    let bad = ZsrModelConfig { num_heads: 3, ..tiny_config() };
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { zsr_model_new(&bad, 0, &mut model) }, ZsrStatus::Config);
    assert!(model.is_null());
    assert!(last_error().contains("divisible"));
}

#[test]
fn protocol_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(unsafe { zsr_generate_synthetic(&tiny_spec(), c(dir.path()).as_ptr()) }, ZsrStatus::Ok);
    let out = dir.path().join("report");
    let mut summary = ZsrProtocolSummary::default();
    let status = unsafe {
        zsr_run_protocol(
            c(&dir.path().join("manifest.jsonl")).as_ptr(),
            c(&dir.path().join("embeddings.tsv")).as_ptr(),
            ZsrProtocol::P2,
            3,
            2,
            1,
            1e-3,
            4,
            &tiny_config(),
            c(&out).as_ptr(),
            &mut summary,
        )
    };
    assert_eq!(status, ZsrStatus::Ok, "{}", last_error());
    assert_eq!(summary.runs, 2);
    assert!((0.0..=1.0).contains(&summary.mean_accuracy));
    assert!((0.0..=1.0).contains(&summary.mean_seen_accuracy));
    assert!(out.join("metrics.json").exists() && out.join("confusion.csv").exists());
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/zsr.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["zsr_model_new", "zsr_classify", "zsr_last_error", "ZsrStatus", "ZsrModel"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping compile check");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"zsr.h\"\nint main(void) { ZsrModel *m = 0; ZsrModelConfig c = zsr_model_config_default();\n\
         return zsr_model_new(&c, 0, &m) == ZSR_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let o = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
