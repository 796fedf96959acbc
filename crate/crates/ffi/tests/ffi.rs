use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cmvc::synth::bundled_sample;
use cmvc_ffi::*;

fn last_error() -> Option<String> {
    let p = cmvc_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn sample_handle() -> *mut CmvcVideo {
    let bytes = bundled_sample().to_bytes();
    let mut video = ptr::null_mut();
    let s = unsafe { cmvc_video_from_bytes(bytes.as_ptr(), bytes.len(), 64, 48, 1, 30, 1, &mut video) };
    assert_eq!(s, CmvcStatus::Ok);
    video
}

#[test]
fn encode_decode_through_the_c_abi() {
    let video = sample_handle();
    unsafe {
        assert_eq!(cmvc_video_frame_count(video), 16);
        let (mut w, mut h) = (0, 0);
        assert_eq!(cmvc_video_geometry(video, &mut w, &mut h, ptr::null_mut()), CmvcStatus::Ok);
        assert_eq!((w, h), (64, 48));

        let mut opts = cmvc_encode_options_default();
        opts.n_keyframes = 3;
        let mut stream = ptr::null_mut();
        assert_eq!(cmvc_encode(video, &opts, ptr::null(), ptr::null(), &mut stream), CmvcStatus::Ok);
        assert!(last_error().is_none());
        let bytes = std::slice::from_raw_parts(cmvc_buffer_data(stream), cmvc_buffer_len(stream)).to_vec();

        // Same stream as the Rust API produces.
        let cfg = cmvc::pipeline::EncodeConfig { n_keyframes: 3, ..Default::default() };
        assert_eq!(bytes, cmvc::pipeline::encode(&bundled_sample(), &cfg).unwrap());

        let linear = CString::new("linear").unwrap();
        let mut decoded = ptr::null_mut();
        assert_eq!(cmvc_decode(bytes.as_ptr(), bytes.len(), linear.as_ptr(), 2, &mut decoded), CmvcStatus::Ok);
        let mut db = 0.0;
        assert_eq!(cmvc_psnr(video, decoded, &mut db), CmvcStatus::Ok);
        assert!(db > 15.0 && db.is_finite());

        let mut raw = ptr::null_mut();
        assert_eq!(cmvc_video_to_bytes(decoded, &mut raw), CmvcStatus::Ok);
        assert_eq!(cmvc_buffer_len(raw), 64 * 48 * 16);

        cmvc_buffer_free(raw);
        cmvc_buffer_free(stream);
        cmvc_video_free(decoded);
        cmvc_video_free(video);
    }
}

#[test]
fn keyframes_and_buffer_capacity() {
    let video = sample_handle();
    unsafe {
        let mut keys = [usize::MAX; 4];
        assert_eq!(cmvc_select_keyframes(video, 4, 2, 0, keys.as_mut_ptr(), 4), CmvcStatus::Ok);
        assert_eq!((keys[0], keys[3]), (0, 15));
        assert_eq!(cmvc_select_keyframes(video, 4, 0, 0, keys.as_mut_ptr(), 3), CmvcStatus::BufferTooSmall);
        assert_eq!(cmvc_select_keyframes(video, 4, 9, 0, keys.as_mut_ptr(), 4), CmvcStatus::InvalidArgument);
        assert_eq!(cmvc_select_keyframes(video, 40, 0, 0, [0; 40].as_mut_ptr(), 40), CmvcStatus::Contract);
        cmvc_video_free(video);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut video = ptr::null_mut();
        let bytes = [0u8; 100];
        assert_eq!(cmvc_video_from_bytes(bytes.as_ptr(), 100, 10, 10, 1, 30, 1, &mut video), CmvcStatus::TooShort);
        assert_eq!(cmvc_video_from_bytes(bytes.as_ptr(), 99, 10, 1, 1, 30, 1, &mut video), CmvcStatus::MalformedInput);
        assert_eq!(cmvc_video_from_bytes(ptr::null(), 10, 5, 1, 1, 30, 1, &mut video), CmvcStatus::NullArgument);
        assert!(video.is_null());
        assert!(last_error().unwrap().contains("NULL"));

        let mut decoded = ptr::null_mut();
        assert_eq!(cmvc_decode(bytes.as_ptr(), 100, ptr::null(), 0, &mut decoded), CmvcStatus::UnsupportedStream);
        assert_eq!(cmvc_decode(bytes.as_ptr(), 3, ptr::null(), 0, &mut decoded), CmvcStatus::MalformedStream);
        let bogus = CString::new("quantum").unwrap();
        assert_eq!(cmvc_decode(bytes.as_ptr(), 100, bogus.as_ptr(), 0, &mut decoded), CmvcStatus::InvalidArgument);

        let video = sample_handle();
        let mut opts = cmvc_encode_options_default();
        opts.quality = 100;
        let mut stream = ptr::null_mut();
        assert_eq!(cmvc_encode(video, &opts, ptr::null(), ptr::null(), &mut stream), CmvcStatus::InvalidArgument);
        opts = cmvc_encode_options_default();
        opts.mode = 0;
        assert_eq!(cmvc_encode(video, &opts, ptr::null(), ptr::null(), &mut stream), CmvcStatus::InvalidArgument);
        let text = CString::new("[keyframe 0]\nsea\n[keyframe 1]\nsky\n[clip 0]\npan up\n").unwrap();
        assert_eq!(cmvc_encode(video, &opts, ptr::null(), text.as_ptr(), &mut stream), CmvcStatus::Ok);
        let missing = CString::new("external:exit 0").unwrap();
        opts = cmvc_encode_options_default();
        opts.optimize = 1;
        assert_eq!(
            cmvc_encode(video, &opts, missing.as_ptr(), ptr::null(), &mut stream),
            CmvcStatus::BackendUnavailable
        );
        cmvc_buffer_free(stream);
        cmvc_video_free(video);
    }
}

#[test]
fn bd_rate_through_the_c_abi() {
    let ar = [0.01, 0.02, 0.04, 0.08];
    let d = [30.0, 33.0, 36.0, 39.0];
    let tr = ar.map(|r| r / 2.0);
    let mut out = 0.0;
    unsafe {
        assert_eq!(cmvc_bd_rate(ar.as_ptr(), d.as_ptr(), 4, tr.as_ptr(), d.as_ptr(), 4, 1, &mut out), CmvcStatus::Ok);
        assert!((out + 50.0).abs() < 1e-6);
        let far = [50.0, 51.0, 52.0, 53.0];
        assert_eq!(
            cmvc_bd_rate(ar.as_ptr(), d.as_ptr(), 4, tr.as_ptr(), far.as_ptr(), 4, 1, &mut out),
            CmvcStatus::NoOverlap
        );
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.y");
    std::fs::write(&path, bundled_sample().to_bytes()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut video = ptr::null_mut();
    unsafe {
        assert_eq!(cmvc_video_load(c.as_ptr(), 64, 48, 1, 30, 1, &mut video), CmvcStatus::Ok);
        assert_eq!(cmvc_video_frame_count(video), 16);
        cmvc_video_free(video);
        let gone = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        assert_eq!(cmvc_video_load(gone.as_ptr(), 64, 48, 1, 30, 1, &mut video), CmvcStatus::Io);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cmvc.h")).unwrap();
    for name in [
        "cmvc_last_error",
        "cmvc_version",
        "cmvc_encode_options_default",
        "cmvc_video_from_bytes",
        "cmvc_video_load",
        "cmvc_video_free",
        "cmvc_video_frame_count",
        "cmvc_video_geometry",
        "cmvc_video_to_bytes",
        "cmvc_buffer_data",
        "cmvc_buffer_len",
        "cmvc_buffer_free",
        "cmvc_select_keyframes",
        "cmvc_encode",
        "cmvc_decode",
        "cmvc_psnr",
        "cmvc_bd_rate",
        "CMVC_STATUS_CORRUPT_STREAM",
        "typedef struct CmvcVideo CmvcVideo",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Directory holding the built static library (target/<profile>).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libcmvc_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}
