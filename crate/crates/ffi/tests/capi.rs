use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hetesn::dsp::io::write_wav;
use hetesn::dsp::{AudioSignal, FeatureConfig, FeatureExtractor};
use hetesn::pipeline::{train_model, ExperimentConfig, TrainedModel, Utterance};
use hetesn_ffi::*;
use nalgebra::DMatrix;

fn toy_features(t: usize, nf: usize, phase: f64) -> DMatrix<f64> {
    DMatrix::from_fn(t, nf, |i, j| ((i as f64) * 0.3 + (j as f64) * 1.7 + phase).sin())
}

fn toy_model(dir: &Path) -> (TrainedModel, CString) {
    let mut cfg = ExperimentConfig { n_classes: 3, context_width: 3, ..Default::default() };
    cfg.features.n_filters = 4;
    cfg.layer.size = 30;
    let train: Vec<Utterance> = (0..3)
        .map(|k| {
            let labels = (0..60).map(|t| (t / 10 % 3) as u32).collect();
            Utterance::new(format!("u{k}"), toy_features(60, 4, k as f64), labels).unwrap()
        })
        .collect();
    let model = train_model(&cfg, 11, &train).unwrap();
    let path = dir.join("toy.esnm");
    model.save(&path).unwrap();
    (model, CString::new(path.to_str().unwrap()).unwrap())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hetesn_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn classify_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (model, path) = toy_model(dir.path());
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { hetesn_model_load(path.as_ptr(), &mut handle) }, HetesnStatus::Ok);
    assert_eq!(unsafe { hetesn_model_n_features(handle) }, 4);
    assert_eq!(unsafe { hetesn_model_n_classes(handle) }, 3);

    let x = toy_features(25, 4, 0.4);
    let mut labels = vec![u32::MAX; 25];
    let status = unsafe { hetesn_model_classify(handle, row_major(&x).as_ptr(), 25, 4, labels.as_mut_ptr()) };
    assert_eq!(status, HetesnStatus::Ok, "{}", last_error());
    assert_eq!(labels, model.predict_frames(&x).unwrap());

    let status = unsafe { hetesn_model_classify(handle, row_major(&x).as_ptr(), 50, 2, labels.as_mut_ptr()) };
    assert_eq!(status, HetesnStatus::InvalidArgument);
    assert!(last_error().contains("features per frame"), "{}", last_error());
    unsafe { hetesn_model_free(handle) };
}

#[test]
fn reservoir_states_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let (model, path) = toy_model(dir.path());
    let mut from_file = ptr::null_mut();
    assert_eq!(unsafe { hetesn_reservoir_load(path.as_ptr(), &mut from_file) }, HetesnStatus::Ok);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hetesn_model_load(path.as_ptr(), &mut m) }, HetesnStatus::Ok);
    let mut from_model = ptr::null_mut();
    assert_eq!(unsafe { hetesn_model_reservoir(m, &mut from_model) }, HetesnStatus::Ok);
    unsafe { hetesn_model_free(m) };

    let (n_in, dim) = unsafe { (hetesn_reservoir_n_in(from_file), hetesn_reservoir_state_dim(from_file)) };
    assert_eq!((n_in, dim), (12, 30));
    let u = toy_features(40, n_in, 2.0);
    let expected = row_major(&model.reservoir.run_sequence(&u, 0).unwrap());
    for r in [from_file, from_model] {
        let mut states = vec![0.0; 40 * dim];
        let status =
            unsafe { hetesn_reservoir_run(r, row_major(&u).as_ptr(), 40, n_in, states.as_mut_ptr(), states.len()) };
        assert_eq!(status, HetesnStatus::Ok, "{}", last_error());
        assert_eq!(states, expected);

        let status = unsafe { hetesn_reservoir_run(r, row_major(&u).as_ptr(), 40, n_in, states.as_mut_ptr(), 10) };
        assert_eq!(status, HetesnStatus::BufferTooSmall);
        unsafe { hetesn_reservoir_free(r) };
    }
}

#[test]
fn features_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    let samples = (0..16_000).map(|i| 0.4 * (i as f64 * 0.11).sin()).collect();
    write_wav(&wav, &AudioSignal::new(samples, 16_000).unwrap()).unwrap();
    let expected = {
        let s = hetesn::dsp::io::read_wav(&wav).unwrap();
        FeatureExtractor::new(FeatureConfig::default(), 16_000).unwrap().extract(&s, "tone").unwrap()
    };
    let path = CString::new(wav.to_str().unwrap()).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { hetesn_features_extract(path.as_ptr(), ptr::null(), &mut f) }, HetesnStatus::Ok);
    let (t, nf) = unsafe { (hetesn_features_n_frames(f), hetesn_features_n_features(f)) };
    assert_eq!((t, nf), expected.values.shape());
    let data = unsafe { std::slice::from_raw_parts(hetesn_features_data(f), t * nf) };
    assert_eq!(data, row_major(&expected.values).as_slice());
    unsafe { hetesn_features_free(f) };
}

#[test]
fn error_codes_and_null_handles() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hetesn_model_load(ptr::null(), &mut m) }, HetesnStatus::NullPointer);
    assert!(m.is_null());

    let missing = CString::new("/nonexistent/model.esnm").unwrap();
    assert_eq!(unsafe { hetesn_model_load(missing.as_ptr(), &mut m) }, HetesnStatus::Io);
    assert!(last_error().contains("/nonexistent/model.esnm"), "{}", last_error());

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.esnm");
    std::fs::write(&junk, b"not a model").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hetesn_model_load(junk.as_ptr(), &mut m) }, HetesnStatus::Format);
    assert_eq!(unsafe { hetesn_features_extract(junk.as_ptr(), ptr::null(), &mut ptr::null_mut()) }, HetesnStatus::Io);

    assert_eq!(
        unsafe { hetesn_model_classify(ptr::null(), ptr::null(), 0, 0, ptr::null_mut()) },
        HetesnStatus::NullPointer
    );
    unsafe {
        assert_eq!(hetesn_model_n_classes(ptr::null()), 0);
        assert_eq!(hetesn_reservoir_state_dim(ptr::null()), 0);
        assert!(hetesn_features_data(ptr::null()).is_null());
        hetesn_model_free(ptr::null_mut());
        hetesn_reservoir_free(ptr::null_mut());
        hetesn_features_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(hetesn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// The generated header parses as both C and C++.
#[test]
fn header_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hetesn.h");
    assert!(header.exists());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = match Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        {
            Ok(o) => o,
            Err(e) => panic!("{compiler} is required to check the header: {e}"),
        };
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
