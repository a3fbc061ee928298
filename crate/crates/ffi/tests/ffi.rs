use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use dynrank_ffi::*;

fn toy_path() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/toy.corpus");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dr_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { dr_string_free(p) };
    s
}

fn load_toy() -> *mut DrCorpus {
    let mut corpus = ptr::null_mut();
    let s = unsafe { dr_corpus_load(toy_path().as_ptr(), DrProbMode::Auto, false, &mut corpus) };
    assert_eq!(s, DrStatus::Ok, "{}", last_error());
    corpus
}

#[test]
fn toy_greedy_and_metrics() {
    let corpus = load_toy();
    unsafe {
        assert_eq!(dr_corpus_len(corpus), 1);
        let mut n = 0;
        assert_eq!(dr_corpus_n_docs(corpus, 0, &mut n), DrStatus::Ok);
        assert_eq!(n, 9);
        let mut id = ptr::null_mut();
        assert_eq!(dr_corpus_query_id(corpus, 0, &mut id), DrStatus::Ok);
        assert_eq!(take_string(id), "toy");

        let sat1 = CString::new("sat1").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(
            dr_rank_greedy(corpus, 0, sat1.as_ptr(), 3, 2, &mut r),
            DrStatus::Ok
        );
        let mut text = ptr::null_mut();
        assert_eq!(dr_ranking_to_string(corpus, 0, r, &mut text), DrStatus::Ok);
        assert_eq!(take_string(text), "d7:d1,d2 d3:d4,d5 d6:d8,d9");
        let mut u = 0.0;
        assert_eq!(
            dr_ranking_utility(corpus, 0, r, sat1.as_ptr(), &mut u),
            DrStatus::Ok
        );
        assert!((u - 1.0).abs() < 1e-12);
        dr_ranking_free(r);

        let theta = CString::new("d7:d8,d9 d1:d2,d3 d4:d5,d6").unwrap();
        let prec = CString::new("prec").unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(
            dr_ranking_parse(corpus, 0, theta.as_ptr(), &mut t),
            DrStatus::Ok
        );
        let mut m = 0.0;
        assert_eq!(
            dr_ranking_truncated(corpus, 0, t, prec.as_ptr(), 3, &mut m),
            DrStatus::Ok
        );
        assert!((m - 1.75).abs() < 1e-12);
        assert_eq!(
            dr_ranking_utility(corpus, 0, t, prec.as_ptr(), &mut m),
            DrStatus::Ok
        );
        assert!((m - 2.5).abs() < 1e-12);
        dr_ranking_free(t);
        dr_corpus_free(corpus);
    }
}

#[test]
fn errors_are_reported() {
    let corpus = load_toy();
    unsafe {
        let bad = CString::new("cubic").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(
            dr_rank_greedy(corpus, 0, bad.as_ptr(), 3, 2, &mut r),
            DrStatus::InvalidArgument
        );
        assert!(last_error().contains("cubic"));
        assert!(r.is_null());
        let sat1 = CString::new("sat1").unwrap();
        assert_eq!(
            dr_rank_greedy(corpus, 1, sat1.as_ptr(), 3, 2, &mut r),
            DrStatus::OutOfRange
        );
        assert_eq!(
            dr_rank_greedy(corpus, 0, sat1.as_ptr(), 3, 2, ptr::null_mut()),
            DrStatus::NullArgument
        );
        let dup = CString::new("d1:d1").unwrap();
        assert_eq!(
            dr_ranking_parse(corpus, 0, dup.as_ptr(), &mut r),
            DrStatus::InvalidRanking
        );
        let unknown = CString::new("d10").unwrap();
        assert_eq!(
            dr_ranking_parse(corpus, 0, unknown.as_ptr(), &mut r),
            DrStatus::InvalidArgument
        );

        let text = CString::new("query\tq\nintent\tt\ndoc\td1\njudge\td1\tt\t-1\nend\n").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(
            dr_corpus_parse(text.as_ptr(), DrProbMode::Auto, false, &mut c),
            DrStatus::Parse
        );
        assert!(last_error().contains("line 4"));
        let missing = CString::new("/nonexistent/x.corpus").unwrap();
        assert_eq!(
            dr_corpus_load(missing.as_ptr(), DrProbMode::Auto, false, &mut c),
            DrStatus::Io
        );
        assert_eq!(dr_corpus_len(ptr::null()), 0);
        dr_corpus_free(ptr::null_mut());
        dr_ranking_free(ptr::null_mut());
        dr_model_free(ptr::null_mut());
        dr_string_free(ptr::null_mut());
        dr_corpus_free(corpus);
    }
}

#[test]
fn model_load_and_predict() {
    use dynrank::features::{FeatureTemplate, WeightVector};
    use dynrank::learn::{predict_case, Model};
    use dynrank::synth::{gen_synthetic, SynthParams};
    use dynrank::{ConcaveGain, GainSpec, ShapeParams};

    let dir = tempfile::tempdir().unwrap();
    let t = FeatureTemplate::default();
    let flat: Vec<f64> = (0..t.word_dim() + t.pair_dim())
        .map(|k| (k % 5) as f64 - 1.5)
        .collect();
    let weights = WeightVector::from_flat(&flat, &t).unwrap();
    let model = Model::new(t.clone(), ConcaveGain::Sqrt, weights.clone()).unwrap();
    let model_path = dir.path().join("m.model");
    std::fs::write(&model_path, model.to_text()).unwrap();
    let cases = gen_synthetic(&SynthParams {
        n_queries: 2,
        n_docs: 10,
        ..Default::default()
    })
    .unwrap();
    let corpus_text = CString::new(dynrank::io::format_corpus(&cases)).unwrap();

    unsafe {
        let mut corpus = ptr::null_mut();
        assert_eq!(
            dr_corpus_parse(corpus_text.as_ptr(), DrProbMode::Auto, false, &mut corpus),
            DrStatus::Ok
        );
        let mp = CString::new(model_path.to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(
            dr_model_load(mp.as_ptr(), ptr::null(), &mut m),
            DrStatus::Ok,
            "{}",
            last_error()
        );
        for (i, case) in cases.iter().enumerate() {
            let mut r = ptr::null_mut();
            assert_eq!(dr_predict(m, corpus, i, 3, 2, &mut r), DrStatus::Ok);
            let mut text = ptr::null_mut();
            assert_eq!(dr_ranking_to_string(corpus, i, r, &mut text), DrStatus::Ok);
            let spec = GainSpec::new(ConcaveGain::Sqrt);
            let want =
                predict_case(&weights, case, &t, &spec, &ShapeParams::new(3, 2).unwrap()).unwrap();
            assert_eq!(
                take_string(text),
                dynrank::io::format_ranking(&want, case).unwrap()
            );
            dr_ranking_free(r);
        }
        dr_model_free(m);

        let other = dir.path().join("t.toml");
        std::fs::write(&other, "cosine_bins = [0.3]\n").unwrap();
        let op = CString::new(other.to_str().unwrap()).unwrap();
        assert_eq!(
            dr_model_load(mp.as_ptr(), op.as_ptr(), &mut m),
            DrStatus::Model
        );
        assert!(last_error().contains("template hash mismatch"));
        dr_corpus_free(corpus);
    }
}

fn target_dir() -> PathBuf {
    // Test binaries live in <target>/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_static_library() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let target = target_dir();
    let built = std::process::Command::new(env!("CARGO"))
        .args([
            "build",
            "--quiet",
            "-p",
            "dynrank-ffi",
            "--lib",
            "--target-dir",
        ])
        .arg(target.parent().unwrap())
        .status()
        .expect("cargo");
    assert!(built.success());
    let lib = target.join("libdynrank_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = std::process::Command::new(&exe)
        .arg(toy_path().to_str().unwrap())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "d7:d1,d2 d3:d4,d5 d6:d8,d9 1.000\n"
    );
}
