use std::ffi::{CStr, CString};
use std::ptr;

use galaxy_ffi::*;

const P1: [f32; 5] = [0.1, 0.2, 0.3, 0.8, 0.9];
const TRUTH: [usize; 5] = [0, 0, 0, 1, 1];

fn hand_scores() -> *mut GxScores {
    let data: Vec<f32> = P1.iter().flat_map(|&p| [1.0 - p, p]).collect();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gx_scores_new(data.as_ptr(), 5, 2, &mut s) }, GxStatus::Ok);
    s
}

fn last_error() -> String {
    let p = gx_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn hand_trace_queries_two_then_three() {
    let scores = hand_scores();
    let (ids, classes) = ([0usize, 4], [0usize, 1]);
    let mut sess = ptr::null_mut();
    let st = unsafe { gx_session_new(scores, ids.as_ptr(), classes.as_ptr(), 2, 2, 7, &mut sess) };
    assert_eq!(st, GxStatus::Ok);
    unsafe { gx_scores_free(scores) };

    let mut seen = Vec::new();
    loop {
        let (mut id, mut prov) = (usize::MAX, GxProvenance::Baseline);
        match unsafe { gx_session_next(sess, &mut id, &mut prov) } {
            GxStatus::Ok => {
                assert_eq!(prov, GxProvenance::Bisection);
                seen.push(id);
                assert_eq!(unsafe { gx_session_submit(sess, id, TRUTH[id]) }, GxStatus::Ok);
            }
            GxStatus::BatchComplete => break,
            other => panic!("unexpected status {other:?}: {}", last_error()),
        }
    }
    assert_eq!(seen, vec![2, 3]);
    let mut count = 0;
    assert_eq!(unsafe { gx_session_labeled_count(sess, &mut count) }, GxStatus::Ok);
    assert_eq!(count, 4);
    let mut ord = 0;
    assert_eq!(unsafe { gx_session_ord(sess, &mut ord) }, GxStatus::Ok);
    assert_eq!(ord, 1);
    unsafe { gx_session_free(sess) };
}

#[test]
fn next_is_idempotent_until_answered() {
    let scores = hand_scores();
    let (ids, classes) = ([0usize, 4], [0usize, 1]);
    let mut sess = ptr::null_mut();
    unsafe { gx_session_new(scores, ids.as_ptr(), classes.as_ptr(), 2, 1, 0, &mut sess) };
    let (mut a, mut b) = (0, 0);
    unsafe {
        assert_eq!(gx_session_next(sess, &mut a, ptr::null_mut()), GxStatus::Ok);
        assert_eq!(gx_session_next(sess, &mut b, ptr::null_mut()), GxStatus::Ok);
    }
    assert_eq!(a, b);
    assert_eq!(unsafe { gx_session_submit(sess, 3, 1) }, GxStatus::Input);
    assert!(last_error().contains("outstanding"));
    unsafe {
        gx_session_free(sess);
        gx_scores_free(scores);
    }
}

#[test]
fn null_handles_report_null_pointer() {
    let mut id = 0;
    assert_eq!(unsafe { gx_session_next(ptr::null_mut(), &mut id, ptr::null_mut()) }, GxStatus::NullPointer);
    assert!(last_error().contains("session"));
    assert_eq!(unsafe { gx_scores_new(ptr::null(), 2, 2, ptr::null_mut()) }, GxStatus::NullPointer);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { gx_scores_new(ptr::null(), 2, 2, &mut out) }, GxStatus::NullPointer);
    assert!(out.is_null());
    unsafe {
        gx_scores_free(ptr::null_mut());
        gx_session_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut out = ptr::null_mut();
    unsafe { gx_scores_new(ptr::null(), 2, 2, &mut out) };
    assert!(!gx_last_error_message().is_null());
    let s = hand_scores();
    assert!(gx_last_error_message().is_null());
    unsafe { gx_scores_free(s) };
}

#[test]
fn error_codes_map_core_errors() {
    let data = [0.5f32, f32::NAN];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { gx_scores_new(data.as_ptr(), 1, 2, &mut out) }, GxStatus::Format);

    let scores = hand_scores();
    let (ids, classes) = ([0usize, 0], [0usize, 1]);
    let mut sess = ptr::null_mut();
    let st = unsafe { gx_session_new(scores, ids.as_ptr(), classes.as_ptr(), 2, 2, 0, &mut sess) };
    assert_eq!(st, GxStatus::Input);
    let (ids, classes) = ([9usize], [0usize]);
    let st = unsafe { gx_session_new(scores, ids.as_ptr(), classes.as_ptr(), 1, 2, 0, &mut sess) };
    assert_eq!(st, GxStatus::Input);
    let st = unsafe { gx_session_new(scores, ptr::null(), ptr::null(), 0, 0, 0, &mut sess) };
    assert_eq!(st, GxStatus::Input);
    assert!(sess.is_null());

    let all: Vec<usize> = (0..5).collect();
    let mut buf = [0usize; 2];
    let mut len = 0;
    let st = unsafe {
        gx_select_baseline(scores, GxStrategy::Confidence, all.as_ptr(), TRUTH.as_ptr(), 5, 2, 0, buf.as_mut_ptr(), &mut len)
    };
    assert_eq!(st, GxStatus::PoolExhausted);

    let missing = CString::new("/nonexistent/dir/x.gxsm").unwrap();
    assert_eq!(unsafe { gx_scores_read_gxsm(missing.as_ptr(), &mut out) }, GxStatus::Io);
    unsafe { gx_scores_free(scores) };
}

#[test]
fn gxsm_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("gx-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = CString::new(dir.join("s.gxsm").to_str().unwrap()).unwrap();
    let scores = hand_scores();
    assert_eq!(unsafe { gx_scores_write_gxsm(scores, file.as_ptr()) }, GxStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { gx_scores_read_gxsm(file.as_ptr(), &mut back) }, GxStatus::Ok);
    let (mut n, mut k) = (0, 0);
    assert_eq!(unsafe { gx_scores_shape(back, &mut n, &mut k) }, GxStatus::Ok);
    assert_eq!((n, k), (5, 2));
    for (i, &p) in P1.iter().enumerate() {
        let mut v = 0.0;
        assert_eq!(unsafe { gx_scores_get(back, i, 1, &mut v) }, GxStatus::Ok);
        assert_eq!(v, p);
    }
    let mut v = 0.0;
    assert_eq!(unsafe { gx_scores_get(back, 5, 0, &mut v) }, GxStatus::Input);
    unsafe {
        gx_scores_free(scores);
        gx_scores_free(back);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn baselines_select_expected_ids() {
    let scores = hand_scores();
    let (ids, classes) = ([0usize, 4], [0usize, 1]);
    let mut buf = [usize::MAX; 2];
    let mut len = 0;
    let st = unsafe {
        gx_select_baseline(scores, GxStrategy::Confidence, ids.as_ptr(), classes.as_ptr(), 2, 2, 0, buf.as_mut_ptr(), &mut len)
    };
    assert_eq!(st, GxStatus::Ok);
    assert_eq!((len, buf), (2, [2, 1]));
    let st = unsafe {
        gx_select_baseline(scores, GxStrategy::Mlp, ids.as_ptr(), classes.as_ptr(), 2, 2, 0, buf.as_mut_ptr(), &mut len)
    };
    assert_eq!(st, GxStatus::Ok);
    assert_eq!((len, buf), (2, [1, 2]));
    let mut big = [usize::MAX; 10];
    let st = unsafe {
        gx_select_baseline(scores, GxStrategy::Random, ids.as_ptr(), classes.as_ptr(), 2, 10, 3, big.as_mut_ptr(), &mut len)
    };
    assert_eq!(st, GxStatus::Ok);
    assert_eq!(len, 3);
    let mut got = big[..3].to_vec();
    got.sort_unstable();
    assert_eq!(got, vec![1, 2, 3]);
    unsafe { gx_scores_free(scores) };
}

#[test]
fn header_declares_the_abi() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/galaxy.h")).unwrap();
    for needle in [
        "#ifndef GALAXY_H",
        "typedef struct GxScores GxScores;",
        "typedef struct GxSession GxSession;",
        "GX_STATUS_OK = 0",
        "GX_STATUS_BATCH_COMPLETE = 1",
        "GX_STATUS_PANIC = -99",
        "const char *gx_last_error_message(void);",
        "gx_session_new(",
        "gx_session_next(",
        "gx_session_submit(",
        "gx_session_free(",
        "gx_select_baseline(",
    ] {
        assert!(h.contains(needle), "header lacks {needle}");
    }
}
