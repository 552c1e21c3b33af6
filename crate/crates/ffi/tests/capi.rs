use std::ffi::{CStr, CString};
use std::ptr;

use asrdata_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    asr_string_free(p);
    s
}

unsafe fn corpus(text: &str, allow_empty: bool) -> *mut AsrCorpus {
    let mut c = ptr::null_mut();
    assert_eq!(asr_corpus_parse(cs(text).as_ptr(), false, allow_empty, &mut c), AsrStatus::Ok);
    c
}

unsafe fn terms(tsv: &str) -> *mut AsrTermSet {
    let mut t = ptr::null_mut();
    assert_eq!(asr_terms_parse(cs(tsv).as_ptr(), &mut t), AsrStatus::Ok);
    t
}

#[test]
fn tokenize_returns_json() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(asr_tokenize(cs("Bo-in, the Seven!").as_ptr(), &mut out), AsrStatus::Ok);
        assert_eq!(take(out), r#"["bo-in","the","seven"]"#);
    }
}

#[test]
fn metrics_through_handles() {
    unsafe {
        let c = corpus("a b a c\nb c d\n", false);
        assert_eq!(asr_corpus_len(c), 2);
        let mut v = 0.0;
        assert_eq!(asr_corpus_mattr(c, 100, &mut v), AsrStatus::Ok);
        assert_eq!(v, 4.0 / 7.0);
        assert_eq!(asr_corpus_distinct_n(c, 2, &mut v), AsrStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(asr_corpus_mean_perplexity(c, ptr::null(), 2, 0.1, &mut v), AsrStatus::Ok);
        assert!(v >= 1.0);
        asr_corpus_free(c);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(asr_corpus_parse(ptr::null(), false, false, &mut c), AsrStatus::NullPointer);
        let msg = CStr::from_ptr(asr_last_error()).to_str().unwrap();
        assert!(msg.contains("text"), "{msg}");
        assert_eq!(asr_corpus_parse(cs("!!!").as_ptr(), false, false, &mut c), AsrStatus::Parse);
        assert!(c.is_null());
        let mut t = ptr::null_mut();
        assert_eq!(asr_terms_parse(cs("two words\n").as_ptr(), &mut t), AsrStatus::Parse);
        let c = corpus("x", false);
        let mut v = 0.0;
        assert_eq!(asr_corpus_mattr(c, 0, &mut v), AsrStatus::InvalidArgument);
        asr_corpus_free(c);
        asr_corpus_free(ptr::null_mut());
        asr_string_free(ptr::null_mut());
    }
}

#[test]
fn extraction_and_lookup() {
    unsafe {
        let tr = corpus("wilco wilco squawk\nthe squawk wilco\nmayday\n", false);
        let mut t = ptr::null_mut();
        assert_eq!(asr_terms_extract(tr, cs("the\nmayday\n").as_ptr(), 2, &mut t), AsrStatus::Ok);
        assert_eq!(asr_terms_len(t), 2);
        assert!(asr_terms_contains(t, cs("Wilco").as_ptr()));
        assert!(!asr_terms_contains(t, cs("mayday").as_ptr()));
        let mut out = ptr::null_mut();
        assert_eq!(asr_terms_to_tsv(t, &mut out), AsrStatus::Ok);
        assert_eq!(take(out), "squawk\t2\nwilco\t3\n");
        asr_terms_free(t);
        asr_corpus_free(tr);
    }
}

#[test]
fn greedy_selection_respects_count_budget() {
    unsafe {
        let pool = corpus(
            "alpha bravo wilco\nalpha bravo\ncharlie delta echo foxtrot\nwilco wilco roger\nbravo charlie\n",
            false,
        );
        let t = terms("wilco\n");
        let mut p = asr_select_params_default();
        p.budget_kind = AsrBudgetKind::Count;
        p.budget = 3.0;
        let mut s = ptr::null_mut();
        assert_eq!(asr_select_greedy(pool, t, ptr::null(), &p, &mut s), AsrStatus::Ok);
        assert_eq!(asr_selection_len(s), 3);
        let mut id = ptr::null_mut();
        assert_eq!(asr_selection_id(s, 0, &mut id), AsrStatus::Ok);
        assert!(!take(id).is_empty());
        assert_eq!(asr_selection_id(s, 3, &mut id), AsrStatus::InvalidArgument);
        let mut json = ptr::null_mut();
        assert_eq!(asr_selection_to_json(s, &mut json), AsrStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        asr_selection_free(s);

        p.alpha = -1.0;
        assert_eq!(asr_select_greedy(pool, t, ptr::null(), &p, &mut s), AsrStatus::Selection);
        asr_terms_free(t);
        asr_corpus_free(pool);
    }
}

#[test]
fn evaluation_report() {
    unsafe {
        let r = corpus("the wilco is at gate", false);
        let h = corpus("the is at the gate", true);
        let t = terms("wilco\n");
        let mut rep = AsrWerReport::default();
        assert_eq!(asr_evaluate(r, h, t, false, &mut rep), AsrStatus::Ok);
        assert_eq!(rep.n_ref, 5);
        assert_eq!(rep.n_ref_biased, 1);
        assert!(rep.has_b_wer && rep.has_u_wer);
        assert_eq!(rep.b_wer, 1.0);
        assert_eq!(rep.wer, 2.0 / 5.0);
        let empty = corpus("\n", true);
        assert_eq!(asr_evaluate(r, empty, t, false, &mut rep), AsrStatus::Evaluation);
        for c in [r, h, empty] {
            asr_corpus_free(c);
        }
        asr_terms_free(t);
    }
}
