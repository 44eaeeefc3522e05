mod support;

use mtloop_core::textmetrics::{corpus_bleu, corpus_bleu_multi, sentence_bleu, tokenize_13a, TokenSeq};

use support::bleu_fixture::{check, golden, lines, sides};

#[test]
fn tokenizer_matches() {
    let g = golden();
    for (file, key) in [("hyp.txt", "tokenized_hyp"), ("ref.txt", "tokenized_ref")] {
        for (line, expected) in lines(file).iter().zip(g[key].as_array().unwrap()) {
            let expected: Vec<String> = serde_json::from_value(expected.clone()).unwrap();
            assert_eq!(&tokenize_13a(line)[..], &expected[..], "{line}");
        }
    }
}

#[test]
fn sentence_scores_match() {
    let g = golden();
    let (hyps, r1, r2) = sides();
    assert_eq!(hyps.len(), 20);
    for i in 0..hyps.len() {
        check(&format!("single {i}"), &sentence_bleu(&hyps[i], &[&r1[i]]).unwrap(), &g["sentence_single_ref"][i]);
        check(&format!("two {i}"), &sentence_bleu(&hyps[i], &[&r1[i], &r2[i]]).unwrap(), &g["sentence_two_refs"][i]);
    }
}

#[test]
fn corpus_scores_match() {
    let g = golden();
    let (hyps, r1, r2) = sides();
    check("corpus single", &corpus_bleu(&hyps, &r1).unwrap(), &g["corpus_single_ref"]);
    check("corpus two", &corpus_bleu_multi(&hyps, &[&r1, &r2]).unwrap(), &g["corpus_two_refs"]);
    check("first five", &corpus_bleu(&hyps[..5], &r1[..5]).unwrap(), &g["corpus_first_five"]);
}

#[test]
fn short_sentence_uses_effective_order() {
    let (hyp, reference) = (TokenSeq::from_whitespace("the cat"), TokenSeq::from_whitespace("the cat sat"));
    check("the cat", &sentence_bleu(&hyp, &[&reference]).unwrap(), &golden()["the_cat"]);
    // corpus BLEU keeps all four orders, so two tokens cannot score
    assert!(corpus_bleu(&[&hyp], &[&reference]).unwrap().value < 1e-6);
}
