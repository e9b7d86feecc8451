mod common;

use bytevct::pretok::pretokenize;

#[test]
fn encodings_match_reference_ids() {
    let text = common::reference_text();
    for v in common::VARIANTS {
        let tk = common::load(v);
        let ours = tk.encode(&text);
        let refs = common::reference_ids(v);
        if let Some(i) = ours.iter().zip(&refs).position(|(a, b)| a != b) {
            let lo = i.saturating_sub(3);
            panic!(
                "{v}: first mismatch at token {i}: ours {:?} ref {:?}",
                &ours[lo..(i + 4).min(ours.len())],
                &refs[lo..(i + 4).min(refs.len())]
            );
        }
        assert_eq!(ours.len(), refs.len(), "{v}");
        assert_eq!(tk.decode(&ours).unwrap(), text, "{v}");
    }
}

#[test]
fn counts_and_known_ids() {
    let tk = common::load("cl100k");
    assert_eq!(tk.vocab_size(), 100257);
    assert_eq!(tk.merges().len(), 100000);
    assert!(tk.unreachable().is_empty());
    assert_eq!(tk.encode(b"Hello wor"), vec![9906, 4191]);
    assert_eq!(tk.encode(b"  0"), vec![220, 220, 15]);
    assert_eq!(tk.decode(&[220, 220]).unwrap(), b"  ");
    assert!(tk.encode(b"").is_empty());

    let d = common::load("disordered");
    assert!(d.ignore_merges());
    assert!(!d.unreachable().is_empty());
    for w in d.merges().windows(2) {
        assert!(w[0].rank + 1 == w[1].rank);
    }
    for m in d.merges() {
        for input in [m.left, m.right] {
            if let Some((_, _, r)) = d.forming(input) {
                assert!(r < m.rank);
            }
        }
    }
}

#[test]
fn whole_corpus_round_trips() {
    let c = common::corpus();
    for v in ["cl100k", "gpt2"] {
        let tk = common::load(v);
        let ids = tk.encode(&c);
        assert_eq!(tk.decode(&ids).unwrap(), c, "{v}");
        let again = tk.encode(&tk.decode(&ids).unwrap());
        assert_eq!(again, ids);
    }
    let pieces = pretokenize(&c, common::load("cl100k").rules());
    assert_eq!(pieces.concat(), c);
}
