use humor_core::corpus::{tokenize, Level, PunctMode, TokenSeq};
use humor_core::markov::{training_windows, verbatim_fraction, windows, NGramModel, BOS, EOS};
use std::collections::{BTreeMap, HashSet};

fn brute_force(seqs: &[TokenSeq], n: usize) -> BTreeMap<Vec<String>, BTreeMap<String, u64>> {
    let mut out: BTreeMap<Vec<String>, BTreeMap<String, u64>> = BTreeMap::new();
    for s in seqs {
        let mut padded = vec![BOS.to_string(); n - 1];
        padded.extend(s.tokens.iter().cloned());
        padded.push(EOS.to_string());
        let mut i = 0;
        while i + n <= padded.len() {
            let ctx = padded[i..i + n - 1].to_vec();
            *out.entry(ctx)
                .or_default()
                .entry(padded[i + n - 1].clone())
                .or_default() += 1;
            i += 1;
        }
    }
    out
}

#[test]
fn counts_and_distributions_equal_enumeration() {
    for corpus in humor_fixtures::markov_corpora() {
        for level in [Level::Word, Level::Char] {
            let seqs: Vec<TokenSeq> = corpus
                .iter()
                .map(|t| tokenize(t, level, PunctMode::Keep, true))
                .collect();
            for n in 2..=4 {
                let model = NGramModel::fit(&seqs, level, n).unwrap();
                let oracle = brute_force(&seqs, n);
                assert_eq!(model.counts(), &oracle, "level {level:?} n {n}");
                for (ctx, succ) in &oracle {
                    let total: u64 = succ.values().sum();
                    let dist = model.next_distribution(ctx).unwrap();
                    assert_eq!(dist.len(), succ.len());
                    for (tok, c) in succ {
                        assert!((dist[tok] - *c as f64 / total as f64).abs() < 1e-12);
                    }
                    assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}

fn joke_seqs() -> Vec<TokenSeq> {
    humor_fixtures::joke_corpus(5000, 42)
        .iter()
        .map(|j| tokenize(j, Level::Word, PunctMode::Keep, true))
        .collect()
}

#[test]
fn high_order_memorizes_low_order_recombines() {
    let seqs = joke_seqs();
    let known = training_windows(&seqs, 5);

    let five = NGramModel::fit(&seqs, Level::Word, 5).unwrap();
    let (mut verbatim, mut total) = (0usize, 0usize);
    for seed in 0..100 {
        let out = five.generate(&[], 40, seed, false).unwrap();
        let w = windows(&out, 5);
        total += w.len();
        verbatim += w.iter().filter(|x| known.contains(*x)).count();
        if let Some(f) = verbatim_fraction(&out, &known, 5) {
            assert!(f >= 0.8, "seed {seed}: {f}");
        }
    }
    assert!(total > 0);
    assert!(verbatim as f64 / total as f64 >= 0.8);

    let three = NGramModel::fit(&seqs, Level::Word, 3).unwrap();
    let novel: HashSet<Vec<String>> = (0..100)
        .flat_map(|seed| windows(&three.generate(&[], 40, seed, false).unwrap(), 5))
        .filter(|w| !known.contains(w))
        .collect();
    assert!(!novel.is_empty());
}
