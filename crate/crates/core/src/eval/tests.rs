use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::CorpusBuilder;

fn corpus(sentences: &[&[(&str, &str)]]) -> Corpus {
    let mut b = CorpusBuilder::new();
    for s in sentences {
        b.push_sentence(s.iter().map(|&(w, t)| (w, Some(t)))).unwrap();
    }
    b.build().unwrap()
}

#[test]
fn hand_mapped_contingency_counts() {
    // c0: DT x5, NN x1; c1: NN x3.
    let pred = [0, 0, 0, 0, 0, 0, 1, 1, 1];
    let gold = [0, 0, 0, 0, 0, 1, 1, 1, 1];
    let t = ContingencyTable::new(&pred, &gold).unwrap();
    assert_eq!(t.count(0, 0), 5);
    assert_eq!(t.count(0, 1), 1);
    assert_eq!(t.count(1, 1), 3);
    assert_eq!(t.total(), 9);
    assert_eq!(t.mapping(), vec![Some(0), Some(1)]);
    assert!((t.many_to_one() - 8.0 / 9.0).abs() < 1e-15);
}

#[test]
fn ties_map_to_lowest_gold_id() {
    let t = ContingencyTable::new(&[0, 0, 0, 0, 2], &[3, 1, 3, 1, 0]).unwrap();
    assert_eq!(t.mapping(), vec![Some(1), None, Some(0)]);
}

#[test]
fn length_mismatch_and_empty_input_are_errors() {
    assert_eq!(many_to_one(&[0, 1], &[0]), Err(EvalError::LengthMismatch { pred: 2, gold: 1 }));
    assert_eq!(v_measure(&[], &[]), Err(EvalError::Empty));
}

#[test]
fn relabeled_prediction_scores_one() {
    let gold = [0, 1, 2, 1, 0, 2, 2];
    let pred: Vec<u32> = gold.iter().map(|g| [5, 3, 0][*g as usize]).collect();
    assert_eq!(many_to_one(&pred, &gold).unwrap(), 1.0);
    assert!((v_measure(&pred, &gold).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn constant_prediction_scores_majority_frequency() {
    let gold = [0, 1, 1, 2, 1, 0, 1];
    assert!((many_to_one(&[4; 7], &gold).unwrap() - 4.0 / 7.0).abs() < 1e-15);
}

#[test]
fn single_cluster_against_balanced_gold_has_zero_v() {
    let t = ContingencyTable::new(&[0; 6], &[0, 1, 0, 1, 0, 1]).unwrap();
    let (h, c) = t.homogeneity_completeness();
    assert_eq!(h, 0.0);
    assert_eq!(c, 1.0);
    assert_eq!(t.v_measure(), 0.0);
    // Both clusterings constant: both conditional entropies vanish.
    assert_eq!(v_measure(&[1; 4], &[2; 4]).unwrap(), 1.0);
}

#[test]
fn v_measure_matches_reference_value() {
    // Frozen from an independent implementation.
    let pred = [0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 0];
    let gold = [0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 0, 2];
    let (h, c) = ContingencyTable::new(&pred, &gold).unwrap().homogeneity_completeness();
    assert!((h - 0.426_500_684_475_675_85).abs() < 1e-12);
    assert!((c - 0.449_518_508_797_436).abs() < 1e-12);
    assert!((v_measure(&pred, &gold).unwrap() - 0.437_707_194_451_434_9).abs() < 1e-12);
}

#[test]
fn random_prediction_has_near_zero_v() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let gold: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let pred: Vec<u32> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let v = v_measure(&pred, &gold).unwrap();
    assert!(v < 0.05, "v = {v}");
}

/// Mutual-information form: h = I / H(gold), c = I / H(pred).
fn oracle_hc(pred: &[u32], gold: &[u32]) -> (f64, f64) {
    use std::collections::HashMap;
    let n = pred.len() as f64;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut mp: HashMap<u32, f64> = HashMap::new();
    let mut mg: HashMap<u32, f64> = HashMap::new();
    for (&p, &g) in pred.iter().zip(gold) {
        *joint.entry((p, g)).or_default() += 1.0 / n;
        *mp.entry(p).or_default() += 1.0 / n;
        *mg.entry(g).or_default() += 1.0 / n;
    }
    let ent = |m: &HashMap<u32, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let mi: f64 = joint.iter().map(|(&(p, g), &pj)| pj * (pj / (mp[&p] * mg[&g])).ln()).sum();
    let (hg, hp) = (ent(&mg), ent(&mp));
    (if hg == 0.0 { 1.0 } else { mi / hg }, if hp == 0.0 { 1.0 } else { mi / hp })
}

fn labels() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (1usize..60).prop_flat_map(|n| (prop::collection::vec(0u32..6, n), prop::collection::vec(0u32..5, n)))
}

proptest! {
    #[test]
    fn scores_agree_with_mutual_information_oracle((pred, gold) in labels()) {
        let (h, c) = ContingencyTable::new(&pred, &gold).unwrap().homogeneity_completeness();
        let (oh, oc) = oracle_hc(&pred, &gold);
        prop_assert!((h - oh.clamp(0.0, 1.0)).abs() < 1e-9);
        prop_assert!((c - oc.clamp(0.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn many_to_one_is_bounded_and_permutation_invariant((pred, gold) in labels(), shift in 0u32..6) {
        let t = ContingencyTable::new(&pred, &gold).unwrap();
        let m1 = t.many_to_one();
        let mut freq = [0usize; 5];
        gold.iter().for_each(|&g| freq[g as usize] += 1);
        let majority = *freq.iter().max().unwrap() as f64 / gold.len() as f64;
        let distinct_gold = freq.iter().filter(|&&f| f > 0).count() as f64;
        prop_assert!(m1 >= majority - 1e-12);
        prop_assert!(m1 >= 1.0 / distinct_gold - 1e-12);
        prop_assert!(m1 <= 1.0);
        let permuted: Vec<u32> = pred.iter().map(|p| (p + shift) % 6).collect();
        prop_assert_eq!(many_to_one(&permuted, &gold).unwrap(), m1);
        prop_assert!((v_measure(&permuted, &gold).unwrap() - t.v_measure()).abs() < 1e-12);
    }

    #[test]
    fn v_measure_is_one_exactly_for_relabelings((pred, gold) in labels()) {
        let v = v_measure(&pred, &gold).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        // Identical up to relabeling iff each label determines the other.
        let mut fwd = std::collections::HashMap::new();
        let mut bwd = std::collections::HashMap::new();
        let bijective = pred.iter().zip(&gold).all(|(p, g)| {
            *fwd.entry(*p).or_insert(*g) == *g && *bwd.entry(*g).or_insert(*p) == *p
        });
        prop_assert_eq!(bijective, (v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn extracted_classes_collect_distinct_labels() {
    let c = corpus(&[&[("the", "DT"), ("run", "VB"), ("ends", "VBZ")], &[("a", "DT"), ("run", "NN")]]);
    let classes = extract_classes(c.gold().unwrap(), &c).unwrap();
    let id = |w| c.lookup(w).unwrap() as usize;
    assert_eq!(classes[id("run")].iter().collect::<Vec<_>>(), vec![1, 3]);
    // One-occurrence types get singletons.
    for w in ["the", "ends", "a"] {
        assert_eq!(classes[id(w)].len(), 1);
    }
    let s = LexiconSummary::new(&classes);
    assert_eq!(s.distinct_classes, 3);
    assert!((s.mean_class_size - 4.0 / 3.0).abs() < 1e-15);
    assert!((s.mean_type_class_size - 5.0 / 4.0).abs() < 1e-15);
    assert!(extract_classes(&[vec![0]], &c).is_err());
    assert_eq!(
        extract_classes(&[vec![0, 200, 0], vec![0, 0]], &c),
        Err(EvalError::LabelOutOfRange(200))
    );
}

#[test]
fn zipf_table_ranks_by_type_count() {
    let a = AmbiguityClass::singleton(0);
    let b = AmbiguityClass::singleton(1);
    let ab = a.with(1);
    let t = zipf_table(&[ab, a, b, a, ab, a]);
    assert_eq!(
        t,
        vec![
            ZipfRow { rank: 1, class: a, types: 3 },
            ZipfRow { rank: 2, class: ab, types: 2 },
            ZipfRow { rank: 3, class: b, types: 1 },
        ]
    );
    assert_eq!(zipf_table(&[b; 7]), vec![ZipfRow { rank: 1, class: b, types: 7 }]);
}

#[test]
fn power_law_fit_separates_zipfian_from_flat() {
    // types proportional to 1000 / rank.
    let zipf: Vec<ZipfRow> = (1..=30)
        .map(|r| ZipfRow { rank: r, class: AmbiguityClass::singleton(r as Tag), types: 1000 / r })
        .collect();
    let fit = power_law_fit(&zipf);
    assert!(fit.slope < -0.9 && fit.slope > -1.1, "{fit:?}");
    assert!(fit.r_squared > 0.99);

    let flat: Vec<ZipfRow> = (1..=30)
        .map(|r| ZipfRow { rank: r, class: AmbiguityClass::singleton(r as Tag), types: 12 })
        .collect();
    let fit = power_law_fit(&flat);
    assert_eq!(fit.slope, 0.0);
    assert_eq!(fit.r_squared, 0.0);
    assert_eq!(power_law_fit(&flat[..1]).r_squared, 0.0);
}

#[test]
fn class_report_rows_and_tsv() {
    let c = corpus(&[
        &[("the", "DT"), ("run", "VB"), ("ends", "VBZ"), ("run", "NN")],
        &[("a", "DT"), ("run", "NN"), ("the", "DT")],
    ]);
    let gold = extract_classes(c.gold().unwrap(), &c).unwrap();
    let report = ClassReport::new(&c, &gold, ClassTags::Gold, 2);
    let ranks: Vec<usize> = report.rows.iter().map(|r| r.rank).collect();
    assert_eq!(ranks, vec![1, 2, 3]);
    assert_eq!(report.rows.iter().map(|r| r.types).sum::<usize>(), c.num_types());
    assert_eq!(report.rows[0].labels, vec!["DT"]);
    assert_eq!(report.rows[0].top[0].surface, "the");
    let run = report.rows.iter().find(|r| r.labels == ["VB", "NN"]).unwrap();
    assert_eq!(run.top[0].proportions, vec![1.0 / 3.0, 2.0 / 3.0]);

    let mut out = Vec::new();
    report.write_tsv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank\ttags\ttypes\twords");
    assert_eq!(lines[1], "1\tDT\t2\tthe (1.00), a (1.00)");
    // Equal type counts: the smaller bitmask ranks first.
    assert_eq!(lines[2], "2\tVBZ\t1\tends (1.00)");
    assert_eq!(lines[3], "3\tVB,NN\t1\trun (0.33,0.67)");
    assert_eq!(lines.len(), 4);
}

#[test]
fn mapped_report_merges_tags_with_the_same_gold_label() {
    let c = corpus(&[&[("x", "A"), ("y", "B"), ("x", "A")]]);
    let classes = vec![AmbiguityClass::full(3), AmbiguityClass::singleton(1)];
    let mapping = [Some(0), Some(1), Some(0), None];
    let r = ClassReport::new(&c, &classes, ClassTags::Mapped(&mapping), 5);
    let full = r.rows.iter().find(|row| row.class.len() == 3).unwrap();
    assert_eq!(full.labels, vec!["A", "B"]);
    assert_eq!(full.top[0].proportions, vec![1.0, 0.0]);
    let mapped = [None, Some(1)];
    let r = ClassReport::new(&c, &classes, ClassTags::Mapped(&mapped), 5);
    assert_eq!(r.rows.iter().find(|row| row.class.len() == 3).unwrap().labels, vec!["#0", "B", "#2"]);

    let names = ["n".to_string(), "v".to_string()];
    let r = ClassReport::new(&c, &classes, ClassTags::Named(&names), 5);
    let full = r.rows.iter().find(|row| row.class.len() == 3).unwrap();
    assert_eq!(full.labels, vec!["n", "v", "2"]);
    assert!(full.top[0].proportions.is_empty());
}
