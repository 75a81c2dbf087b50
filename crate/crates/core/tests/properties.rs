mod common;

use microgrid::ccg::{CcgConfig, CcgModel};
use microgrid::cg::{CgModel, EmConfig};
use microgrid::corpus::{BagOfWords, Corpus};
use microgrid::eval::{
    classify_max_likelihood, diversity_curve, sample_tuples, ClarityModel, ClassifierConfig, EvalTuple, ModelKind,
};
use microgrid::grid::GridGeometry;
use microgrid::io::{format_corpus, parse_corpus};
use microgrid::synth::{planted_grid, sample_banded_classes};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_corpus() -> impl Strategy<Value = Corpus> {
    (1usize..12, 1usize..8, any::<bool>()).prop_flat_map(|(z, n, labeled)| {
        let doc = prop::collection::vec((0..z, 1u32..5), 1..6);
        (prop::collection::vec(doc, n), prop::collection::vec(0usize..3, n)).prop_map(move |(docs, labels)| {
            let docs = docs
                .into_iter()
                .map(|d| BagOfWords::from_counts(d.into_iter().map(|(w, c)| (w, c as f64))))
                .collect();
            let vocab = (0..z).map(|w| format!("t{w}_x")).collect();
            let c = Corpus::new(vocab, docs).unwrap();
            if labeled {
                c.with_labels(labels).unwrap()
            } else {
                c
            }
        })
    })
}

fn arb_tuples(z: usize) -> impl Strategy<Value = Vec<EvalTuple>> {
    prop::collection::vec(prop::collection::btree_set(0..z, 1..4), 1..15).prop_map(|sets| {
        sets.into_iter()
            .map(|s| EvalTuple {
                words: s.into_iter().collect(),
                source_location: 0,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn corpus_text_round_trips(c in arb_corpus()) {
        let text = format_corpus(&c);
        let back = parse_corpus(&text).unwrap();
        // label ids are renumbered by first appearance, so compare names
        prop_assert_eq!(&back.docs, &c.docs);
        prop_assert_eq!(&back.vocab, &c.vocab);
        if let (Some(a), Some(b)) = (&back.labels, &c.labels) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(&back.label_names[*x], &c.label_names[*y]);
            }
        } else {
            prop_assert!(back.labels.is_none() && c.labels.is_none());
        }
        prop_assert_eq!(format_corpus(&back), text);
    }

    #[test]
    fn diversity_is_monotone_and_bounded(tuples in arb_tuples(8), seed in 0u64..100) {
        let c = common::fixture_corpus();
        let index = c.inverted_index();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = diversity_curve(&tuples, &index, 4, &mut rng);
        prop_assert!(d.curve.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(d.curve.iter().all(|v| *v <= c.len() as f64));
        prop_assert!(d.gradient.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn clarity_is_nonnegative(tuples in arb_tuples(30)) {
        let c = common::fixture_corpus();
        let m = ClarityModel::new(&c);
        for t in &tuples {
            if let Some(v) = m.clarity_exact(&t.words) {
                prop_assert!(v >= -1e-12, "{v}");
            }
        }
    }
}

#[test]
fn consistency_and_diversity_match_scans_on_the_fixture() {
    let c = common::fixture_corpus();
    let index = c.inverted_index();
    let g = GridGeometry::square(5, 2).unwrap();
    let model = microgrid::ccg::ccg_train(&c, g, 1, &CcgConfig { em: EmConfig::new(15, 0.0), ..Default::default() })
        .unwrap()
        .model;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=5 {
        let tuples = sample_tuples(&model.grid, n, 40, &mut rng).unwrap();
        assert_eq!(
            microgrid::eval::consistency(&tuples, &index),
            common::brute_consistency(&c, &tuples)
        );
        let mut replay = rng.clone();
        assert_eq!(
            diversity_curve(&tuples, &index, 5, &mut rng).curve,
            common::brute_diversity(&c, &tuples, 5, &mut replay)
        );
    }
}

#[test]
fn classification_ignores_duplicated_training_documents() {
    let g = GridGeometry::square(8, 2).unwrap();
    let planted = planted_grid(g, 40, 1.0, 1e-3, 3).unwrap();
    let corpus = sample_banded_classes(&planted, 2, 8, 20, 4).unwrap();
    let labels = corpus.labels.clone().unwrap();
    let train_idx: Vec<usize> = (0..corpus.len()).filter(|d| d % 4 != 0).collect();
    let test_idx: Vec<usize> = (0..corpus.len()).filter(|d| d % 4 == 0).collect();
    let train = corpus.subset(&train_idx);
    let doubled_idx: Vec<usize> = train_idx.iter().flat_map(|d| [*d, *d]).collect();
    let doubled = corpus.subset(&doubled_idx);
    let test: Vec<BagOfWords> = test_idx.iter().map(|d| corpus.docs[*d].clone()).collect();
    let truth: Vec<usize> = test_idx.iter().map(|d| labels[*d]).collect();
    let config = ClassifierConfig {
        ccg: CcgConfig {
            em: EmConfig::new(10, 0.0),
            ..Default::default()
        },
        seed: 9,
    };
    let geometry = GridGeometry::square(4, 2).unwrap();
    for kind in [ModelKind::Cg, ModelKind::Ccg] {
        let a = classify_max_likelihood(&train, &test, Some(&truth), kind, geometry, &config).unwrap();
        let b = classify_max_likelihood(&doubled, &test, Some(&truth), kind, geometry, &config).unwrap();
        assert_eq!(a.predictions, b.predictions);
        for (x, y) in a.logliks.iter().flatten().zip(b.logliks.iter().flatten()) {
            assert!(common::close(*x, *y, 1e-9), "{x} vs {y}");
        }
    }
}

fn shift_grid(grid: &microgrid::grid::CountingGrid, shift: (isize, isize)) -> microgrid::grid::CountingGrid {
    let g = *grid.geometry();
    let pi = (0..grid.vocab_size()).flat_map(|w| g.shift_field(grid.pi_field(w), shift)).collect();
    microgrid::grid::CountingGrid::from_pi(g, grid.vocab_size(), pi).unwrap()
}

#[test]
fn training_commutes_with_cyclic_shifts() {
    let c = common::fixture_corpus();
    let g = GridGeometry::new((5, 4), (2, 3)).unwrap();
    let init = microgrid::cg::init_grid(g, c.vocab_size(), &c.docs, 8).unwrap();
    let shift = (2, -3);
    let mut worst = 0.0f64;
    let a = CgModel::new(init.clone()).fit(&c.docs, &EmConfig::new(10, 0.0)).unwrap().model.grid;
    let b = CgModel::new(shift_grid(&init, shift)).fit(&c.docs, &EmConfig::new(10, 0.0)).unwrap().model.grid;
    for (x, y) in shift_grid(&a, shift).pi_table().iter().zip(b.pi_table()) {
        worst = worst.max((x - y).abs());
    }
    let config = CcgConfig { em: EmConfig::new(5, 0.0), ..Default::default() };
    let a = CcgModel::new(init.clone()).fit(&c.docs, &config).unwrap().model.grid;
    let b = CcgModel::new(shift_grid(&init, shift)).fit(&c.docs, &config).unwrap().model.grid;
    for (x, y) in shift_grid(&a, shift).pi_table().iter().zip(b.pi_table()) {
        worst = worst.max((x - y).abs());
    }
    // sums over locations run in a shifted order, so equality holds to rounding
    assert!(worst <= 1e-12, "{worst:e}");
}
