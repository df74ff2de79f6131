mod common;

use std::collections::HashSet;

use kbe_core::synth::{generate_synthetic_kb, Pattern};
use kbe_core::trainer::{logistic_step, margin_step, CorruptionWeights, NegativeSampler, Slot};
use kbe_core::{checkpoint, train, ModelKind, TrainConfig, Triple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn corruption_slots_follow_weights() {
    let sampler = NegativeSampler::with_sizes(50, 10, CorruptionWeights::default(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = [0usize; 3];
    for _ in 0..30_000 {
        let idx = match sampler.choose_slot(&mut rng) {
            Slot::Subject => 0,
            Slot::Object => 1,
            Slot::Relation => 2,
        };
        counts[idx] += 1;
    }
    let sd = (30_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - 10_000.0).abs() <= 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn negatives_differ_in_exactly_one_slot() {
    let sampler = NegativeSampler::with_sizes(5, 3, CorruptionWeights::new(1.0, 2.0, 1.0), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pos = Triple::new(1, 2, 3);
    let mut replacements = [0usize; 5];
    for _ in 0..5000 {
        let neg = sampler.sample(pos, &mut rng).unwrap();
        let changed = usize::from(neg.s != pos.s) + usize::from(neg.r != pos.r) + usize::from(neg.o != pos.o);
        assert_eq!(changed, 1);
        if neg.o != pos.o {
            replacements[neg.o] += 1;
        }
    }
    // the object is replaced uniformly by one of the other four entities
    assert_eq!(replacements[3], 0);
    let total: usize = replacements.iter().sum();
    for (e, &c) in replacements.iter().enumerate().filter(|(e, _)| *e != 3) {
        let share = c as f64 / total as f64;
        assert!((share - 0.25).abs() < 0.05, "entity {e}: {share}");
    }
}

#[test]
fn filtered_sampling_avoids_train() {
    let kb = generate_synthetic_kb(12, Pattern::Random { relations: 2 }, 0.5, 4).unwrap();
    let train: HashSet<Triple> = kb.train.iter().copied().collect();
    let sampler = NegativeSampler::new(&kb, CorruptionWeights::default(), true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for &t in &kb.train {
        for _ in 0..5 {
            assert!(!train.contains(&sampler.sample(t, &mut rng).unwrap()));
        }
    }
}

fn changed_rows(before: &[f64], after: &[f64], width: usize) -> Vec<usize> {
    (0..before.len() / width)
        .filter(|&i| before[i * width..(i + 1) * width] != after[i * width..(i + 1) * width])
        .collect()
}

#[test]
fn single_steps_touch_only_named_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let mut p = common::random_params(&mut rng, ModelKind::TransE, 4, 10, 4, false);
        let (pos, neg) = (Triple::new(1, 2, 3), Triple::new(1, 2, 7));
        let before = p.clone();
        margin_step(&mut p, pos, neg, 10.0, 0.05).unwrap();
        let ents = changed_rows(before.entity_table(), p.entity_table(), p.width());
        assert!(ents.iter().all(|e| [1, 3, 7].contains(e)), "{ents:?}");
        // the relation gradients of pos and neg may cancel exactly under L1
        let rels = changed_rows(before.relation_table(), p.relation_table(), p.width());
        assert!(rels.iter().all(|&r| r == 2), "{rels:?}");

        for kind in [ModelKind::DistMult, ModelKind::ComplEx] {
            let mut p = common::random_params(&mut rng, kind, 4, 10, 4, false);
            let before = p.clone();
            logistic_step(&mut p, Triple::new(5, 0, 8), -1.0, 0.1, 1e-3).unwrap();
            assert_eq!(changed_rows(before.entity_table(), p.entity_table(), p.width()), vec![5, 8]);
            assert_eq!(changed_rows(before.relation_table(), p.relation_table(), p.width()), vec![0]);
        }
    }
}

fn small_config(kind: ModelKind, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::for_model(kind);
    cfg.dim = 10;
    cfg.epochs = 5;
    cfg.batch_size = 20;
    cfg.seed = seed;
    cfg
}

/// Single runs are noisy (TransE renormalizes after every epoch), so the
/// check is on the loss averaged over three seeds.
#[test]
fn early_epoch_losses_do_not_increase() {
    for pattern in [Pattern::InversePair, Pattern::Symmetric] {
        let kb = generate_synthetic_kb(20, pattern, 0.5, 1).unwrap();
        for kind in ModelKind::ALL {
            let mut avg = [0.0; 5];
            for seed in 0..3 {
                let (report, _) = train(&kb, &small_config(kind, seed)).unwrap();
                for (a, l) in avg.iter_mut().zip(&report.epoch_losses) {
                    *a += l / 3.0;
                }
            }
            assert!(avg.windows(2).all(|w| w[1] <= w[0]), "{kind} {pattern:?}: {avg:?}");
        }
    }
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let kb = generate_synthetic_kb(15, Pattern::InversePair, 0.6, 2).unwrap();
    for kind in ModelKind::ALL {
        let dirs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let (_, params) = train(&kb, &small_config(kind, 42)).unwrap();
                checkpoint::save(dir.path(), &params, 42).unwrap();
                dir
            })
            .collect();
        for file in [checkpoint::CHECKPOINT_FILE, checkpoint::ENTITY_TABLE_FILE, checkpoint::RELATION_TABLE_FILE] {
            let a = std::fs::read(dirs[0].path().join(file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(file)).unwrap();
            assert_eq!(a, b, "{kind} {file}");
        }
        let (_, other) = train(&kb, &small_config(kind, 43)).unwrap();
        let (_, first) = train(&kb, &small_config(kind, 42)).unwrap();
        assert_ne!(other.entity_table(), first.entity_table());
    }
}

#[test]
fn checkpoint_round_trip_preserves_scores() {
    let kb = generate_synthetic_kb(15, Pattern::Symmetric, 0.6, 2).unwrap();
    let (_, params) = train(&kb, &small_config(ModelKind::ComplEx, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    checkpoint::save(dir.path(), &params, 1).unwrap();
    let (manifest, loaded) = checkpoint::load(dir.path()).unwrap();
    assert_eq!((manifest.n, manifest.m, manifest.seed), (15, 1, 1));
    for (a, b) in params.entity_table().iter().zip(loaded.entity_table()) {
        assert_eq!(*b, *a as f32 as f64);
    }
}
