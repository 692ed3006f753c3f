//! Acceptance suite: the shipping criteria, one test each, every test
//! printing a `criterion N PASS` line with its measurements.
//!
//! Run with `cargo test -p kgseq --test acceptance -- --nocapture` to see the
//! lines; the heavyweight end-to-end checks (5 and 6) train real models on
//! the bundled benchmark-scale dataset.

mod common;

use std::time::Instant;

use kgseq::baselines::{train_baseline, BaselineConfig, BaselineKind};
use kgseq::encoder::{forward_eval, EncoderConfig, EncoderParams};
use kgseq::eval::{
    link_prediction_eval, relation_prediction_eval, EvalOptions, Scorer, ScorerError,
};
use kgseq::rng::{rng_from, split_seed};
use kgseq::store::{
    load_dataset, KnowledgeGraph, LabeledTriple, NegativeSamplingConfig, RelationId, Split,
    TextSource, Triple,
};
use kgseq::tasks::{
    classification_accuracy, relation_batch_gradients, relation_loss, train,
    triple_batch_gradients, triple_loss, Model, ModelScorer, RelationScores, Task, TrainConfig,
    TripleScore,
};
use kgseq::textseq::{
    build_vocab, pack_pair_tokens, pack_triple_tokens, PackedSequence, PackingConfig, SeqKind,
    TextIndex, TokenId,
};
use rand::Rng;

use common::{brute_force_link_prediction, brute_force_relation_prediction, kg_from_triples};

fn synth_kg() -> (tempfile::TempDir, KnowledgeGraph) {
    let dir = tempfile::tempdir().unwrap();
    kgseq::synth::write_benchmark(dir.path(), 7).unwrap();
    let kg = load_dataset(dir.path(), TextSource::Names).unwrap();
    (dir, kg)
}

fn tiny_triples(seed: u64, n: usize) -> Vec<PackedSequence> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            pack_triple_tokens(
                &[TokenId(5 + rng.random_range(0..3))],
                &[TokenId(8)],
                &[TokenId(5 + rng.random_range(0..3)), TokenId(9)],
                &PackingConfig::default(),
            )
            .unwrap()
        })
        .collect()
}

/// Moves the model to a generic random point: the tiny initialization leaves
/// early-layer attention nearly uniform, where query/key gradients vanish to
/// the finite-difference noise floor and a relative comparison is vacuous.
fn roughen_parameters(model: &mut Model<f64>) {
    let specs = kgseq::encoder::tensor_specs(&model.config);
    let mut slices = model.params.tensor_slices_mut();
    for (i, s) in slices.iter_mut().enumerate() {
        if !specs[i].0.contains("ln") {
            for v in s.iter_mut() {
                *v *= 8.0;
            }
        }
    }
    let mut rng = rng_from(99);
    for s in model.params.tensor_slices_mut() {
        for v in s.iter_mut() {
            *v += 0.05 * (rng.random::<f64>() - 0.5);
        }
    }
    for v in model.head.weight_mut().data_mut() {
        *v *= 8.0;
    }
}

/// Central finite differences against the analytic gradients of the summed
/// cross-entropy, per-tensor norm-relative error.
fn finite_difference_check<F>(
    params: &mut Model<f64>,
    loss_of: F,
    analytic: (&EncoderParams<f64>, &kgseq::tensor::Matrix<f64>),
) -> f64
where
    F: Fn(&Model<f64>) -> f64,
{
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    let n_tensors = analytic.0.tensor_slices().len();
    for ti in 0..n_tensors {
        let len = analytic.0.tensor_slices()[ti].len();
        let mut diff_sq = 0.0;
        let mut a_sq = 0.0;
        let mut f_sq = 0.0;
        for ei in 0..len {
            let orig = params.params.tensor_slices()[ti][ei];
            params.params.tensor_slices_mut()[ti][ei] = orig + step;
            let plus = loss_of(params);
            params.params.tensor_slices_mut()[ti][ei] = orig - step;
            let minus = loss_of(params);
            params.params.tensor_slices_mut()[ti][ei] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let an = analytic.0.tensor_slices()[ti][ei];
            diff_sq += (an - fd) * (an - fd);
            a_sq += an * an;
            f_sq += fd * fd;
        }
        let rel = diff_sq.sqrt() / a_sq.sqrt().max(f_sq.sqrt()).max(1e-12);
        worst = worst.max(rel);
    }
    // The head tensor.
    let (rows, cols) = (analytic.1.rows(), analytic.1.cols());
    let mut diff_sq = 0.0;
    let mut a_sq = 0.0;
    let mut f_sq = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let orig = params.head.weight().get(r, c);
            params.head.weight_mut().set(r, c, orig + step);
            let plus = loss_of(params);
            params.head.weight_mut().set(r, c, orig - step);
            let minus = loss_of(params);
            params.head.weight_mut().set(r, c, orig);
            let fd = (plus - minus) / (2.0 * step);
            let an = analytic.1.get(r, c);
            diff_sq += (an - fd) * (an - fd);
            a_sq += an * an;
            f_sq += fd * fd;
        }
    }
    worst.max(diff_sq.sqrt() / a_sq.sqrt().max(f_sq.sqrt()).max(1e-12))
}

#[test]
fn criterion_1_gradient_correctness() {
    let started = Instant::now();
    let cfg = EncoderConfig {
        num_layers: 2,
        num_heads: 2,
        hidden_size: 8,
        ffn_size: 16,
        max_positions: 12,
        vocab_size: 12,
        dropout_rate: 0.1,
        seed: 5,
    };

    // Two-way plausibility loss through head and encoder.
    let mut model = Model::<f64>::new_triple(cfg.clone()).unwrap();
    roughen_parameters(&mut model);
    let batch = tiny_triples(3, 3);
    let labels = vec![true, false, true];
    let dropout_seed = 17;
    let grads = triple_batch_gradients(&model, &batch, &labels, dropout_seed).unwrap();
    let worst_triple = finite_difference_check(
        &mut model,
        |m| {
            triple_batch_gradients(m, &batch, &labels, dropout_seed)
                .unwrap()
                .loss
        },
        (&grads.encoder, &grads.head),
    );

    // Relation cross-entropy through head and encoder.
    let mut model = Model::<f64>::new_relation(cfg, 5).unwrap();
    roughen_parameters(&mut model);
    let pairs: Vec<PackedSequence> = (0..3)
        .map(|i| {
            pack_pair_tokens(
                &[TokenId(5 + i)],
                &[TokenId(9), TokenId(6)],
                &PackingConfig::default(),
            )
            .unwrap()
        })
        .collect();
    let rel_labels = vec![RelationId(0), RelationId(3), RelationId(2)];
    let grads = relation_batch_gradients(&model, &pairs, &rel_labels, dropout_seed).unwrap();
    let worst_relation = finite_difference_check(
        &mut model,
        |m| {
            relation_batch_gradients(m, &pairs, &rel_labels, dropout_seed)
                .unwrap()
                .loss
        },
        (&grads.encoder, &grads.head),
    );

    let elapsed = started.elapsed();
    assert!(
        worst_triple < 1e-4,
        "triple-loss gradient error {worst_triple}"
    );
    assert!(
        worst_relation < 1e-4,
        "relation-loss gradient error {worst_relation}"
    );
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: gradient correctness (worst tensor rel. error: triple {worst_triple:.2e}, relation {worst_relation:.2e}, {elapsed:?})"
    );
}

#[test]
fn criterion_2_loss_anchors() {
    // Uniform two-way prediction costs ln 2 per example.
    let uniform = TripleScore {
        positive: 0.5f64,
        negative: 0.5,
    };
    let loss = triple_loss(&[uniform], &[true]).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);

    // Uniform 46-way relation prediction costs ln 46 per example.
    let uniform46 = RelationScores(vec![1.0f64 / 46.0; 46]);
    let loss46 = relation_loss(&[uniform46], &[RelationId(7)]).unwrap();
    assert!((loss46 - 46f64.ln()).abs() < 1e-9);

    // The same anchors end to end with zeroed heads.
    let cfg = EncoderConfig {
        num_layers: 1,
        num_heads: 2,
        hidden_size: 8,
        ffn_size: 16,
        max_positions: 12,
        vocab_size: 12,
        dropout_rate: 0.0,
        seed: 2,
    };
    let mut model = Model::<f64>::new_triple(cfg.clone()).unwrap();
    model.head.weight_mut().scale(0.0);
    let batch = tiny_triples(8, 4);
    let scores = kgseq::tasks::score_triples(&model, &batch).unwrap();
    let loss = triple_loss(&scores, &[true, false, true, false]).unwrap();
    assert!((loss - 4.0 * std::f64::consts::LN_2).abs() < 1e-9);

    let mut model = Model::<f64>::new_relation(cfg, 46).unwrap();
    model.head.weight_mut().scale(0.0);
    let pair = pack_pair_tokens(&[TokenId(5)], &[TokenId(6)], &PackingConfig::default()).unwrap();
    let scores = kgseq::tasks::score_relations(&model, &pair).unwrap();
    let loss = relation_loss(&[scores], &[RelationId(11)]).unwrap();
    assert!((loss - 46f64.ln()).abs() < 1e-9);

    println!("criterion 2 PASS: loss anchors ln2 and ln46 hold within 1e-9");
}

/// Arithmetic scorer with deliberate ties, used for oracle equivalence.
struct TableScorer {
    salt: u64,
    n_relations: usize,
}

impl Scorer for TableScorer {
    fn plausibility(&self, t: Triple) -> Result<f64, ScorerError> {
        let mix = (t.head.0 as u64)
            .wrapping_mul(2654435761)
            .wrapping_add((t.relation.0 as u64).wrapping_mul(40503))
            .wrapping_add((t.tail.0 as u64).wrapping_mul(2246822519))
            .wrapping_add(self.salt);
        Ok(((mix >> 3) % 29) as f64 / 29.0)
    }

    fn relation_scores(
        &self,
        head: kgseq::store::EntityId,
        tail: kgseq::store::EntityId,
    ) -> Option<Result<Vec<f64>, ScorerError>> {
        Some(Ok((0..self.n_relations as u32)
            .map(|r| {
                self.plausibility(Triple {
                    head,
                    relation: RelationId(r),
                    tail,
                })
                .unwrap()
            })
            .collect()))
    }
}

#[test]
fn criterion_3_ranking_oracle_equivalence() {
    for (seed, n_ent, n_rel, n_triples) in [
        (21u64, 24u32, 3u32, 100usize),
        (22, 90, 7, 420),
        (23, 200, 11, 1000),
    ] {
        let started = Instant::now();
        let mut rng = rng_from(seed);
        let mut triples = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while triples.len() < n_triples {
            let t = Triple::new(
                rng.random_range(0..n_ent),
                rng.random_range(0..n_rel),
                rng.random_range(0..n_ent),
            );
            if seen.insert(t) {
                triples.push(t);
            }
        }
        let test = triples.split_off(n_triples - n_triples / 8);
        let dev = triples.split_off(triples.len() - n_triples / 10);
        let kg = kg_from_triples(n_ent, n_rel, triples, dev, test);
        let scorer = TableScorer {
            salt: seed,
            n_relations: n_rel as usize,
        };

        let report =
            link_prediction_eval(&scorer, &kg, Split::Test, &EvalOptions::default()).unwrap();
        let (mr, hits1, hits10, ranks) =
            brute_force_link_prediction(&scorer, &kg, Split::Test, true);
        assert_eq!(
            report.records.iter().map(|r| r.rank).collect::<Vec<_>>(),
            ranks
        );
        assert_eq!(report.mean_rank.to_bits(), mr.to_bits());
        assert_eq!(report.hits_at_k[&1].to_bits(), hits1.to_bits());
        assert_eq!(report.hits_at_k[&10].to_bits(), hits10.to_bits());

        let report =
            relation_prediction_eval(&scorer, &kg, Split::Test, &EvalOptions::default()).unwrap();
        let (mr, hits1, _, ranks) =
            brute_force_relation_prediction(&scorer, &kg, Split::Test, true);
        assert_eq!(
            report.records.iter().map(|r| r.rank).collect::<Vec<_>>(),
            ranks
        );
        assert_eq!(report.mean_rank.to_bits(), mr.to_bits());
        assert_eq!(report.hits_at_k[&1].to_bits(), hits1.to_bits());

        let elapsed = started.elapsed();
        assert!(elapsed.as_secs() < 60, "kg {seed} took {elapsed:?}");
        println!(
            "criterion 3 PASS: batched evaluator equals brute force exactly on kg seed {seed} ({n_ent} entities, {elapsed:?})"
        );
    }
}

#[test]
fn criterion_4_negative_sampling() {
    let started = Instant::now();

    // Exhaustive enumeration on the three-entity graph.
    let kg = kg_from_triples(
        3,
        1,
        vec![Triple::new(0, 0, 1)],
        vec![Triple::new(0, 0, 1)],
        vec![Triple::new(0, 0, 1)],
    );
    let cfg = NegativeSamplingConfig::new(4, 3, 50_000).unwrap();
    let sample = kg.sample_negatives(Triple::new(0, 0, 1), &cfg).unwrap();
    let got: std::collections::HashSet<Triple> =
        sample.negatives.iter().map(|l| l.triple).collect();
    let expected: std::collections::HashSet<Triple> = [
        Triple::new(1, 0, 1),
        Triple::new(2, 0, 1),
        Triple::new(0, 0, 0),
        Triple::new(0, 0, 2),
    ]
    .into_iter()
    .collect();
    assert_eq!(got, expected, "the four analytic negatives");

    // Ten thousand sampled negatives on the benchmark-scale dataset.
    let (_dir, kg) = synth_kg();
    let train = kg.split(Split::Train);
    let mut produced = 0usize;
    let mut i = 0usize;
    while produced < 10_000 {
        let pos = train[i % train.len()];
        let cfg = NegativeSamplingConfig::new(5, split_seed(99, i as u64), 200).unwrap();
        let sample = kg.sample_negatives(pos, &cfg).unwrap();
        for neg in &sample.negatives {
            let t = neg.triple;
            assert!(!kg.in_train(&t), "negative {t} is in the positive set");
            assert_eq!(t.relation, pos.relation);
            assert!(
                (t.head != pos.head) ^ (t.tail != pos.tail),
                "exactly one corrupted slot"
            );
            produced += 1;
        }
        i += 1;
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "criterion 4 PASS: analytic negative set and {produced} sampled negatives all valid ({elapsed:?})"
    );
}

#[test]
fn criterion_5_end_to_end_link_prediction() {
    let started = Instant::now();
    let (_dir, kg) = synth_kg();
    let vocab = build_vocab(&kg, 600).unwrap();
    let text = TextIndex::build(&kg, &vocab);
    let packing = PackingConfig::default();
    let cfg = EncoderConfig {
        num_layers: 2,
        num_heads: 4,
        hidden_size: 128,
        ffn_size: 512,
        max_positions: 32,
        vocab_size: vocab.len(),
        dropout_rate: 0.1,
        seed: 42,
    };
    let mut model = Model::<f32>::new_triple(cfg).unwrap();
    let mut tc = TrainConfig::for_task(Task::LinkPrediction);
    // Training from random initialization needs a larger step than the
    // fine-tuning default.
    tc.learning_rate = 1e-3;
    assert_eq!(tc.epochs, 5);
    assert_eq!(tc.negatives_per_positive, 5);
    let log = train(&mut model, &kg, &text, Task::LinkPrediction, &packing, &tc).unwrap();
    let train_done = started.elapsed();

    let scorer = ModelScorer::new(&model, &text, packing);
    let report = link_prediction_eval(&scorer, &kg, Split::Test, &EvalOptions::default()).unwrap();
    let elapsed = started.elapsed();

    assert!(
        report.mean_rank <= 15.0,
        "mean rank {} exceeds 15",
        report.mean_rank
    );
    assert!(
        report.hits_at_k[&10] >= 0.70,
        "hits@10 {} below 0.70",
        report.hits_at_k[&10]
    );
    println!(
        "criterion 5 PASS: end-to-end link prediction MR {:.2} hits@10 {:.3} (final loss {:.4}, train {train_done:?}, total {elapsed:?})",
        report.mean_rank,
        report.hits_at_k[&10],
        log.last().unwrap().mean_loss
    );
}

#[test]
fn criterion_6_transe_baseline() {
    let started = Instant::now();
    let (_dir, kg) = synth_kg();
    let cfg = BaselineConfig {
        dim: 64,
        margin: 0.5,
        learning_rate: 0.01,
        epochs: 300,
        negatives_per_positive: 1,
        seed: 42,
    };
    let trained = train_baseline(BaselineKind::TransE, &kg, &cfg).unwrap();
    let report =
        link_prediction_eval(&trained.model, &kg, Split::Test, &EvalOptions::default()).unwrap();
    let elapsed = started.elapsed();

    assert!(
        report.hits_at_k[&10] >= 0.95,
        "hits@10 {} below 0.95",
        report.hits_at_k[&10]
    );
    assert!(
        report.mean_rank <= 3.0,
        "mean rank {} exceeds 3.0",
        report.mean_rank
    );
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
    println!(
        "criterion 6 PASS: TransE d=64 MR {:.3} hits@10 {:.3} ({elapsed:?})",
        report.mean_rank, report.hits_at_k[&10]
    );
}

#[test]
fn criterion_7_overfit_capacity_and_random_init() {
    // Random-head sanity: balanced examples at initialization classify at
    // chance level.
    let (_dir, kg) = synth_kg();
    let vocab = build_vocab(&kg, 600).unwrap();
    let text = TextIndex::build(&kg, &vocab);
    let packing = PackingConfig::default();
    let cfg = EncoderConfig {
        num_layers: 1,
        num_heads: 2,
        hidden_size: 32,
        ffn_size: 64,
        max_positions: 32,
        vocab_size: vocab.len(),
        dropout_rate: 0.0,
        seed: 91,
    };
    let model = Model::<f32>::new_triple(cfg).unwrap();
    let mut balanced: Vec<LabeledTriple> = Vec::new();
    for (i, &pos) in kg.split(Split::Train).iter().take(300).enumerate() {
        balanced.push(LabeledTriple {
            triple: pos,
            label: true,
        });
        let cfg = NegativeSamplingConfig::new(1, split_seed(5, i as u64), 64).unwrap();
        balanced.extend(kg.sample_negatives(pos, &cfg).unwrap().negatives);
    }
    assert!(balanced.len() >= 500);
    let init_acc = classification_accuracy(&model, &text, &packing, &balanced, 0.5).unwrap();
    assert!(
        (0.4..=0.6).contains(&init_acc),
        "initial accuracy {init_acc} outside [0.4, 0.6]"
    );

    // Overfit capacity on a ten-entity synthetic graph. Keep the triple
    // order independent of set iteration so the run is reproducible.
    let mut rng = rng_from(31);
    let mut seen = std::collections::HashSet::new();
    let mut train_triples: Vec<Triple> = Vec::new();
    while train_triples.len() < 30 {
        let t = Triple::new(
            rng.random_range(0..10),
            rng.random_range(0..2),
            rng.random_range(0..10),
        );
        if seen.insert(t) {
            train_triples.push(t);
        }
    }
    let kg = kg_from_triples(
        10,
        2,
        train_triples.clone(),
        vec![train_triples[0]],
        vec![train_triples[1]],
    );
    let vocab = build_vocab(&kg, 100).unwrap();
    let text = TextIndex::build(&kg, &vocab);
    let cfg = EncoderConfig {
        num_layers: 1,
        num_heads: 2,
        hidden_size: 64,
        ffn_size: 128,
        max_positions: 32,
        vocab_size: vocab.len(),
        dropout_rate: 0.0,
        seed: 8,
    };
    let mut model = Model::<f32>::new_triple(cfg).unwrap();
    let mut tc = TrainConfig::for_task(Task::TripleClassification);
    // Run well past convergence; negatives resample every epoch, so the
    // model has to carve out the full complement set. Small batches supply
    // the composition noise that breaks the symmetric start, and the low
    // rate stays inside the tiny model's stability region.
    tc.epochs = 4000;
    tc.learning_rate = 5e-4;
    tc.batch_size = 10;
    train(&mut model, &kg, &text, Task::TripleClassification, &packing, &tc).unwrap();

    // Training accuracy over the positives plus a fixed negative sample.
    let mut labeled: Vec<LabeledTriple> = Vec::new();
    for (i, &pos) in kg.split(Split::Train).iter().enumerate() {
        labeled.push(LabeledTriple {
            triple: pos,
            label: true,
        });
        let cfg = NegativeSamplingConfig::new(1, split_seed(77, i as u64), 64).unwrap();
        labeled.extend(kg.sample_negatives(pos, &cfg).unwrap().negatives);
    }
    let acc = classification_accuracy(&model, &text, &packing, &labeled, 0.5).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc} below 0.95");
    println!(
        "criterion 7 PASS: initial accuracy {init_acc:.3} in [0.4, 0.6]; overfit accuracy {acc:.3} >= 0.95"
    );
}

#[test]
fn criterion_8_attention_well_formedness() {
    let cfg = EncoderConfig {
        num_layers: 2,
        num_heads: 4,
        hidden_size: 32,
        ffn_size: 64,
        max_positions: 24,
        vocab_size: 40,
        dropout_rate: 0.0,
        seed: 12,
    };
    let params = EncoderParams::<f32>::init(&cfg).unwrap();
    let mut rng = rng_from(55);
    let mut checked_rows = 0usize;
    for _ in 0..100 {
        let real = rng.random_range(2..12usize);
        let pad = rng.random_range(0..8usize);
        let ids: Vec<u32> = std::iter::once(2)
            .chain((1..real).map(|_| rng.random_range(5..40u32)))
            .collect();
        let mut seq = PackedSequence {
            token_ids: ids.iter().map(|&i| TokenId(i)).collect(),
            segment_ids: (0..real).map(|i| (i % 2) as u8).collect(),
            position_ids: (0..real as u32).collect(),
            attention_mask: vec![1; real],
            kind: SeqKind::Triple,
            label: None,
        };
        seq.pad_to(real + pad);
        let out = &forward_eval(&params, &cfg, std::slice::from_ref(&seq)).unwrap()[0];
        for layer in 0..cfg.num_layers {
            for head_row in out.cls_attention(layer).unwrap() {
                let sum: f64 = head_row.iter().map(|&v| v as f64).sum();
                assert!(
                    (sum - 1.0).abs() < 1e-6,
                    "cls attention row sums to {sum}"
                );
                checked_rows += 1;
            }
            for head in &out.attention[layer] {
                for i in 0..head.rows() {
                    for j in real..real + pad {
                        assert_eq!(head.get(i, j), 0.0, "masked key got attention");
                    }
                }
            }
        }
    }
    println!(
        "criterion 8 PASS: {checked_rows} exported attention rows sum to 1 and pads stay at exactly zero"
    );
}

#[test]
fn criterion_9_determinism_across_runs_and_workers() {
    let (_dir, kg) = synth_kg();
    let kg = kg.subsample_training(0.04, 1).unwrap();
    let vocab = build_vocab(&kg, 600).unwrap();
    let text = TextIndex::build(&kg, &vocab);
    let packing = PackingConfig::default();

    let run_once = |workers: usize| {
        kgseq::par::with_workers(workers, || {
            let cfg = EncoderConfig {
                num_layers: 1,
                num_heads: 2,
                hidden_size: 32,
                ffn_size: 64,
                max_positions: 32,
                vocab_size: vocab.len(),
                dropout_rate: 0.1,
                seed: 33,
            };
            let mut model = Model::<f32>::new_triple(cfg).unwrap();
            let mut tc = TrainConfig::for_task(Task::TripleClassification);
            tc.epochs = 2;
            tc.learning_rate = 1e-3;
            let log = train(
                &mut model,
                &kg,
                &text,
                Task::TripleClassification,
                &packing,
                &tc,
            )
            .unwrap();
            let losses: Vec<u64> = log.iter().map(|e| e.mean_loss.to_bits()).collect();
            let scorer = ModelScorer::new(&model, &text, packing);
            let report =
                link_prediction_eval(&scorer, &kg, Split::Dev, &EvalOptions::default()).unwrap();
            (
                losses,
                report.mean_rank.to_bits(),
                report
                    .hits_at_k
                    .values()
                    .map(|v| v.to_bits())
                    .collect::<Vec<u64>>(),
            )
        })
    };

    let a = run_once(1);
    let b = run_once(1);
    assert_eq!(a, b, "same seed, same worker count");
    let c = run_once(3);
    assert_eq!(a, c, "results must not depend on worker count");
    println!("criterion 9 PASS: bit-identical loss logs and metrics across reruns and worker counts");
}
