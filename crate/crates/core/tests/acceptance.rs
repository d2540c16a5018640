//! Exit-gate checks. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::time::{Duration, Instant};

use actionable::dataset::{build_dataset, split, LabeledExample, SplitRatios};
use actionable::dense::{backward, bce_loss, forward_with_mask, DenseHead, TrainConfig};
use actionable::embedding::{BackendConfig, EmbeddingClient};
use actionable::filters::{apply_filters_to_tokens, FilterConfig, FilterStage, FilterVerdict, Lexicon};
use actionable::forest::ForestParams;
use actionable::ingest::{load_corpus, CorpusFormat, CorpusSpec};
use actionable::metrics::{confusion, emit_report, metrics, ConfusionMatrix, HISTORY_FILE};
use actionable::model::SavedModel;
use actionable::pipeline::{evaluate, train_dense_model, train_forest_model};
use actionable::segment::{tokenize, Token};
use actionable::synth::write_synthetic_maildir;
use actionable::tfidf::TfidfModel;
use actionable::{DatasetRecord, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Filter truth table

#[derive(Clone, Copy, Debug)]
enum Pronoun {
    Subject,
    Object,
    Missing,
}

fn grid_tokens(verb: bool, length: usize, pronoun: Pronoun, negation: bool) -> Vec<Token> {
    // Filler first so the imperative escape never applies.
    let mut words = vec!["zorb"];
    if verb {
        words.push("build");
    }
    match pronoun {
        Pronoun::Subject => words.push("you"),
        Pronoun::Object => words.push("me"),
        Pronoun::Missing => {}
    }
    if negation {
        words.push("not");
    }
    while words.len() < length {
        words.push("quux");
    }
    words.truncate(length);
    words.into_iter().map(Token::new).collect()
}

/// Written from the cascade description alone: first failing stage wins.
fn oracle(verb: bool, length: usize, pronoun: Pronoun, negation: bool) -> Option<FilterStage> {
    let length_passes = (3..=25).contains(&length) && 1.0 / length as f64 >= 0.04;
    if !verb {
        Some(FilterStage::ActionVerb)
    } else if !length_passes {
        Some(FilterStage::Length)
    } else if matches!(pronoun, Pronoun::Missing) {
        Some(FilterStage::Pronoun)
    } else if negation {
        Some(FilterStage::Negation)
    } else {
        None
    }
}

fn filter_truth_table() -> Outcome {
    let start = Instant::now();
    let cfg = FilterConfig::default();
    let mut cases = 0;
    let mut disagreements = Vec::new();
    for verb in [true, false] {
        for length in [2usize, 6, 30] {
            for pronoun in [Pronoun::Subject, Pronoun::Object, Pronoun::Missing] {
                for negation in [true, false] {
                    cases += 1;
                    let tokens = grid_tokens(verb, length, pronoun, negation);
                    let verdict = apply_filters_to_tokens(&tokens, &cfg);
                    let expected = oracle(verb, length, pronoun, negation);
                    if verdict.rejected_by != expected || verdict.passed != expected.is_none() {
                        disagreements.push(format!("{verb}/{length}/{pronoun:?}/{negation}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        cases == 36 && disagreements.is_empty() && elapsed < Duration::from_secs(1),
        format!("{cases} cases, disagreements {disagreements:?}, {elapsed:?}"),
    )
}

fn worked_examples() -> Outcome {
    let cfg = FilterConfig::default();
    let get_in_lexicon = cfg.lexicon.action_verbs.contains("get");
    let homework = apply_filters_to_tokens(&tokenize("Get your homework finished by tomorrow"), &cfg);
    let guitar = apply_filters_to_tokens(&tokenize("I like to play the guitar"), &cfg);
    check(
        get_in_lexicon && homework.passed && guitar.rejected_by == Some(FilterStage::ActionVerb),
        format!(
            "homework passed={} guitar rejected_by={:?}",
            homework.passed, guitar.rejected_by
        ),
    )
}

// ---------------------------------------------------------------------------
// TF-IDF against a brute-force reference

fn brute_force_tfidf(corpus: &[Vec<String>], doc: &[String]) -> Vec<(String, f64)> {
    let mut terms: Vec<String> = corpus.iter().flatten().cloned().collect();
    terms.sort();
    terms.dedup();
    let n = corpus.len() as f64;
    let mut weights: Vec<(String, f64)> = terms
        .iter()
        .map(|term| {
            let df = corpus.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            (term.clone(), tf * idf)
        })
        .collect();
    let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut weights {
            *w /= norm;
        }
    }
    weights
}

fn tfidf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n_terms = rng.gen_range(1..=10);
        let vocab: Vec<String> = (0..n_terms).map(|i| format!("t{i}")).collect();
        let n_docs = rng.gen_range(1..=5);
        let corpus: Vec<Vec<String>> = (0..n_docs)
            .map(|_| {
                let len = rng.gen_range(1..=8);
                (0..len).map(|_| vocab[rng.gen_range(0..n_terms)].clone()).collect()
            })
            .collect();
        let model = TfidfModel::<f64>::fit(&corpus).map_err(|e| e.to_string())?;
        let mut queries = corpus.clone();
        queries.push(vec!["unseen".into(), vocab[0].clone()]);
        for doc in &queries {
            let row = model.transform(doc);
            for (term, expected) in brute_force_tfidf(&corpus, doc) {
                let got = model.vocabulary.get(&term).map_or(0.0, |&i| row.get(i));
                worst = worst.max((got - expected).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max abs error {worst:e} over 100 trials, {elapsed:?}"),
    )
}

// ---------------------------------------------------------------------------
// Gradient check

fn batch_loss(head: &DenseHead<f64>, batch: &[(&[f64], u8)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| bce_loss(forward_with_mask(x, head, None).unwrap().probability, *y))
        .sum::<f64>()
        / batch.len() as f64
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut head = DenseHead::<f64>::glorot(16, &mut rng);
    for b in head.b1.iter_mut() {
        *b = rng.gen_range(-0.1..0.1);
    }
    head.b2 = 0.05;
    let xs: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let batch: Vec<(&[f64], u8)> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| (x.as_slice(), (i % 2) as u8))
        .collect();
    let grads = backward(&batch, &head, None).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let n_w1 = head.w1.len();
    let n_b1 = head.b1.len();
    let n_w2 = head.w2.len();
    let total = n_w1 + n_b1 + n_w2 + 1;
    let coords = 150;
    for _ in 0..coords {
        let c = rng.gen_range(0..total);
        let (analytic, slot): (f64, Box<dyn Fn(&mut DenseHead<f64>) -> &mut f64>) = if c < n_w1 {
            (grads.w1[c], Box::new(move |m| &mut m.w1[c]))
        } else if c < n_w1 + n_b1 {
            let k = c - n_w1;
            (grads.b1[k], Box::new(move |m| &mut m.b1[k]))
        } else if c < n_w1 + n_b1 + n_w2 {
            let k = c - n_w1 - n_b1;
            (grads.w2[k], Box::new(move |m| &mut m.w2[k]))
        } else {
            (grads.b2, Box::new(|m| &mut m.b2))
        };
        let mut plus = head.clone();
        *slot(&mut plus) += h;
        let mut minus = head.clone();
        *slot(&mut minus) -= h;
        let numeric = (batch_loss(&plus, &batch) - batch_loss(&minus, &batch)) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:e} over {coords} coordinates, {elapsed:?}"),
    )
}

// ---------------------------------------------------------------------------
// Split contract

fn split_contract() -> Outcome {
    let examples: Vec<LabeledExample> = (0..1000)
        .map(|i| {
            let label = u8::from(i % 7 < 3);
            LabeledExample {
                text: format!("s{i}"),
                label,
                origin: format!("m{i}#0"),
                trace: FilterVerdict {
                    passed: label == 1,
                    rejected_by: (label == 0).then_some(FilterStage::ActionVerb),
                    matched_verbs: vec![],
                    pronoun_signal: Default::default(),
                },
            }
        })
        .collect();
    let global_pos = examples.iter().filter(|e| e.label == 1).count() as f64 / 1000.0;
    let ratios = SplitRatios::new(0.72, 0.08, 0.20).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let mut sizes = Vec::new();
    for seed in [1u64, 42, 7777] {
        let a = split(&examples, ratios, seed).map_err(|e| e.to_string())?;
        let b = split(&examples, ratios, seed).map_err(|e| e.to_string())?;
        if a != b {
            problems.push(format!("seed {seed} not reproducible"));
        }
        for (which, target) in [(Split::Train, 720usize), (Split::Val, 80), (Split::Test, 200)] {
            let members: Vec<usize> = (0..1000).filter(|&i| a[i] == which).collect();
            let pos = members.iter().filter(|&&i| examples[i].label == 1).count();
            let fraction = pos as f64 / members.len() as f64;
            if members.len().abs_diff(target) > 1 {
                problems.push(format!("seed {seed} {which} size {}", members.len()));
            }
            if (fraction - global_pos).abs() > 0.02 {
                problems.push(format!("seed {seed} {which} positive fraction {fraction:.4}"));
            }
            sizes.push(members.len());
        }
    }
    check(
        problems.is_empty(),
        format!("sizes {sizes:?}, problems {problems:?}"),
    )
}

// ---------------------------------------------------------------------------
// Desk-scale end to end

struct DeskCorpus {
    _dir: tempfile::TempDir,
    records: Vec<DatasetRecord>,
    prep_time: Duration,
}

fn desk_corpus() -> Result<DeskCorpus, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_synthetic_maildir(dir.path(), 500, 42).map_err(|e| e.to_string())?;
    let corpus = load_corpus(&CorpusSpec::new(dir.path(), CorpusFormat::MaildirTree))
        .map_err(|e| e.to_string())?;
    let cfg = FilterConfig::with_lexicon(Lexicon::default());
    let (mut dataset, _) = build_dataset(&corpus, &cfg, 1.0, 42).map_err(|e| e.to_string())?;
    dataset
        .assign_splits(SplitRatios::default(), 42)
        .map_err(|e| e.to_string())?;
    Ok(DeskCorpus {
        _dir: dir,
        records: dataset.records(),
        prep_time: start.elapsed(),
    })
}

fn dense_end_to_end(desk: &DeskCorpus) -> Outcome {
    let start = Instant::now();
    let client = EmbeddingClient::new(BackendConfig::stub(512)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        seed: 42,
        ..TrainConfig::default()
    };
    let (head, history) =
        train_dense_model(&desk.records, &client, &cfg).map_err(|e| e.to_string())?;
    let model = SavedModel::Dense(head);
    let report = evaluate(
        &model,
        &desk.records,
        Split::Test,
        &Split::ALL,
        Some(&client),
    )
    .map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_report(&report, Some(&history), out.path()).map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(out.path().join(HISTORY_FILE)).map_err(|e| e.to_string())?;
    let rows = csv.lines().count() - 1;
    let first = history.epochs.first().map_or(f64::NAN, |r| r.train_loss);
    let last = history.epochs.last().map_or(f64::NAN, |r| r.train_loss);
    let elapsed = start.elapsed() + desk.prep_time;
    let test_acc = report.accuracy.test.unwrap_or(0.0);
    check(
        test_acc >= 0.85
            && report.f1 >= 0.85
            && rows == 10
            && last <= first
            && elapsed < Duration::from_secs(60),
        format!(
            "{} examples, test accuracy {test_acc:.4}, f1 {:.4}, history rows {rows}, \
             train loss {first:.4} -> {last:.4}, {elapsed:?}",
            desk.records.len(),
            report.f1
        ),
    )
}

fn forest_baseline(desk: &DeskCorpus) -> Outcome {
    let start = Instant::now();
    let params = ForestParams::default();
    let a = train_forest_model(&desk.records, &params, 42).map_err(|e| e.to_string())?;
    let b = train_forest_model(&desk.records, &params, 42).map_err(|e| e.to_string())?;
    let (a, b) = (SavedModel::Forest(a), SavedModel::Forest(b));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    a.save(dir.path().join("a.json")).map_err(|e| e.to_string())?;
    b.save(dir.path().join("b.json")).map_err(|e| e.to_string())?;
    let identical = std::fs::read(dir.path().join("a.json")).map_err(|e| e.to_string())?
        == std::fs::read(dir.path().join("b.json")).map_err(|e| e.to_string())?;
    let report =
        evaluate(&a, &desk.records, Split::Test, &Split::ALL, None).map_err(|e| e.to_string())?;
    let test_acc = report.accuracy.test.unwrap_or(0.0);
    check(
        test_acc >= 0.85 && identical,
        format!(
            "test accuracy {test_acc:.4}, f1 {:.4}, identical model files {identical}, {:?}",
            report.f1,
            start.elapsed()
        ),
    )
}

// ---------------------------------------------------------------------------
// Metrics identities

fn metrics_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let cm = ConfusionMatrix::new(
            rng.gen_range(0..500),
            rng.gen_range(0..500),
            rng.gen_range(0..500),
            rng.gen_range(1..500),
        );
        let m = metrics::<f64>(&cm);
        let (tp, fp, tn, fneg) = (
            cm.true_pos as f64,
            cm.false_pos as f64,
            cm.true_neg as f64,
            cm.false_neg as f64,
        );
        let accuracy = (tp + tn) / (tp + fp + tn + fneg);
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = tp / (tp + fneg);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        if (m.accuracy, m.precision, m.recall, m.f1) != (accuracy, precision, recall, f1) {
            mismatches += 1;
        }
    }
    let preds: Vec<u8> = [vec![1; 906], vec![0; 94], vec![1; 119], vec![0; 881]].concat();
    let truth: Vec<u8> = [vec![1; 1000], vec![0; 1000]].concat();
    let constructed = confusion(&preds, &truth).map_err(|e| e.to_string())?;
    let m = metrics::<f64>(&constructed);
    check(
        mismatches == 0
            && constructed == ConfusionMatrix::new(906, 119, 881, 94)
            && (m.precision - 0.884).abs() <= 0.001
            && (m.recall - 0.906).abs() <= 0.001,
        format!(
            "{mismatches} mismatches in 1000, precision {:.4}, recall {:.4}",
            m.precision, m.recall
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("filter truth table (36 cases)", filter_truth_table()),
        ("worked homework and guitar examples", worked_examples()),
        ("tf-idf brute-force oracle", tfidf_oracle()),
        ("dense head gradient check", gradient_check()),
        ("stratified split contract", split_contract()),
    ];
    match desk_corpus() {
        Ok(desk) => {
            results.push(("desk-scale dense head end to end", dense_end_to_end(&desk)));
            results.push(("desk-scale forest baseline", forest_baseline(&desk)));
        }
        Err(e) => {
            results.push(("desk-scale dense head end to end", Err(e.clone())));
            results.push(("desk-scale forest baseline", Err(e)));
        }
    }
    results.push(("metrics identities", metrics_identities()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
