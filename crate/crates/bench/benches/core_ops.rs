use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lemmata_core::baseline::BaselineModel;
use lemmata_core::corpus::parse_conllu;
use lemmata_core::editscript::{build_inventory, induce};
use lemmata_core::eval::mcnemar;
use lemmata_core::prompt::render_prompt;
use lemmata_core::{align, parse_output, Corpus, FewShotExample, PromptSpec};

fn corpus() -> Corpus {
    let text = include_str!("../../../fixtures/corpora/es_synth.conllu");
    parse_conllu(text, "es_synth", "es").expect("fixture parses")
}

fn bench_editscripts(c: &mut Criterion) {
    let corpus = corpus();
    let pairs: Vec<(String, String)> = corpus
        .tokens()
        .map(|t| (t.wordform.clone(), t.lemma.clone().unwrap_or_default()))
        .collect();
    c.bench_function("induce/corpus", |b| {
        b.iter(|| {
            for (form, lemma) in &pairs {
                black_box(induce(form, lemma));
            }
        })
    });
    c.bench_function("build_inventory/corpus", |b| b.iter(|| build_inventory(black_box(&corpus)).unwrap()));
    let inventory = build_inventory(&corpus).unwrap();
    let model = BaselineModel::train(&corpus, &inventory, 4).unwrap();
    c.bench_function("baseline/predict_corpus", |b| {
        b.iter(|| {
            for s in &corpus.sentences {
                black_box(model.predict(s));
            }
        })
    });
}

fn bench_alignment(c: &mut Criterion) {
    let corpus = corpus();
    let outputs: Vec<String> = corpus
        .sentences
        .iter()
        .map(|s| {
            let rows: Vec<String> = s
                .tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 7 != 3)
                .map(|(_, t)| format!("\"{}\"\t{}", t.wordform.to_lowercase(), t.lemma.as_deref().unwrap_or("")))
                .collect();
            format!("Here is the output:\n```\n{}\n```", rows.join("\n"))
        })
        .collect();
    c.bench_function("align/corpus", |b| {
        b.iter(|| {
            for (raw, s) in outputs.iter().zip(&corpus.sentences) {
                black_box(align(&parse_output(raw), s));
            }
        })
    });
}

fn bench_prompts(c: &mut Criterion) {
    let corpus = corpus();
    let spec = PromptSpec::default_for("Spanish");
    let examples: Vec<FewShotExample> = corpus.sentences[..4]
        .iter()
        .map(|s| FewShotExample::from_sentence(s).unwrap())
        .collect();
    c.bench_function("render_prompt/corpus", |b| {
        b.iter(|| {
            for s in &corpus.sentences {
                black_box(render_prompt(&spec, &examples, s).unwrap());
            }
        })
    });
}

fn bench_mcnemar(c: &mut Criterion) {
    let a: Vec<bool> = (0..20_000).map(|i| i % 11 != 0).collect();
    let b: Vec<bool> = (0..20_000).map(|i| i % 13 != 0).collect();
    c.bench_function("mcnemar/20k_tokens", |bench| bench.iter(|| mcnemar(black_box(&a), black_box(&b), 0.05).unwrap()));
    let small_a = &a[..200];
    let small_b: Vec<bool> = (0..200).map(|i| i % 40 != 0).collect();
    c.bench_function("mcnemar/exact_200", |bench| {
        bench.iter(|| mcnemar(black_box(small_a), black_box(&small_b), 0.05).unwrap())
    });
}

criterion_group!(benches, bench_editscripts, bench_alignment, bench_prompts, bench_mcnemar);
criterion_main!(benches);
