//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//!     cargo test -p lemmata-cli --test acceptance
//!
//! Set `LEMMATA_UD_DIR` to a directory holding `tr_pud-ud-test.conllu` and
//! `cs_pud-ud-test.conllu` to also check the official corpus counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lemmata_cli::commands::{self, RunSummary};
use lemmata_cli::config::SystemConfig;
use lemmata_cli::Experiment;
use lemmata_core::corpus::{parse_conllu, parse_tsv};
use lemmata_core::eval::{exact_binomial_p, mcnemar_counts, sentence_accuracy, word_accuracy};
use lemmata_core::gateway::{ChatRequest, ChatTransport, TransportError};
use lemmata_core::prompt::render_prompt;
use lemmata_core::{
    align, induce, parse_output, AlignedPrediction, BaselineModel, Corpus, FewShotExample, InputMode, MissingPolicy,
    PromptSpec, Selection, Sentence, Template,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_corpora() -> Vec<Corpus> {
    let dir = fixtures().join("corpora");
    let read = |name: &str| fs::read_to_string(dir.join(name)).expect("fixture corpus");
    vec![
        parse_conllu(&read("es_synth.conllu"), "es_synth", "es").expect("es_synth"),
        parse_conllu(&read("en_synth.conllu"), "en_synth", "en").expect("en_synth"),
        parse_tsv(&read("eu_synth.tsv"), "eu_synth", "eu").expect("eu_synth"),
    ]
}

fn fixture_pairs() -> Vec<(String, String)> {
    fixture_corpora()
        .iter()
        .flat_map(|c| c.tokens().map(|t| (t.wordform.clone(), t.lemma.clone().expect("gold lemma"))).collect::<Vec<_>>())
        .collect()
}

// ---------------------------------------------------------------------------
// Edit scripts

const ALPHABETS: &[&str] = &[
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "áéíóúñüçàèß",
    "ÁÉÍÓÚÑÜÇ",
    "ΑαΒβΣσςΩω",
    "АБВабвёЁ",
    "日本語中文",
    "İıǅǈ",
    "\u{301}\u{308}",
    "👍🏽😀",
    "-.,'|\\\t",
];

fn random_string(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            let alphabet: Vec<char> = ALPHABETS.choose(rng).expect("alphabets").chars().collect();
            *alphabet.choose(rng).expect("non-empty alphabet")
        })
        .collect()
}

/// Either an unrelated string or `w` with edits at both ends and maybe a case change.
fn random_pair(rng: &mut ChaCha8Rng) -> (String, String) {
    let w = random_string(rng, 10);
    if rng.random_bool(0.5) {
        return (w, random_string(rng, 10));
    }
    let chars: Vec<char> = w.chars().collect();
    let cut_front = rng.random_range(0..=chars.len().min(2));
    let cut_back = rng.random_range(0..=(chars.len() - cut_front).min(3));
    let mut l: String = random_string(rng, 2);
    l.extend(&chars[cut_front..chars.len() - cut_back]);
    l.push_str(&random_string(rng, 3));
    if rng.random_bool(0.3) {
        let mut it = l.chars();
        if let Some(first) = it.next() {
            let rest: String = it.collect();
            l = first.to_uppercase().chain(rest.chars()).collect();
        }
    }
    (w, l)
}

fn edit_script_round_trip() -> Check {
    let start = Instant::now();
    let fixture = fixture_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random: Vec<(String, String)> = (0..10_000).map(|_| random_pair(&mut rng)).collect();
    for (w, l) in fixture.iter().chain(&random) {
        let script = induce(w, l);
        match script.apply(w) {
            Ok(out) if out == *l => {}
            other => return Err(format!("{w:?} -> {l:?}: script {script} gave {other:?}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(5) {
        return Err(format!("took {elapsed:.2?}, limit 5 s"));
    }
    Ok(format!(
        "{} fixture pairs + {} random Unicode pairs, all exact, {elapsed:.2?}",
        fixture.len(),
        random.len()
    ))
}

/// First-character case variants of `w` with their cost: itself at 0, the
/// distinct lowercased and uppercased forms at 1.
fn case_variants(w: &str) -> Vec<(Vec<char>, usize)> {
    let mut variants = vec![(w.chars().collect::<Vec<_>>(), 0)];
    let mut it = w.chars();
    if let Some(first) = it.next() {
        let rest: String = it.collect();
        for head in [first.to_lowercase().collect::<String>(), first.to_uppercase().collect()] {
            let v: Vec<char> = format!("{head}{rest}").chars().collect();
            if !variants.iter().any(|(x, _)| *x == v) {
                variants.push((v, 1));
            }
        }
    }
    variants
}

/// Cheapest script found by enumerating every (case, prefix delete, prefix
/// insert, suffix delete, suffix insert) combination that yields `l`.
fn exhaustive_min_cost(w: &str, l: &str) -> usize {
    let lc: Vec<char> = l.chars().collect();
    let m = lc.len();
    let mut best = usize::MAX;
    for (wc, case_cost) in case_variants(w) {
        let n = wc.len();
        for pd in 0..=n {
            for sd in 0..=n - pd {
                let kept = &wc[pd..n - sd];
                for pi in 0..=m {
                    for si in 0..=m - pi {
                        if pi + kept.len() + si != m {
                            continue;
                        }
                        if lc[pi..m - si] == *kept {
                            best = best.min(case_cost + pd + sd + pi + si);
                        }
                    }
                }
            }
        }
    }
    best
}

fn edit_script_minimality() -> Check {
    let pairs: BTreeSet<(String, String)> = fixture_pairs()
        .into_iter()
        .filter(|(w, l)| w.chars().count() <= 12 && l.chars().count() <= 12)
        .collect();
    for (w, l) in &pairs {
        let script = induce(w, l);
        let oracle = exhaustive_min_cost(w, l);
        if script.cost() != oracle {
            return Err(format!("{w:?} -> {l:?}: induced {script} costs {}, oracle {oracle}", script.cost()));
        }
    }
    Ok(format!("{} distinct fixture pairs match the exhaustive oracle", pairs.len()))
}

// ---------------------------------------------------------------------------
// Alignment

fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != cb)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Distinct but recognizably the same word: case-only difference or one edit.
fn near(a: &str, b: &str) -> bool {
    a != b
        && (a.to_lowercase() == b.to_lowercase()
            || levenshtein(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>()) == 1)
}

/// A near-variant of token `i` that is neither equal nor near to any other token.
fn mutate(sentence: &Sentence, i: usize) -> Option<String> {
    let form = &sentence.tokens[i].wordform;
    let mut candidates = Vec::new();
    let mut it = form.chars();
    if let Some(first) = it.next() {
        let rest: String = it.collect();
        let toggled: String = if first.is_uppercase() {
            first.to_lowercase().chain(rest.chars()).collect()
        } else {
            first.to_uppercase().chain(rest.chars()).collect()
        };
        candidates.push(toggled);
    }
    candidates.push(format!("{form}~"));
    candidates.push(format!("~{form}"));
    candidates.into_iter().find(|c| {
        near(c, form)
            && sentence
                .tokens
                .iter()
                .enumerate()
                .all(|(j, t)| j == i || (*c != t.wordform && !near(c, &t.wordform)))
    })
}

struct Perturbed {
    output: String,
    deleted: usize,
    mutated: usize,
    inserted: usize,
}

fn perturb(sentence: &Sentence, rng: &mut ChaCha8Rng, trial: usize) -> Perturbed {
    let n = sentence.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let deletions = rng.random_range(0..=3.min(n - 1));
    let deleted: BTreeSet<usize> = order[..deletions].iter().copied().collect();
    let want_mutations = rng.random_range(0..=3);
    let mut mutated: BTreeMap<usize, String> = BTreeMap::new();
    for &i in &order[deletions..] {
        if mutated.len() == want_mutations {
            break;
        }
        if let Some(m) = mutate(sentence, i) {
            mutated.insert(i, m);
        }
    }
    let mut lines: Vec<String> = Vec::new();
    for (i, t) in sentence.tokens.iter().enumerate() {
        if deleted.contains(&i) {
            continue;
        }
        let form = mutated.get(&i).unwrap_or(&t.wordform);
        lines.push(format!("{form}\t{}", t.lemma.as_deref().unwrap_or_default()));
    }
    let inserted = rng.random_range(0..=3);
    for k in 0..inserted {
        let line = if rng.random_bool(0.5) {
            "Note: the lemmas follow the requested format.".to_string()
        } else {
            format!("qzv{trial}x{k}\tqzv{trial}x{k}")
        };
        let at = rng.random_range(0..=lines.len());
        lines.insert(at, line);
    }
    Perturbed {
        output: lines.join("\n"),
        deleted: deleted.len(),
        mutated: mutated.len(),
        inserted,
    }
}

fn alignment_taxonomy() -> Check {
    let corpora = fixture_corpora();
    let pool: Vec<&Sentence> = corpora.iter().flat_map(|c| &c.sentences).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut totals = (0, 0, 0);
    for trial in 0..1000 {
        let sentence = *pool.choose(&mut rng).expect("pool");
        let p = perturb(sentence, &mut rng, trial);
        let got = align(&parse_output(&p.output), sentence).counts;
        let want = (p.deleted, p.mutated, p.inserted);
        if (got.missing_words, got.wrong_words, got.random_outputs) != want {
            return Err(format!(
                "trial {trial} ({}): expected (missing, wrong, random) = {want:?}, got ({}, {}, {})\n{}",
                sentence.id, got.missing_words, got.wrong_words, got.random_outputs, p.output
            ));
        }
        totals.0 += want.0;
        totals.1 += want.1;
        totals.2 += want.2;
    }
    Ok(format!(
        "1000 perturbed outputs exact ({} deletions, {} mutations, {} insertions in total)",
        totals.0, totals.1, totals.2
    ))
}

// ---------------------------------------------------------------------------
// Metrics

fn metrics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let vocab = ["casa", "perro", "ir", "el", "ser", "."];
    for fixture in 0..100 {
        let mut gold = Corpus::new(format!("fx{fixture}"), "xx");
        let mut preds = Vec::new();
        let (mut correct, mut missing, mut total, mut good_sentences) = (0usize, 0usize, 0usize, 0usize);
        let sentences = rng.random_range(1..=8);
        for s in 0..sentences {
            let len = rng.random_range(1..=10);
            let pairs: Vec<(String, String)> = (0..len)
                .map(|k| (format!("w{k}"), vocab.choose(&mut rng).expect("vocab").to_string()))
                .collect();
            let sentence = Sentence::from_pairs(format!("fx{fixture}:{s}"), pairs);
            let mut lemmas = Vec::new();
            let mut all_good = true;
            for t in &sentence.tokens {
                let gold_lemma = t.lemma.clone().expect("gold");
                total += 1;
                let r: f64 = rng.random();
                let lemma = if r < 0.1 {
                    missing += 1;
                    all_good = false;
                    None
                } else if r < 0.85 || sentences == 1 && r < 0.95 {
                    correct += 1;
                    Some(gold_lemma)
                } else {
                    all_good = false;
                    Some(format!("{gold_lemma}x"))
                };
                lemmas.push(lemma);
            }
            good_sentences += usize::from(all_good);
            preds.push(AlignedPrediction {
                sentence_id: sentence.id.clone(),
                pairs: lemmas,
                counts: Default::default(),
            });
            gold.sentences.push(sentence);
        }
        let strict = correct as f64 / total as f64;
        let renorm = if total == missing { 0.0 } else { correct as f64 / (total - missing) as f64 };
        let sent = good_sentences as f64 / sentences as f64;
        let got = (
            word_accuracy(&preds, &gold, MissingPolicy::Strict).map_err(|e| e.to_string())?,
            word_accuracy(&preds, &gold, MissingPolicy::Renormalize).map_err(|e| e.to_string())?,
            sentence_accuracy(&preds, &gold).map_err(|e| e.to_string())?,
        );
        if got != (strict, renorm, sent) {
            return Err(format!("fixture {fixture}: got {got:?}, brute force {:?}", (strict, renorm, sent)));
        }
    }
    Ok("100 random fixtures, strict/renormalized WAcc and SentAcc agree exactly".into())
}

// ---------------------------------------------------------------------------
// McNemar

/// Two-sided binomial p-value by integer enumeration.
fn binomial_enumeration(b01: u64, b10: u64) -> f64 {
    let n = b01 + b10;
    let k = b01.min(b10);
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let tail: u128 = row[..=k as usize].iter().sum();
    let p = 2.0 * tail as f64 / (1u128 << n) as f64;
    p.min(1.0)
}

fn mcnemar_correctness() -> Check {
    let mut worst = 0f64;
    let mut cases = 0;
    for n in 0..=50u64 {
        for b01 in 0..=n {
            let b10 = n - b01;
            let p = exact_binomial_p(b01, b10);
            let oracle = binomial_enumeration(b01, b10);
            let diff = (p - oracle).abs();
            worst = worst.max(diff);
            if diff > 1e-9 {
                return Err(format!("({b01}, {b10}): {p} vs enumeration {oracle}"));
            }
            if p != exact_binomial_p(b10, b01) {
                return Err(format!("exact p not symmetric at ({b01}, {b10})"));
            }
            let (a, b) = (mcnemar_counts(b01, b10, 0.05), mcnemar_counts(b10, b01, 0.05));
            if a.p_value != b.p_value || a.significant != b.significant {
                return Err(format!("test not symmetric at ({b01}, {b10})"));
            }
            if b01 == b10 && a.p_value != 1.0 {
                return Err(format!("b01 == b10 == {b01} gives p = {}", a.p_value));
            }
            cases += 1;
        }
    }
    for (b01, b10) in [(0, 0), (30, 30), (100, 100)] {
        let r = mcnemar_counts(b01, b10, 0.05);
        if r.p_value != 1.0 || r.significant {
            return Err(format!("({b01}, {b10}) should give p = 1, got {}", r.p_value));
        }
    }
    Ok(format!("{cases} (b01, b10) cases with b01+b10 <= 50, max |diff| {worst:.1e}; symmetric; p = 1 when b01 == b10"))
}

// ---------------------------------------------------------------------------
// Prompts

fn golden(name: &str) -> String {
    fs::read_to_string(fixtures().join("prompts").join(name)).expect("golden prompt")
}

fn words(text: &str) -> Vec<(String, String)> {
    text.split_whitespace().map(|w| (w.to_string(), w.to_string())).collect()
}

fn prompt_fidelity() -> Check {
    let golden_gate = Sentence::from_pairs(
        "gg",
        words("El Parque Golden Gate ofrece un jardín botánico , un planetario , y un jardín japonés ."),
    );
    let basic = PromptSpec {
        template: Template::Basic,
        input_mode: InputMode::SentenceString,
        k: 0,
        selection: Selection::MostErrors,
        language_name: "Spanish".into(),
    };
    let full = PromptSpec {
        template: Template::Full,
        ..basic.clone()
    };
    let example_words = "Tina Anselmi se ocupó sobre todo de los derechos de los trabajadores textiles y los profesores .";
    let example_lemmas = "Tina Anselmi el ocupar sobre todo de el derecho de el trabajador textil y el profesor .";
    let example = Sentence::from_pairs(
        "tina",
        example_words.split_whitespace().zip(example_lemmas.split_whitespace()),
    );
    let venice = Sentence::from_pairs(
        "venecia",
        words(
            "El festival de Venecia cerró hoy con la entrega de los premios que coronaron a el realizador \
             Alexander Sokurov y a el actor Michael Fassbender .",
        ),
    );
    let one_shot = PromptSpec {
        input_mode: InputMode::WordList,
        k: 1,
        ..basic.clone()
    };
    let shots = vec![FewShotExample::from_sentence(&example).map_err(|e| e.to_string())?];
    let cases = [
        ("basic_0shot_sentence_es.txt", render_prompt(&basic, &[], &golden_gate)),
        ("full_0shot_sentence_es.txt", render_prompt(&full, &[], &golden_gate)),
        ("basic_1shot_wordlist_es.txt", render_prompt(&one_shot, &shots, &venice)),
    ];
    for (name, rendered) in cases {
        let rendered = rendered.map_err(|e| format!("{name}: {e}"))?;
        let expected = golden(name);
        if rendered != expected {
            let at = rendered
                .bytes()
                .zip(expected.bytes())
                .position(|(a, b)| a != b)
                .unwrap_or(rendered.len().min(expected.len()));
            return Err(format!("{name}: first difference at byte {at}"));
        }
    }
    let full_text = render_prompt(&full, &[], &golden_gate).map_err(|e| e.to_string())?;
    if !full_text.contains("2. **Process Every Word**: Lemmatize **each word** in the sentence.") {
        return Err("full prompt lacks instruction 2".into());
    }
    Ok("basic 0-shot, full 0-shot and basic 1-shot word-list prompts byte-equal their goldens".into())
}

// ---------------------------------------------------------------------------
// Corpus statistics

fn pinned_stats() -> Vec<(String, usize, usize, String)> {
    fs::read_to_string(fixtures().join("corpora/stats.tsv"))
        .expect("pinned stats")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].parse().expect("tokens"), f[2].parse().expect("sentences"), f[3].to_string())
        })
        .collect()
}

fn official_counts() -> Result<Option<String>, String> {
    let Ok(dir) = std::env::var("LEMMATA_UD_DIR") else {
        return Ok(None);
    };
    let dir = PathBuf::from(dir);
    let mut seen = Vec::new();
    for (file, name, tokens, sentences) in [
        ("tr_pud-ud-test.conllu", "tr_pud", 1795, 100),
        ("cs_pud-ud-test.conllu", "cs_pud", 1930, 100),
    ] {
        let path = dir.join(file);
        let corpus = lemmata_core::corpus::ingest_conllu(&path, name, &name[..2]).map_err(|e| e.to_string())?;
        let s = corpus.stats();
        if (s.tokens, s.sentences) != (tokens, sentences) {
            return Err(format!("{name}: {} tokens / {} sentences, expected {tokens}/{sentences}", s.tokens, s.sentences));
        }
        seen.push(format!("{name} {tokens}/{sentences}"));
    }
    Ok(Some(seen.join(", ")))
}

fn corpus_statistics() -> Check {
    let mut exp = Experiment::load(&fixtures().join("experiments/corpus_stats.toml")).map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    exp.config.output_dir = out.path().to_path_buf();
    let summaries = commands::cmd_ingest(&exp).map_err(|e| format!("{e:#}"))?;
    let got: Vec<(String, usize, usize, String)> = summaries
        .iter()
        .map(|s| (s.name.clone(), s.eval_tokens, s.eval_sentences, s.reduction.clone()))
        .collect();
    let pinned = pinned_stats();
    if got != pinned {
        return Err(format!("ingested {got:?}, pinned {pinned:?}"));
    }
    let table = fs::read_to_string(out.path().join("stats.tsv")).map_err(|e| e.to_string())?;
    if !table.contains("es_synth_r100\tes\t1003\t100\t1003\t100\t100 first-n") {
        return Err("stats.tsv does not record the reduction rule".into());
    }
    let live = match official_counts()? {
        Some(s) => format!("; official: {s}"),
        None => "; official UD files not provided (LEMMATA_UD_DIR unset)".into(),
    };
    Ok(format!("{} pinned rows reproduced exactly{live}", pinned.len()))
}

// ---------------------------------------------------------------------------
// Replay

/// Counts calls and refuses all of them.
struct CountingTransport(AtomicUsize);

impl ChatTransport for CountingTransport {
    fn send(&self, _: &lemmata_core::ProviderConfig, _: &ChatRequest<'_>) -> Result<String, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Network("network access in a replay test".into()))
    }
}

fn replay_once(dir: &std::path::Path) -> Result<(RunSummary, commands::ScoreSummary, usize), String> {
    let mut exp = Experiment::load(&fixtures().join("experiments/replay.toml")).map_err(|e| e.to_string())?;
    exp.config.output_dir = dir.to_path_buf();
    let transport = Arc::new(CountingTransport(AtomicUsize::new(0)));
    let run = commands::cmd_run_with(&exp, transport.clone()).map_err(|e| format!("{e:#}"))?;
    let score = commands::cmd_score(&exp).map_err(|e| format!("{e:#}"))?;
    Ok((run, score, transport.0.load(Ordering::SeqCst)))
}

fn replay_determinism() -> Check {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let (run_a, score_a, calls_a) = replay_once(a.path())?;
    let (run_b, score_b, calls_b) = replay_once(b.path())?;
    let elapsed = start.elapsed();
    if calls_a + calls_b + run_a.live_calls + run_b.live_calls != 0 {
        return Err(format!("network calls attempted: {calls_a} + {calls_b}"));
    }
    if run_a.failures + run_b.failures != 0 {
        return Err(format!("{} sentences missed the cache", run_a.failures + run_b.failures));
    }
    if score_a.reports != score_b.reports || score_a.comparisons != score_b.comparisons {
        return Err("EvalReports differ between invocations".into());
    }
    for rel in ["scores/scores.json", "scores/report.tsv", "scores/mcnemar.tsv", "scores/table.txt"] {
        let x = fs::read(a.path().join(rel)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join(rel)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{rel} differs between invocations"));
        }
    }
    for (pa, pb) in run_a.files.iter().zip(&run_b.files) {
        let x = fs::read(pa).map_err(|e| e.to_string())?;
        let y = fs::read(pb).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs between invocations", pa.display()));
        }
    }
    let llm = score_a
        .reports
        .iter()
        .find(|r| r.system_id == "sim-chat")
        .ok_or("no LLM report")?;
    let runs = llm.per_run.len();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.2?}, limit 60 s"));
    }
    Ok(format!(
        "2 invocations x ({} prediction files, {} reports), {runs} LLM runs, 0 network calls, byte-identical, {elapsed:.2?}",
        run_a.files.len(),
        score_a.reports.len()
    ))
}

// ---------------------------------------------------------------------------
// Baseline

fn baseline_sanity() -> Check {
    let exp = Experiment::load(&fixtures().join("experiments/baseline.toml")).map_err(|e| e.to_string())?;
    let Some(SystemConfig::Baseline(system)) = exp.config.systems.first() else {
        return Err("baseline.toml has no baseline system".into());
    };
    let mut rows = Vec::new();
    for p in commands::prepare_all(&exp).map_err(|e| format!("{e:#}"))? {
        let inventory = lemmata_core::editscript::build_inventory(&p.splits.train).map_err(|e| e.to_string())?;
        let model = BaselineModel::train(&p.splits.train, &inventory, system.max_suffix_len).map_err(|e| e.to_string())?;
        let dev = &p.splits.dev;
        let mut baseline = Vec::new();
        let mut identity = Vec::new();
        for split in [&p.splits.dev, &p.splits.test, &p.splits.train] {
            for s in &split.sentences {
                if model.predict(s).len() != s.len() {
                    return Err(format!("{}: output length differs from input length", s.id));
                }
            }
        }
        for s in &dev.sentences {
            baseline.push(AlignedPrediction::from_lemmas(s.id.clone(), model.predict(s)));
            identity.push(AlignedPrediction::from_lemmas(s.id.clone(), s.wordforms().map(str::to_string).collect()));
        }
        let b = word_accuracy(&baseline, dev, MissingPolicy::Strict).map_err(|e| e.to_string())?;
        let i = word_accuracy(&identity, dev, MissingPolicy::Strict).map_err(|e| e.to_string())?;
        if b < i {
            return Err(format!("{}: baseline dev WAcc {b:.4} below identity {i:.4}", p.config.name));
        }
        rows.push(format!("{} {b:.3} >= {i:.3}", p.config.name));
    }
    Ok(format!("dev WAcc baseline vs identity: {}; lengths preserved", rows.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("edit-script round trip", edit_script_round_trip),
        ("edit-script minimality", edit_script_minimality),
        ("alignment taxonomy oracle", alignment_taxonomy),
        ("metrics oracle", metrics_oracle),
        ("McNemar correctness", mcnemar_correctness),
        ("prompt fidelity", prompt_fidelity),
        ("corpus statistics", corpus_statistics),
        ("replay determinism", replay_determinism),
        ("baseline sanity", baseline_sanity),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("\n{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
