//! Acceptance checks. Runs as a plain binary so every criterion prints its
//! own PASS/FAIL line; exits non-zero if any fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use condor::augment::{
    augment_dataset, compute_hunks, generate_intermediates, normalize_for_dedup, split_lines, Hunk,
};
use condor::corpus::{load_triples, CodeSample, CorpusStats, RepairTriple, Verdict};
use condor::evalrank::{classification_metrics, pass_at_1, rank_candidates, ConfusionMatrix};
use condor::model::{load_checkpoint, save_checkpoint};
use condor::pairing::{build_triples, mine_pairs};
use condor::synthetic;
use condor::textmetrics::{edit_distance, jaccard, red, tokenize, TokenSeq};
use condor::training::{
    finite_diff_check, train_classifier, train_contrastive, LabeledCode, TrainConfig,
};
use condor::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(elapsed <= Duration::from_secs(limit_secs), || {
        format!("took {elapsed:.1?}, limit {limit_secs}s")
    })
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Training settings for the synthetic runs: defaults except the step size.
/// With the ±0.05 initialization every input starts near the origin, and the
/// default rate barely moves it within 40 epochs.
fn synthetic_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        learning_rate: 5.0,
        ..Default::default()
    }
}

// 1 ─ F1 is the harmonic mean of the reported precision and recall.
fn metric_identity() -> Outcome {
    // P = 1346459 / 1810000 = 0.7439, R = 1346459 / 1859750 = 0.7240 exactly.
    let (tp, fp, fn_) = (1_346_459u64, 463_541u64, 513_291u64);
    let tn = 1_000_000u64;
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for (p, y, n) in [(1u8, 1u8, tp), (1, 0, fp), (0, 1, fn_), (0, 0, tn)] {
        preds.extend(std::iter::repeat_n(p, n as usize));
        labels.extend(std::iter::repeat_n(y, n as usize));
    }
    let m = classification_metrics(&preds, &labels).map_err(|e| e.to_string())?;
    let direct = ConfusionMatrix { tp, fp, tn, fn_ }.metrics();
    check(m == direct, || format!("{m:?} != {direct:?}"))?;
    check((100.0 * m.precision - 74.39).abs() < 1e-9, || {
        format!("P = {}", m.precision)
    })?;
    check((100.0 * m.recall - 72.40).abs() < 1e-9, || {
        format!("R = {}", m.recall)
    })?;
    let expected = 2.0 * 74.39 * 72.40 / (74.39 + 72.40);
    let f1 = 100.0 * m.f1;
    check((f1 - 73.38).abs() <= 0.01, || format!("F1 = {f1:.4}"))?;
    check((f1 - expected).abs() < 1e-9, || {
        format!("F1 = {f1} vs harmonic mean {expected}")
    })?;
    Ok(format!(
        "P = {:.2}, R = {:.2}, F1 = {f1:.4}",
        100.0 * m.precision,
        100.0 * m.recall
    ))
}

// 2 ─ analytic gradients agree with central finite differences.
fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for seed in [0, 7] {
        let config = TrainConfig {
            seed,
            ..Default::default()
        };
        let r = finite_diff_check(&config, 100).map_err(|e| e.to_string())?;
        check(r.trials == 100, || format!("{} trials", r.trials))?;
        worst = (worst.0.max(r.contrastive), worst.1.max(r.bce));
    }
    check(worst.0 < 1e-4 && worst.1 < 1e-4, || {
        format!("max relative error {worst:?}")
    })?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "2 × 100 trials, max relative error contrastive {:.2e}, cross-entropy {:.2e} ({:.1?})",
        worst.0,
        worst.1,
        start.elapsed()
    ))
}

// 3 ─ contrastive training pulls C-C pairs together and pushes E-C apart.
fn contrastive_separation() -> Outcome {
    let start = Instant::now();
    let pairs = synthetic::contrastive_pairs(50, 2024);
    let problems: HashSet<&str> = pairs.iter().map(|p| p.problem_id.as_str()).collect();
    check(problems.len() == 50, || {
        format!("{} problems", problems.len())
    })?;
    let config = synthetic_config(17);
    check(
        config.epochs_contrastive == 40 && config.margin == 2.0,
        || "config drifted".into(),
    )?;

    let (params, trace) = train_contrastive(&pairs, &config).map_err(|e| e.to_string())?;
    check(trace.len() == 40, || {
        format!("{} trace records", trace.len())
    })?;
    let (first, last) = (trace[0], trace[39]);
    check(last.cc < first.cc, || {
        format!("C-C {} -> {}", first.cc, last.cc)
    })?;
    check(last.ec > first.ec, || {
        format!("E-C {} -> {}", first.ec, last.ec)
    })?;
    check(last.ec > last.cc, || {
        format!("final E-C {} <= C-C {}", last.ec, last.cc)
    })?;

    let (again, trace2) = train_contrastive(&pairs, &config).map_err(|e| e.to_string())?;
    check(params == again && trace == trace2, || {
        "rerun differs".into()
    })?;
    within(start.elapsed(), 120)?;
    Ok(format!(
        "{} pairs; C-C {:.4} -> {:.4}, E-C {:.4} -> {:.4} ({:.1?})",
        pairs.len(),
        first.cc,
        last.cc,
        first.ec,
        last.ec,
        start.elapsed()
    ))
}

// 4 ─ the full pipeline beats random selection on held-out candidate sets.
fn end_to_end_reranking() -> Outcome {
    let start = Instant::now();
    let config = synthetic_config(5);
    let train = synthetic::samples(100, 3, 2, 303);
    let pairs = mine_pairs(&train, 0.9).map_err(|e| e.to_string())?;
    let (encoder, _) = train_contrastive(&pairs, &config).map_err(|e| e.to_string())?;
    let triples = build_triples(&train, 0.9).map_err(|e| e.to_string())?;
    let augmented = augment_dataset(&triples, &train).map_err(|e| e.to_string())?;
    let labeled: Vec<LabeledCode> = train
        .iter()
        .chain(&augmented)
        .map(LabeledCode::from)
        .collect();
    let run = train_classifier(&labeled, &encoder, &config).map_err(|e| e.to_string())?;

    let sets = synthetic::candidate_sets(200, 5, 404);
    let train_ids: HashSet<&str> = train.iter().map(|s| s.problem_id.as_str()).collect();
    for set in &sets {
        check(!train_ids.contains(set.problem_id.as_str()), || {
            "set not held out".into()
        })?;
        check(set.candidates.len() == 5, || "k != 5".into())?;
        let correct = set.candidates.iter().filter(|c| c.label == Some(1)).count();
        check(correct == 1, || format!("{correct} correct candidates"))?;
        let toks: Vec<TokenSeq> = set.candidates.iter().map(|c| tokenize(&c.code)).collect();
        for a in &toks {
            for b in &toks {
                check(jaccard(a, b) >= 0.9, || {
                    "candidates not mutually similar".into()
                })?;
            }
        }
    }
    let results = rank_candidates(&run.params, &sets).map_err(|e| e.to_string())?;
    let score = pass_at_1(&sets, &results).map_err(|e| e.to_string())?;
    let baseline = 1.0 / 5.0;
    check(score - baseline >= 0.30, || {
        format!("Pass@1 {score:.3} vs baseline {baseline}")
    })?;
    within(start.elapsed(), 180)?;
    Ok(format!(
        "Pass@1 {score:.3} on 200 held-out sets (random 0.20); {} augmented samples ({:.1?})",
        augmented.len(),
        start.elapsed()
    ))
}

/// Independent patch application: copy untouched source lines, splice each
/// hunk's replacement in at its source position.
fn oracle_apply(source: &str, hunks: &[Hunk]) -> Result<String, String> {
    let lines = split_lines(source);
    let mut out = String::new();
    let mut cursor = 0usize;
    for h in hunks {
        let at = h.old_start - 1;
        if at < cursor || at + h.old_lines.len() > lines.len() {
            return Err(format!("hunk at {} out of order or range", h.old_start));
        }
        out.extend(lines[cursor..at].iter().copied());
        if lines[at..at + h.old_lines.len()] != h.old_lines[..] {
            return Err(format!("hunk at {} does not match source", h.old_start));
        }
        out.extend(h.new_lines.iter().map(String::as_str));
        cursor = at + h.old_lines.len();
    }
    out.extend(lines[cursor..].iter().copied());
    Ok(out)
}

fn random_text(rng: &mut ChaCha8Rng) -> Vec<String> {
    const POOL: [&str; 10] = [
        "x = 1",
        "y = x + 1",
        "if x > y:",
        "    return x",
        "return y",
        "",
        "    pass",
        "for i in range(n):",
        "    total += i",
        "print(total)",
    ];
    (0..rng.gen_range(0..12))
        .map(|_| POOL.choose(rng).expect("non-empty").to_string())
        .collect()
}

fn mutate(rng: &mut ChaCha8Rng, lines: &[String]) -> Vec<String> {
    let mut out = lines.to_vec();
    for _ in 0..rng.gen_range(1..5) {
        let fresh = format!("z{} = {}", rng.gen_range(0..4), rng.gen_range(0..3));
        match rng.gen_range(0..3) {
            0 if !out.is_empty() => {
                let i = rng.gen_range(0..out.len());
                out[i] = fresh;
            }
            1 if !out.is_empty() => {
                out.remove(rng.gen_range(0..out.len()));
            }
            _ => out.insert(rng.gen_range(0..=out.len()), fresh),
        }
    }
    out
}

fn join(rng: &mut ChaCha8Rng, lines: &[String]) -> String {
    let mut s: String = lines.iter().map(|l| format!("{l}\n")).collect();
    if rng.gen_bool(0.2) {
        s.pop();
    }
    s
}

// 5 ─ diff, intermediates and augmentation on random line lists.
fn diff_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut triples = Vec::new();
    let mut total_steps = 0usize;
    while triples.len() < 500 {
        let src_lines = random_text(&mut rng);
        let dst_lines = mutate(&mut rng, &src_lines);
        let (source, target) = (join(&mut rng, &src_lines), join(&mut rng, &dst_lines));
        if source == target {
            continue;
        }
        let script = compute_hunks(&source, &target);
        let n = script.hunks.len();
        check(n >= 1, || format!("no hunks for {source:?} -> {target:?}"))?;
        let full = script.apply_prefix(n).map_err(|e| e.to_string())?;
        check(full == target, || {
            format!("{source:?} -> {full:?}, want {target:?}")
        })?;
        check(oracle_apply(&source, &script.hunks)? == target, || {
            "oracle disagrees".into()
        })?;

        let inter = generate_intermediates(&script).map_err(|e| e.to_string())?;
        check(inter.len() == n - 1, || {
            format!("{} intermediates for {n} hunks", inter.len())
        })?;
        let mut chain = vec![source.clone()];
        chain.extend(inter.iter().map(|v| v.code.clone()));
        chain.push(target.clone());
        for (k, version) in chain.iter().enumerate() {
            let expected = oracle_apply(&source, &script.hunks[..k])?;
            check(*version == expected, || {
                format!("version {k} is not source + {k} hunks")
            })?;
        }
        for w in chain.windows(2) {
            check(w[0] != w[1], || "adjacent versions identical".into())?;
        }
        total_steps += n;
        triples.push(RepairTriple {
            problem_id: format!("p{}", triples.len() % 37),
            problem: "random".into(),
            buggy: source,
            correct: target,
        });
    }

    let existing: Vec<CodeSample> = triples
        .iter()
        .step_by(3)
        .map(|t| {
            CodeSample::new(
                &t.problem_id,
                &t.problem,
                format!("{}  \n", t.buggy),
                Verdict::Error,
            )
        })
        .collect();
    let aug = augment_dataset(&triples, &existing).map_err(|e| e.to_string())?;
    let mut seen: HashSet<(String, String)> = existing
        .iter()
        .map(|s| (s.problem_id.clone(), normalize_for_dedup(&s.code)))
        .chain(triples.iter().flat_map(|t| {
            [&t.buggy, &t.correct].map(|c| (t.problem_id.clone(), normalize_for_dedup(c)))
        }))
        .collect();
    for s in &aug {
        check(s.verdict == Verdict::Error, || {
            "intermediate labeled correct".into()
        })?;
        check(
            seen.insert((s.problem_id.clone(), normalize_for_dedup(&s.code))),
            || format!("duplicate intermediate in {}", s.problem_id),
        )?;
    }
    within(start.elapsed(), 30)?;
    Ok(format!(
        "500 fixtures, {total_steps} hunks, {} distinct intermediates ({:.1?})",
        aug.len(),
        start.elapsed()
    ))
}

fn recursive_ed(a: &[String], b: &[String], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let v = if a[0] == b[0] {
        recursive_ed(&a[1..], &b[1..], memo)
    } else {
        1 + recursive_ed(&a[1..], b, memo)
            .min(recursive_ed(a, &b[1..], memo))
            .min(recursive_ed(&a[1..], &b[1..], memo))
    };
    memo.insert((a.len(), b.len()), v);
    v
}

// 6 ─ DP edit distance equals the recursive definition.
fn edit_distance_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    const ALPHABET: [&str; 6] = ["a", "b", "c", "=", "(", "x1"];
    let seqs: Vec<TokenSeq> = (0..200)
        .map(|_| {
            (0..rng.gen_range(0..=12))
                .map(|_| ALPHABET.choose(&mut rng).expect("non-empty").to_string())
                .collect()
        })
        .collect();
    let mut compared = 0usize;
    for (i, a) in seqs.iter().enumerate() {
        for b in &seqs[i..] {
            let want = recursive_ed(a.tokens(), b.tokens(), &mut HashMap::new());
            let got = edit_distance(a, b);
            check(got == want, || {
                format!("{:?} vs {:?}: {got} != {want}", a.tokens(), b.tokens())
            })?;
            compared += 1;
        }
    }
    within(start.elapsed(), 10)?;
    Ok(format!(
        "200 sequences, {compared} pairs exact ({:.1?})",
        start.elapsed()
    ))
}

fn set_jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokenize(a), tokenize(b));
    let sa: HashSet<&str> = ta.iter().collect();
    let sb: HashSet<&str> = tb.iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / sa.union(&sb).count() as f64
}

// 7 ─ every mined pair/triple is above threshold with the right labels.
fn mining_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut samples: Vec<CodeSample> = Vec::new();
    let mut seen = HashSet::new();
    while samples.len() < 1000 {
        let p = rng.gen_range(0..40);
        let base: Vec<String> = (0..24).map(|k| format!("v{p}t{k}")).collect();
        let mut toks = base.clone();
        for _ in 0..rng.gen_range(0..4) {
            let i = rng.gen_range(0..toks.len());
            toks[i] = format!("m{}", rng.gen_range(0..6));
        }
        let code = toks.join(" ");
        if !seen.insert((p, code.clone())) {
            continue;
        }
        let verdict = if rng.gen_bool(0.4) {
            Verdict::Correct
        } else {
            Verdict::Error
        };
        let order = samples.len() as u64;
        samples.push(
            CodeSample::new(format!("p{p}"), format!("problem {p}"), code, verdict)
                .with_group(format!("g{}", rng.gen_range(0..3)), order),
        );
    }
    let by_code: HashMap<(&str, &str), &CodeSample> = samples
        .iter()
        .map(|s| ((s.problem_id.as_str(), s.code.as_str()), s))
        .collect();

    let pairs = mine_pairs(&samples, 0.9).map_err(|e| e.to_string())?;
    let mut emitted = HashSet::new();
    for p in &pairs {
        let j = set_jaccard(&p.code_a, &p.code_b);
        check(j >= 0.9, || format!("pair with Jaccard {j}"))?;
        check((j - p.similarity).abs() < 1e-12, || {
            "reported similarity differs".into()
        })?;
        let a = by_code[&(p.problem_id.as_str(), p.code_a.as_str())];
        let b = by_code[&(p.problem_id.as_str(), p.code_b.as_str())];
        check(
            !(a.verdict == Verdict::Error && b.verdict == Verdict::Error),
            || "E-E pair".into(),
        )?;
        match p.label {
            1 => check(
                a.verdict == Verdict::Correct && b.verdict == Verdict::Correct,
                || "label 1 not C-C".into(),
            )?,
            0 => check(
                a.verdict == Verdict::Error && b.verdict == Verdict::Correct,
                || "label 0 not E-C".into(),
            )?,
            l => return Err(format!("label {l}")),
        }
        let mut key = [p.code_a.as_str(), p.code_b.as_str()];
        key.sort();
        emitted.insert((p.problem_id.clone(), key[0].to_string(), key[1].to_string()));
    }
    // Completeness against brute force.
    let mut by_problem: BTreeMap<&str, Vec<&CodeSample>> = BTreeMap::new();
    for s in &samples {
        by_problem.entry(&s.problem_id).or_default().push(s);
    }
    let mut eligible = 0usize;
    for group in by_problem.values() {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                let ee = a.verdict == Verdict::Error && b.verdict == Verdict::Error;
                if !ee && set_jaccard(&a.code, &b.code) >= 0.9 {
                    eligible += 1;
                }
            }
        }
    }
    check(
        eligible == pairs.len() && emitted.len() == pairs.len(),
        || format!("{} pairs emitted, {eligible} eligible", pairs.len()),
    )?;

    let triples = build_triples(&samples, 0.9).map_err(|e| e.to_string())?;
    for t in &triples {
        check(set_jaccard(&t.buggy, &t.correct) >= 0.9, || {
            "triple below threshold".into()
        })?;
        let b = by_code[&(t.problem_id.as_str(), t.buggy.as_str())];
        let c = by_code[&(t.problem_id.as_str(), t.correct.as_str())];
        check(
            b.verdict == Verdict::Error && c.verdict == Verdict::Correct,
            || "triple verdicts".into(),
        )?;
        check(b.group == c.group && b.order < c.order, || {
            "triple out of history order".into()
        })?;
    }
    check(!pairs.is_empty() && !triples.is_empty(), || {
        "fixture too sparse".into()
    })?;
    within(start.elapsed(), 10)?;
    Ok(format!(
        "1000 samples: {} pairs ({} C-C), {} triples ({:.1?})",
        pairs.len(),
        pairs.iter().filter(|p| p.label == 1).count(),
        triples.len(),
        start.elapsed()
    ))
}

// 8 ─ seeded runs are bit-identical; checkpoints round-trip and reject damage.
fn determinism_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs_contrastive: 8,
        epochs_classifier: 4,
        ..synthetic_config(99)
    };
    let pairs = synthetic::contrastive_pairs(10, 8);
    let labeled = synthetic::labeled_samples(10, 8);
    let mut files = Vec::new();
    let mut traces = Vec::new();
    for run in 0..2 {
        let (enc, trace) = train_contrastive(&pairs, &config).map_err(|e| e.to_string())?;
        let clf = train_classifier(&labeled, &enc, &config).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.cndr"));
        save_checkpoint(&clf.params, &path).map_err(|e| e.to_string())?;
        let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;
        let bits = |p: &condor::model::EncoderParams| -> Vec<u64> {
            (0..p.num_params()).map(|i| p.get(i).to_bits()).collect()
        };
        check(bits(&loaded) == bits(&clf.params), || {
            "round trip not bit-exact".into()
        })?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        traces.push(
            trace
                .iter()
                .map(|r| (r.epoch, r.cc.to_bits(), r.ec.to_bits()))
                .collect::<Vec<_>>(),
        );
    }
    check(files[0] == files[1], || "checkpoints differ".into())?;
    check(traces[0] == traces[1], || "traces differ".into())?;

    // CLI runs with the same seed write identical checkpoint and trace files.
    let pairs_path = dir.path().join("pairs.jsonl");
    condor::corpus::write_records(&pairs_path, &pairs).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let (model, trace) = (
            dir.path().join(format!("cli{run}.cndr")),
            dir.path().join(format!("cli{run}.jsonl")),
        );
        let status = Command::new(env!("CARGO_BIN_EXE_condor"))
            .args([
                "train-contrastive",
                "--epochs-contrastive",
                "5",
                "--seed",
                "3",
                "--pairs",
            ])
            .arg(&pairs_path)
            .arg("--out")
            .arg(&model)
            .arg("--trace")
            .arg(&trace)
            .env_remove("CONDOR_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || {
            String::from_utf8_lossy(&status.stderr).into_owned()
        })?;
        outputs.push((
            std::fs::read(&model).unwrap(),
            std::fs::read(&trace).unwrap(),
        ));
    }
    check(outputs[0] == outputs[1], || "CLI outputs differ".into())?;

    let good = &files[0];
    let damaged: Vec<(&str, Vec<u8>)> = vec![
        ("truncated header", good[..10].to_vec()),
        ("truncated body", good[..good.len() / 2].to_vec()),
        ("missing last byte", good[..good.len() - 1].to_vec()),
        ("bad magic", [b"XNDR".as_slice(), &good[4..]].concat()),
        (
            "bad version",
            [&good[..4], &7u32.to_le_bytes(), &good[8..]].concat(),
        ),
        ("trailing bytes", [good.as_slice(), &[0u8; 8]].concat()),
        ("empty", Vec::new()),
    ];
    for (what, bytes) in &damaged {
        let path = dir.path().join("bad.cndr");
        std::fs::write(&path, bytes).map_err(|e| e.to_string())?;
        match load_checkpoint(&path) {
            Err(Error::Checkpoint { .. }) => {}
            other => return Err(format!("{what}: {other:?}")),
        }
    }
    Ok(format!(
        "2 library + 2 CLI runs identical; round trip bit-exact; {} damaged files rejected",
        damaged.len()
    ))
}

fn run_stats(triples: &Path, out: &Path) -> Result<(String, CorpusStats), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_condor"))
        .arg("stats")
        .arg("--triples")
        .arg(triples)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check(output.status.success(), || {
        String::from_utf8_lossy(&output.stderr).into_owned()
    })?;
    let table = String::from_utf8(output.stdout).map_err(|e| e.to_string())?;
    let json = std::fs::read_to_string(out).map_err(|e| e.to_string())?;
    let stats: CorpusStats = serde_json::from_str(json.trim()).map_err(|e| e.to_string())?;
    Ok((table, stats))
}

// 9 ─ stats on the bundled corpus and a hand-checked mini corpus.
fn stats_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (table, stats) = run_stats(&fixture("triples.jsonl"), &dir.path().join("s.json"))?;
    let header = table.lines().next().unwrap_or("");
    for col in CorpusStats::COLUMNS {
        check(header.split_whitespace().any(|c| c == col), || {
            format!("column {col} missing")
        })?;
    }
    check(
        table
            .lines()
            .nth(1)
            .map_or(0, |r| r.split_whitespace().count())
            == 7,
        || format!("value row malformed:\n{table}"),
    )?;
    let triples = load_triples(&fixture("triples.jsonl")).map_err(|e| e.to_string())?;
    for t in &triples {
        let r = red(&t.buggy, &t.correct);
        check((0.0..=2.0).contains(&r), || format!("RED {r}"))?;
    }
    check(
        (0.0..=2.0).contains(&stats.avg_relative_edit_distance),
        || "avg RED out of range".into(),
    )?;

    // Hand count: tokens 4/7/7 (problems), 4/5/21 (buggy and correct);
    // edits 1, 4 (`xs [ 0 ]` -> `max ( xs )`), 1 (`<` -> `>`).
    let (table, mini) = run_stats(&fixture("mini_triples.jsonl"), &dir.path().join("m.json"))?;
    let want_red = (1.0 / 4.0 + 4.0 / 5.0 + 1.0 / 21.0) / 3.0;
    check(mini.problem_count == 2 && mini.sample_count == 3, || {
        format!("{mini:?}")
    })?;
    for (got, want) in [
        (mini.avg_problem_tokens, 6.0),
        (mini.avg_buggy_tokens, 10.0),
        (mini.avg_correct_tokens, 10.0),
        (mini.avg_edit_distance, 2.0),
        (mini.avg_relative_edit_distance, want_red),
    ] {
        check((got - want).abs() < 1e-12, || {
            format!("{got} != {want} in {mini:?}")
        })?;
    }
    let row: Vec<&str> = table
        .lines()
        .nth(1)
        .unwrap_or("")
        .split_whitespace()
        .collect();
    check(
        row == ["2", "3", "6.00", "10.00", "10.00", "2.00", "0.37"],
        || format!("row {row:?}"),
    )?;
    Ok(format!(
        "7 columns on {} bundled triples (avg RED {:.3}); mini fixture row {}",
        triples.len(),
        stats.avg_relative_edit_distance,
        row.join(" ")
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric identity (F1 73.38)", metric_identity),
        ("gradient correctness", gradient_correctness),
        ("contrastive separation", contrastive_separation),
        ("end-to-end reranking", end_to_end_reranking),
        ("diff/augmentation oracle", diff_oracle),
        ("edit-distance oracle", edit_distance_oracle),
        ("mining soundness", mining_soundness),
        ("determinism and persistence", determinism_and_persistence),
        ("stats fidelity", stats_fidelity),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
