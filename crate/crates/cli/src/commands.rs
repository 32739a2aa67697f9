//! Subcommand implementations. Each writes its artifacts under the output
//! directory and prints a short summary.

use anyhow::{anyhow, Context};
use serde_json::json;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sstsearch_core::corpus::{load_corpus, split_corpus, CodeQueryPair, CorpusSplit, Split};
use sstsearch_core::coverage::{corpus_coverage, coverage as coverage_of, token_footprint, CoverageReport};
use sstsearch_core::eval::{binary_relevance_lists, compare, mrr, ndcg, ModeReport};
use sstsearch_core::model::{train as train_model, Checkpoint, Mode};
use sstsearch_core::pipeline;
use sstsearch_core::search::{build_index, load_index, query as run_query, save_index};
use sstsearch_core::seed;
use sstsearch_core::serialize::Method;
use sstsearch_core::{ast, sst};

use crate::config::Ctx;
use crate::{CliError, SamplerArgs, TrainArgs};

fn read_corpus(path: &Path) -> Result<Vec<CodeQueryPair>, CliError> {
    load_corpus(path).map_err(|e| CliError::Data(anyhow!("corpus {}: {e}", path.display())))
}

fn ensure_out(ctx: &Ctx) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&ctx.out)
        .with_context(|| format!("creating output directory {}", ctx.out.display()))?;
    Ok(ctx.out.clone())
}

fn derive_split(ctx_seed: u64, pairs: &[CodeQueryPair]) -> Result<CorpusSplit, CliError> {
    Ok(split_corpus(pairs, seed::derive(ctx_seed, "split"))?)
}

fn pair_ast(pair: &CodeQueryPair) -> Result<ast::AstTree, CliError> {
    match &pair.ast {
        Some(tree) => Ok(tree.clone()),
        None => ast::parse_minilang(&pair.code)
            .map_err(|e| CliError::Data(anyhow!("pair \"{}\": {e}", pair.id))),
    }
}

pub fn parse(ctx: &Ctx, corpus: Option<&Path>, source: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = source {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let tree = ast::parse_minilang(&text)
            .map_err(|e| CliError::Data(anyhow!("{}: {e}", path.display())))?;
        println!("{}", serde_json::to_string_pretty(&tree.to_value()).expect("tree is json"));
        return Ok(());
    }
    let corpus_path = ctx.corpus(corpus)?;
    let pairs = read_corpus(&corpus_path)?;
    let out = ensure_out(ctx)?;
    let target = out.join("asts.jsonl");
    let mut writer = BufWriter::new(fs::File::create(&target).context("creating asts.jsonl")?);
    for pair in &pairs {
        let tree = pair_ast(pair)?;
        serde_json::to_writer(&mut writer, &json!({"id": pair.id, "ast": tree.to_value()}))
            .context("writing asts.jsonl")?;
        writer.write_all(b"\n").context("writing asts.jsonl")?;
    }
    writer.flush().context("writing asts.jsonl")?;
    println!("parsed {} snippets -> {}", pairs.len(), target.display());
    Ok(())
}

pub fn transform(
    ctx: &Ctx,
    corpus: Option<&Path>,
    rules_path: Option<&Path>,
    lang: Option<&str>,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let pairs = read_corpus(&corpus_path)?;
    let rules = ctx.rules(rules_path, lang)?;
    let out = ensure_out(ctx)?;
    let target = out.join("ssts.jsonl");
    let mut writer = BufWriter::new(fs::File::create(&target).context("creating ssts.jsonl")?);
    for pair in &pairs {
        let ast = pair_ast(pair)?;
        let sst_tree = sst::to_sst(&ast, &rules)
            .map_err(|e| CliError::Data(anyhow!("pair \"{}\": {e}", pair.id)))?;
        serde_json::to_writer(&mut writer, &json!({"id": pair.id, "sst": sst_tree.to_value()}))
            .context("writing ssts.jsonl")?;
        writer.write_all(b"\n").context("writing ssts.jsonl")?;
    }
    writer.flush().context("writing ssts.jsonl")?;
    println!("transformed {} snippets -> {}", pairs.len(), target.display());
    Ok(())
}

pub fn serialize(
    ctx: &Ctx,
    corpus: Option<&Path>,
    method: Option<Method>,
    rules_path: Option<&Path>,
    lang: Option<&str>,
    sampler_args: &SamplerArgs,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let method = ctx.method(method)?;
    let pairs = read_corpus(&corpus_path)?;
    let rules = ctx.rules(rules_path, lang)?;
    let sampler = ctx.sampler(sampler_args);
    let split = derive_split(ctx.seed, &pairs)?;
    let out = ensure_out(ctx)?;

    for which in Split::ALL {
        let indices = split.indices(which);
        if indices.is_empty() {
            continue;
        }
        let target = out.join(format!("{}.{}.txt", which.as_str(), method.as_str()));
        let mut writer =
            BufWriter::new(fs::File::create(&target).with_context(|| format!("creating {}", target.display()))?);
        let mut failed = 0usize;
        for &i in indices {
            match pipeline::pair_tree_tokens(&pairs[i], method, &sampler, &rules) {
                Ok(tokens) => writeln!(writer, "{}", tokens.join(" ")),
                Err(_) => {
                    failed += 1;
                    writeln!(writer)
                }
            }
            .with_context(|| format!("writing {}", target.display()))?;
        }
        writer.flush().with_context(|| format!("writing {}", target.display()))?;
        if failed > 0 {
            eprintln!("{}: {failed} snippets failed to serialize (empty lines)", target.display());
        }
        println!("wrote {} ({} lines)", target.display(), indices.len());
    }
    Ok(())
}

/// The nine coverage rows of interest: token-only, each tree method, and
/// each token+tree union.
fn coverage_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn coverage_for_mode(
    mode: Mode,
    pairs: &[&CodeQueryPair],
    sampler: &sstsearch_core::serialize::SamplerConfig,
    rules: &sstsearch_core::sst::TransformRuleSet,
) -> Result<(f64, f64, usize), CliError> {
    let mut reports: Vec<CoverageReport> = Vec::new();
    for pair in pairs {
        let Ok(sst_tree) = pipeline::snippet_tree(pair, rules) else {
            continue;
        };
        let mut footprints = Vec::new();
        if mode.uses_code_tokens() {
            footprints.push(token_footprint(&sst_tree));
        }
        if let Some(method) = mode.method() {
            let seqs = pipeline::tree_sequences(
                &sst_tree,
                method,
                sampler,
                seed::item(sampler.seed, &pair.id),
            );
            footprints.extend(seqs.into_iter().map(|s| s.footprint));
        }
        reports.push(coverage_of(&footprints, &sst_tree)?);
    }
    let summary = corpus_coverage(&reports)?;
    Ok((summary.link_coverage, summary.node_coverage, summary.items))
}

pub fn coverage_cmd_rows(
    pairs: &[&CodeQueryPair],
    sampler: &sstsearch_core::serialize::SamplerConfig,
    rules: &sstsearch_core::sst::TransformRuleSet,
) -> Result<Vec<(String, f64, f64, usize)>, CliError> {
    let mut rows = Vec::new();
    for mode in coverage_modes() {
        let (link, node, items) = coverage_for_mode(mode, pairs, sampler, rules)?;
        rows.push((mode.to_string(), link, node, items));
    }
    Ok(rows)
}

pub fn coverage(
    ctx: &Ctx,
    corpus: Option<&Path>,
    rules_path: Option<&Path>,
    lang: Option<&str>,
    sampler_args: &SamplerArgs,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let pairs = read_corpus(&corpus_path)?;
    let rules = ctx.rules(rules_path, lang)?;
    let sampler = ctx.sampler(sampler_args);
    let out = ensure_out(ctx)?;

    let refs: Vec<&CodeQueryPair> = pairs.iter().collect();
    let rows = coverage_cmd_rows(&refs, &sampler, &rules)?;

    println!("{:<16}{:>10}{:>10}", "mode", "link", "node");
    for (mode, link, node, _) in &rows {
        println!("{mode:<16}{:>9.2}%{:>9.2}%", link * 100.0, node * 100.0);
    }
    let records: Vec<_> = rows
        .iter()
        .map(|(mode, link, node, items)| {
            json!({"mode": mode, "link_coverage": link, "node_coverage": node, "items": items})
        })
        .collect();
    let target = out.join("coverage.json");
    fs::write(&target, serde_json::to_string_pretty(&records).expect("rows are json"))
        .context("writing coverage.json")?;
    println!("coverage table -> {}", target.display());
    Ok(())
}

pub fn train(
    ctx: &Ctx,
    corpus: Option<&Path>,
    mode: Option<Mode>,
    rules_path: Option<&Path>,
    lang: Option<&str>,
    sampler_args: &SamplerArgs,
    train_args: &TrainArgs,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let mode = ctx.mode(mode)?;
    let pairs = read_corpus(&corpus_path)?;
    let rules = ctx.rules(rules_path, lang)?;
    let sampler = ctx.sampler(sampler_args);
    let cfg = ctx.train_config(train_args)?;
    let split = derive_split(ctx.seed, &pairs)?;
    let out = ensure_out(ctx)?;

    let outcome = train_model(&pairs, &split, mode, &cfg, &sampler, &rules)?;
    let ckpt_path = out.join(format!("{mode}.ckpt"));
    outcome.checkpoint.save_to(&ckpt_path)?;
    let history_path = out.join(format!("{mode}.history.json"));
    let history = json!({
        "mode": mode.to_string(),
        "epochs": outcome.history,
        "skipped_train": outcome.skipped_train,
        "skipped_valid": outcome.skipped_valid,
        "truncated_sequences": outcome.truncated_sequences,
    });
    fs::write(&history_path, serde_json::to_string_pretty(&history).expect("history is json"))
        .context("writing history")?;

    for stats in &outcome.history {
        eprintln!(
            "epoch {:>3}  train loss {:.4}  valid loss {}  valid mrr {}",
            stats.epoch,
            stats.train_loss,
            stats.valid_loss.map_or("-".into(), |v| format!("{v:.4}")),
            stats.valid_mrr.map_or("-".into(), |v| format!("{v:.4}")),
        );
    }
    println!("trained {mode}: checkpoint -> {}", ckpt_path.display());
    println!("history -> {}", history_path.display());
    Ok(())
}

fn select_pairs<'a>(
    pairs: &'a [CodeQueryPair],
    split: &CorpusSplit,
    which: Option<Split>,
) -> Vec<&'a CodeQueryPair> {
    match which {
        Some(s) => split.subset(pairs, s),
        None => pairs.iter().collect(),
    }
}

pub fn index(
    ctx: &Ctx,
    corpus: Option<&Path>,
    checkpoint: &Path,
    which: Option<Split>,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let pairs = read_corpus(&corpus_path)?;
    let ckpt = Checkpoint::load_from(checkpoint)
        .map_err(|e| CliError::Data(anyhow!("checkpoint {}: {e}", checkpoint.display())))?;
    // the checkpoint's seed reproduces the split used at training time
    let split = derive_split(ckpt.config.seed, &pairs)?;
    let selected: Vec<CodeQueryPair> =
        select_pairs(&pairs, &split, which).into_iter().cloned().collect();
    let out = ensure_out(ctx)?;

    let idx = build_index(&ckpt, &selected)?;
    let target = out.join(format!("{}.idx", ckpt.mode));
    save_index(&target, &idx, &ckpt)?;
    println!(
        "indexed {} snippets (skipped {}) -> {}",
        idx.len(),
        idx.skipped(),
        target.display()
    );
    Ok(())
}

pub fn search(index_path: &Path, text: &str, k: usize) -> Result<(), CliError> {
    if k < 1 {
        return Err(CliError::Usage("-k must be at least 1".into()));
    }
    let (idx, ckpt) = load_index(index_path)
        .map_err(|e| CliError::Data(anyhow!("index {}: {e}", index_path.display())))?;
    let hits = run_query(&idx, &ckpt, text, k)?;
    for (rank, (snippet, score)) in hits.iter().enumerate() {
        println!(
            "{:>2}. {score:+.4}  {id}  [{lang}]  {preview}",
            rank + 1,
            id = snippet.id,
            lang = snippet.lang,
            preview = snippet.preview
        );
    }
    Ok(())
}

pub fn eval(
    ctx: &Ctx,
    corpus: Option<&Path>,
    checkpoints: &[PathBuf],
    which: Option<Split>,
) -> Result<(), CliError> {
    let corpus_path = ctx.corpus(corpus)?;
    let pairs = read_corpus(&corpus_path)?;
    let which = which.unwrap_or(Split::Test);
    let out = ensure_out(ctx)?;

    let mut reports = Vec::new();
    for path in checkpoints {
        let ckpt = Checkpoint::load_from(path)
            .map_err(|e| CliError::Data(anyhow!("checkpoint {}: {e}", path.display())))?;
        let split = derive_split(ckpt.config.seed, &pairs)?;
        let selected = split.subset(&pairs, which);
        let (matrices, skipped, largest) = pipeline::eval_batches(&ckpt, &selected)?;
        if matrices.is_empty() {
            return Err(CliError::Data(anyhow!(
                "{}: no evaluable batch in the {} split",
                path.display(),
                which.as_str()
            )));
        }
        let mrr_value = mrr(&matrices)?;
        let mut rel_lists = Vec::new();
        for matrix in &matrices {
            rel_lists.extend(binary_relevance_lists(matrix)?);
        }
        let ndcg_value = ndcg(&rel_lists)?;
        let (link, node, _) = coverage_for_mode(ckpt.mode, &selected, &ckpt.sampler, &ckpt.rules)?;
        if skipped > 0 {
            eprintln!("{}: skipped {skipped} snippets", path.display());
        }
        reports.push(ModeReport {
            mode: ckpt.mode.to_string(),
            mrr: mrr_value,
            ndcg: Some(ndcg_value),
            link_coverage: Some(link),
            node_coverage: Some(node),
            distractors: largest.saturating_sub(1),
            change_ratio: None,
        });
    }

    let has_baseline = reports.iter().any(|r| r.mode == "uni-code");
    let payload = if has_baseline {
        let report = compare(reports.clone())?;
        reports = report.modes.clone();
        json!({
            "split": which.as_str(),
            "ndcg_gain": "2^rel - 1, discount log2(pos + 1)",
            "baseline": report.baseline,
            "best_mode": report.best_mode,
            "modes": report.modes,
        })
    } else {
        json!({
            "split": which.as_str(),
            "ndcg_gain": "2^rel - 1, discount log2(pos + 1)",
            "modes": reports,
        })
    };

    println!(
        "{:<16}{:>8}{:>8}{:>9}{:>9}{:>9}{:>7}",
        "mode", "mrr", "ndcg", "link", "node", "change", "distr"
    );
    for r in &reports {
        println!(
            "{:<16}{:>8.4}{:>8.4}{:>8.2}%{:>8.2}%{:>9}{:>7}",
            r.mode,
            r.mrr,
            r.ndcg.unwrap_or(f64::NAN),
            r.link_coverage.unwrap_or(f64::NAN) * 100.0,
            r.node_coverage.unwrap_or(f64::NAN) * 100.0,
            r.change_ratio
                .map_or("-".into(), |c| format!("{:+.2}%", c * 100.0)),
            r.distractors,
        );
    }
    let target = out.join("eval.json");
    fs::write(&target, serde_json::to_string_pretty(&payload).expect("payload is json"))
        .context("writing eval.json")?;
    println!("report -> {}", target.display());
    Ok(())
}
