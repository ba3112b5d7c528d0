//! Subcommand bodies. Argument surface lives in main; everything here
//! takes resolved values so the pieces stay testable.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use tcda_core::discovery::{ingest_external, ExternalSpec, ScoreGraph, ScoreMode};
use tcda_core::ensemble;
use tcda_core::generator::{expand_plan, make_sample, resolve_pool};
use tcda_core::harness::{
    aggregate_robustness, graph_metrics, grid_graphs, run_protocol, select_best_hp, worst_case,
    BaselineGrid, ResultRow, RowAccumulator,
};
use tcda_core::io::{manifest, model, report, results};
use tcda_core::metrics::{GraphKind, MetricId};
use tcda_core::violations::schedule_rows;
use tcda_core::{GroundTruth, Plan, ScheduleVariant};

/// Batch directory layout shared by `gen` and external evaluation:
/// `<root>/<violation>/L<level>/<regime_id>/`.
fn batch_dir(root: &Path, violation: &str, level: u8, regime_id: &str) -> PathBuf {
    root.join(violation).join(format!("L{level}")).join(regime_id)
}

pub fn gen(plan: &Plan, out: &Path) -> Result<()> {
    let cells = expand_plan(plan)?;
    let pool = resolve_pool(plan, &cells)?;
    let mut written = 0usize;
    for cell in &cells {
        let records: Vec<_> = (0..plan.count)
            .into_par_iter()
            .map(|i| make_sample(plan.seed, &cell.configs, &cell.regime, i, pool.as_ref()))
            .collect::<tcda_core::Result<_>>()
            .with_context(|| {
                format!("generating {}/L{}/{}", cell.label, cell.level, cell.regime.id())
            })?;
        let dir = batch_dir(out, &cell.label, cell.level, &cell.regime.id());
        manifest::write_batch(&dir, &cell.label, cell.level, plan.schedule_variant, &records)
            .with_context(|| format!("writing batch {}", dir.display()))?;
        written += records.len();
    }
    println!(
        "wrote {written} samples across {} batches under {}",
        cells.len(),
        out.display()
    );
    Ok(())
}

fn write_rows(rows: &[ResultRow], out: &Path) -> Result<()> {
    if rows.is_empty() {
        bail!("no result rows to write");
    }
    results::write_results(out, rows)?;
    println!("wrote {} result rows to {}", rows.len(), out.display());
    Ok(())
}

fn filter_graphs(rows: Vec<ResultRow>, keep: Option<&BTreeSet<GraphKind>>) -> Vec<ResultRow> {
    match keep {
        Some(set) => rows.into_iter().filter(|r| set.contains(&r.graph)).collect(),
        None => rows,
    }
}

pub fn evaluate_native(
    plan: &Plan,
    grid: &BaselineGrid,
    keep: Option<&BTreeSet<GraphKind>>,
    out: &Path,
) -> Result<()> {
    let rows = filter_graphs(run_protocol(plan, grid)?, keep);
    write_rows(&rows, out)
}

pub struct ExternalArgs<'a> {
    pub pred_root: &'a Path,
    pub data_root: &'a Path,
    pub method: &'a str,
    pub hp: &'a str,
    pub inst: bool,
    pub l_model: Option<usize>,
}

/// Scores external prediction tensors against generated batches. A
/// prediction for sample s0003 of a batch is expected at the batch's
/// relative path under the prediction root, named `s0003_pred.tcda`;
/// missing or malformed files count as failures, not hard errors.
pub fn evaluate_external(
    args: &ExternalArgs,
    keep: Option<&BTreeSet<GraphKind>>,
    out: &Path,
) -> Result<()> {
    let batches = find_batches(args.data_root)?;
    if batches.is_empty() {
        bail!(
            "no {} files under {}",
            manifest::MANIFEST_FILE,
            args.data_root.display()
        );
    }
    let mut acc = RowAccumulator::default();
    for dir in &batches {
        let man =
            manifest::load_manifest(dir).with_context(|| format!("loading {}", dir.display()))?;
        let rel = dir.strip_prefix(args.data_root).expect("batch under data root");
        let regime_id = man.regime.id();
        let l_model = args.l_model.unwrap_or(man.regime.l);
        for entry in &man.samples {
            let (x, truth) = manifest::load_sample(dir, entry)
                .with_context(|| format!("loading sample {} of {}", entry.index, dir.display()))?;
            let spec = ExternalSpec {
                d: x.nrows(),
                l_model,
                inst: args.inst,
                method: args.method.to_owned(),
                hp: args.hp.to_owned(),
                sample: entry.index as usize,
            };
            let pred = args
                .pred_root
                .join(rel)
                .join(format!("s{:04}_pred.tcda", entry.index));
            match ingest_external(&pred, &spec) {
                Ok(graph) => {
                    for (kind, metric, value) in graph_metrics(&graph, &truth) {
                        if let Err(e) = &value {
                            log::warn!("{} {}/{}: {e}", pred.display(), kind.as_str(), metric.as_str());
                        }
                        acc.record(
                            args.method,
                            args.hp,
                            &man.violation,
                            man.level,
                            &regime_id,
                            kind,
                            metric,
                            value.ok(),
                        );
                    }
                }
                Err(e) => {
                    log::warn!("{}: {e}", pred.display());
                    let mut kinds = vec![GraphKind::Lwcg, GraphKind::Lsg];
                    if args.inst {
                        kinds.push(GraphKind::Inst);
                    }
                    for kind in kinds {
                        for metric in MetricId::ALL {
                            acc.record(
                                args.method,
                                args.hp,
                                &man.violation,
                                man.level,
                                &regime_id,
                                kind,
                                metric,
                                None,
                            );
                        }
                    }
                }
            }
        }
    }
    write_rows(&filter_graphs(acc.into_rows(), keep), out)
}

/// Walks a generated tree for batch directories (those holding a
/// manifest), sorted for deterministic row accumulation order.
fn find_batches(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(manifest::MANIFEST_FILE).is_file() {
            found.push(dir);
            continue;
        }
        for entry in fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn aggregate(results_path: &Path, out_dir: &Path) -> Result<()> {
    let rows = results::read_results(results_path)?;
    if rows.is_empty() {
        bail!("{} holds no result rows", results_path.display());
    }
    fs::create_dir_all(out_dir)?;
    let profiles = aggregate_robustness(&rows);

    let mut text = String::from("method,hp_id,violation,graph,metric,mean,std,cells,partial\n");
    for p in &profiles {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            p.method,
            p.hp,
            p.violation,
            p.graph.as_str(),
            p.metric.as_str(),
            p.mean,
            p.std,
            p.cells,
            p.partial
        )
        .unwrap();
    }
    fs::write(out_dir.join("profiles.csv"), text)?;

    let mut text = String::from("method,hp_id\n");
    for (method, hp) in select_best_hp(&profiles) {
        writeln!(text, "{method},{hp}").unwrap();
    }
    fs::write(out_dir.join("best_hp.csv"), text)?;

    let mut text = String::from("method,hp_id,violation,graph,metric,value\n");
    for w in worst_case(&rows) {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            w.method,
            w.hp,
            w.violation,
            w.graph.as_str(),
            w.metric.as_str(),
            w.value
        )
        .unwrap();
    }
    fs::write(out_dir.join("worst_case.csv"), text)?;

    println!("wrote {} profiles to {}", profiles.len(), out_dir.display());
    Ok(())
}

pub fn ensemble_train(plan: &Plan, grid: &BaselineGrid, lambda: f64, out: &Path) -> Result<()> {
    let cells = expand_plan(plan)?;
    let pool = resolve_pool(plan, &cells)?;
    let mut train: Vec<(Vec<ScoreGraph>, GroundTruth)> = Vec::new();
    let mut skipped = 0usize;
    for cell in &cells {
        let scored: Vec<(Vec<(&'static str, String, Option<ScoreGraph>)>, GroundTruth)> = (0
            ..plan.count)
            .into_par_iter()
            .map(|i| -> tcda_core::Result<_> {
                let s = make_sample(plan.seed, &cell.configs, &cell.regime, i, pool.as_ref())?;
                Ok((grid_graphs(&s.x, cell.regime.l, grid), s.truth))
            })
            .collect::<tcda_core::Result<_>>()?;
        for (members, truth) in scored {
            // a sample only trains if every grid member produced scores
            let complete: Option<Vec<ScoreGraph>> =
                members.into_iter().map(|(_, _, g)| g).collect();
            match complete {
                Some(graphs) => train.push((graphs, truth)),
                None => skipped += 1,
            }
        }
    }
    if train.is_empty() {
        bail!("every generated sample failed at least one grid member; nothing to train on");
    }
    let fitted = ensemble::train_linear(&train, lambda, plan.seed)?;
    model::write_model(out, &fitted)?;
    println!(
        "trained linear ensemble on {} samples ({skipped} skipped) -> {}",
        train.len(),
        out.display()
    );
    println!("weights {:?}, bias {}", fitted.weights, fitted.bias);
    Ok(())
}

pub fn ensemble_apply(
    plan: &Plan,
    grid: &BaselineGrid,
    model_path: &Path,
    keep: Option<&BTreeSet<GraphKind>>,
    out: &Path,
) -> Result<()> {
    let fitted = model::read_model(model_path)?;
    if fitted.normalization != ensemble::NORMALIZATION_MINMAX {
        bail!(
            "unsupported normalization `{}` in {}",
            fitted.normalization,
            model_path.display()
        );
    }
    if fitted.weights.len() != grid.member_count() {
        bail!(
            "model carries {} weights but the grid enumerates {} members",
            fitted.weights.len(),
            grid.member_count()
        );
    }
    let hp = format!("lambda{}", fitted.lambda);
    let cells = expand_plan(plan)?;
    let pool = resolve_pool(plan, &cells)?;
    let mut acc = RowAccumulator::default();
    for cell in &cells {
        let regime_id = cell.regime.id();
        let outcomes: Vec<Option<(ScoreGraph, GroundTruth)>> = (0..plan.count)
            .into_par_iter()
            .map(|i| -> tcda_core::Result<_> {
                let s = make_sample(plan.seed, &cell.configs, &cell.regime, i, pool.as_ref())?;
                let complete: Option<Vec<ScoreGraph>> = grid_graphs(&s.x, cell.regime.l, grid)
                    .into_iter()
                    .map(|(_, _, g)| g)
                    .collect();
                let Some(base) = complete else { return Ok(None) };
                let normalized: Vec<ScoreGraph> =
                    base.iter().map(ensemble::minmax_normalize).collect();
                let combined = ensemble::apply_linear(&fitted, &normalized)?;
                Ok(Some((combined, s.truth)))
            })
            .collect::<tcda_core::Result<_>>()?;
        for outcome in outcomes {
            match outcome {
                Some((combined, truth)) => {
                    for (kind, metric, value) in graph_metrics(&combined, &truth) {
                        acc.record(
                            &combined.method,
                            &hp,
                            &cell.label,
                            cell.level,
                            &regime_id,
                            kind,
                            metric,
                            value.ok(),
                        );
                    }
                }
                // any failed base member fails the ensemble for that sample
                None => {
                    for kind in [GraphKind::Lwcg, GraphKind::Lsg] {
                        for metric in MetricId::ALL {
                            acc.record(
                                ensemble::METHOD_ENSEMBLE_LINEAR,
                                &hp,
                                &cell.label,
                                cell.level,
                                &regime_id,
                                kind,
                                metric,
                                None,
                            );
                        }
                    }
                }
            }
        }
    }
    write_rows(&filter_graphs(acc.into_rows(), keep), out)
}

pub fn report(
    results_path: &Path,
    out_dir: &Path,
    graphs: Option<&BTreeSet<GraphKind>>,
    metrics: Option<&BTreeSet<MetricId>>,
) -> Result<()> {
    let rows = results::read_results(results_path)?;
    if rows.is_empty() {
        bail!("{} holds no result rows", results_path.display());
    }
    fs::create_dir_all(out_dir)?;
    let table = report::rank_table(&rows)?;
    fs::write(out_dir.join("rank.csv"), report::format_rank_csv(&table))?;

    // one chart per (violation, graph, metric) with at least one scored cell
    let mut groups: BTreeSet<(&str, GraphKind, MetricId)> = BTreeSet::new();
    for r in &rows {
        if r.count == 0 {
            continue;
        }
        if graphs.is_some_and(|set| !set.contains(&r.graph)) {
            continue;
        }
        if metrics.is_some_and(|set| !set.contains(&r.metric)) {
            continue;
        }
        groups.insert((&r.violation, r.graph, r.metric));
    }
    let mut charts = 0usize;
    for (violation, graph, metric) in groups {
        let svg = report::level_curves_svg(&rows, violation, graph, metric)?;
        let name = format!("curves_{violation}_{}_{}.svg", graph.as_str(), metric.as_str());
        fs::write(out_dir.join(name), svg)?;
        charts += 1;
    }
    println!("wrote rank.csv and {charts} charts to {}", out_dir.display());
    Ok(())
}

pub fn registry_dump(variant: ScheduleVariant, out: Option<&Path>) -> Result<()> {
    let mut text = String::from("violation,level,param,value\n");
    for row in schedule_rows(variant) {
        writeln!(text, "{},{},{},{}", row.id, row.level, row.param, row.value).unwrap();
    }
    match out {
        Some(path) => {
            fs::write(path, &text)?;
            println!("wrote schedule registry to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn parse_offsets(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|_| anyhow!("bad lag offset `{t}`")))
        .collect()
}

pub fn parse_modes(s: &str) -> Result<Vec<ScoreMode>> {
    if s.trim() == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "coef" => Ok(ScoreMode::Coef),
            "pval" => Ok(ScoreMode::Pval),
            other => Err(anyhow!("unknown gvar mode `{other}`")),
        })
        .collect()
}

pub fn parse_graph_set(s: &str) -> Result<BTreeSet<GraphKind>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| GraphKind::parse(t).ok_or_else(|| anyhow!("unknown graph kind `{t}`")))
        .collect()
}

pub fn parse_metric_set(s: &str) -> Result<BTreeSet<MetricId>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| MetricId::parse(t).ok_or_else(|| anyhow!("unknown metric `{t}`")))
        .collect()
}
