//! Experiment orchestration: training runs, per-sample evaluation and the
//! files each CLI command writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{fgsm, ifia_topk, pgd_unchecked, AttackConfig, PgdObjective};
use crate::attribution::ig_parts;
use crate::checkpoint;
use crate::config::{EvalSpec, ExperimentConfig};
use crate::consistency::{activation_consistency, record_activation_trace};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{cosine_unchecked, MetricReport};
use crate::mlp::{argmax, Init, MlpModel};
use crate::par;
use crate::rng::{derive_seed, derived};
use crate::theoremlab::{
    conditional_tau_ordering, pearson_instability_demo, sequence_success_rate, simulate_tau_cos, OpKind, OrderingStat,
    PearsonDemo, SequenceSearchStats,
};
use crate::training::{train, TrainLog};

/// Per-sample evaluation outcome. Attack fields are `None` for samples the
/// model misclassifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub sample_id: usize,
    pub label: usize,
    pub natural_correct: bool,
    pub ifia_label_preserved: Option<bool>,
    pub ifia_mean: Option<MetricReport>,
    pub ifia_worst: Option<MetricReport>,
    pub fgsm_correct: Option<bool>,
    pub pgd_correct: bool,
    /// `cos(IG(x), IG(x̃))` for the PGD point, signed attributions.
    pub pgd_ig_cosine: Option<f64>,
    /// Active hidden units on `x`, on the PGD point, and on both.
    pub act_nat: Option<u64>,
    pub act_pgd: Option<u64>,
    pub act_both: Option<u64>,
}

pub const EVAL_CSV_HEADER: &str = "sample_id,label,natural_correct,ifia_label_preserved,\
mean_tau,mean_cosine,mean_pearson,mean_topk,worst_tau,worst_cosine,worst_pearson,worst_topk,\
fgsm_correct,pgd_correct,pgd_ig_cosine,act_nat,act_pgd,act_both";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn metric_cells(m: &Option<MetricReport>) -> String {
    match m {
        Some(m) => m.csv_row(),
        None => ",,,".into(),
    }
}

impl EvalRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sample_id,
            self.label,
            self.natural_correct,
            cell(self.ifia_label_preserved),
            metric_cells(&self.ifia_mean),
            metric_cells(&self.ifia_worst),
            cell(self.fgsm_correct),
            self.pgd_correct,
            cell(self.pgd_ig_cosine),
            cell(self.act_nat),
            cell(self.act_pgd),
            cell(self.act_both),
        )
    }
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut s = format!("{EVAL_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Means of the four metrics; Pearson over rows where it is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub tau: f64,
    pub cosine: f64,
    pub pearson: Option<f64>,
    pub topk: f64,
}

impl MetricMeans {
    fn of<'a>(reports: impl Iterator<Item = &'a MetricReport>) -> Option<Self> {
        let r: Vec<&MetricReport> = reports.collect();
        if r.is_empty() {
            return None;
        }
        Some(Self {
            tau: mean(r.iter().map(|m| m.tau))?,
            cosine: mean(r.iter().map(|m| m.cosine))?,
            pearson: mean(r.iter().filter_map(|m| m.pearson)),
            topk: mean(r.iter().map(|m| m.topk))?,
        })
    }
}

/// Sequential left-to-right mean, so values recomputed from the CSV match.
pub fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn rate(xs: impl Iterator<Item = bool>) -> Option<f64> {
    mean(xs.map(|b| b as u8 as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub samples: usize,
    pub natural_correct: usize,
    /// Misclassified samples left out of attack statistics.
    pub skipped: usize,
    pub natural_accuracy: Option<f64>,
    /// Misclassified samples count as adversarial failures.
    pub fgsm_accuracy: Option<f64>,
    pub pgd_accuracy: Option<f64>,
    pub ifia_mean: Option<MetricMeans>,
    pub ifia_worst: Option<MetricMeans>,
    pub ifia_label_preserved_rate: Option<f64>,
    pub pgd_ig_cosine: Option<f64>,
    /// Pooled `Σboth / √(Σnat · Σpgd)` over evaluated samples.
    pub activation_consistency: Option<f64>,
}

impl EvalSummary {
    pub fn from_rows(rows: &[EvalRow]) -> Self {
        let nc = rows.iter().filter(|r| r.natural_correct).count();
        let fg: Vec<bool> = rows.iter().filter_map(|r| r.fgsm_correct.or((!r.natural_correct).then_some(false))).collect();
        let sum = |f: fn(&EvalRow) -> Option<u64>| rows.iter().filter_map(f).sum::<u64>();
        let (a, b, ab) = (sum(|r| r.act_nat), sum(|r| r.act_pgd), sum(|r| r.act_both));
        Self {
            samples: rows.len(),
            natural_correct: nc,
            skipped: rows.len() - nc,
            natural_accuracy: rate(rows.iter().map(|r| r.natural_correct)),
            fgsm_accuracy: if fg.len() == rows.len() { rate(fg.into_iter()) } else { None },
            pgd_accuracy: rate(rows.iter().map(|r| r.pgd_correct)),
            ifia_mean: MetricMeans::of(rows.iter().filter_map(|r| r.ifia_mean.as_ref())),
            ifia_worst: MetricMeans::of(rows.iter().filter_map(|r| r.ifia_worst.as_ref())),
            ifia_label_preserved_rate: rate(rows.iter().filter_map(|r| r.ifia_label_preserved)),
            pgd_ig_cosine: mean(rows.iter().filter_map(|r| r.pgd_ig_cosine)),
            activation_consistency: (a > 0 && b > 0).then(|| ab as f64 / ((a as f64) * (b as f64)).sqrt()),
        }
    }
}

/// Cross-entropy PGD settings used for adversarial accuracy.
pub fn eval_pgd_config(attack: &AttackConfig, spec: &EvalSpec) -> AttackConfig {
    AttackConfig {
        steps: spec.pgd_steps,
        alpha: Some(spec.pgd_alpha.unwrap_or(attack.epsilon / 4.0)),
        restarts: 1,
        ..attack.clone()
    }
}

#[allow(clippy::too_many_arguments)]
fn eval_sample(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    id: usize,
    attack: &AttackConfig,
    pgd_cfg: &AttackConfig,
    spec: &EvalSpec,
    seed: u64,
) -> Result<EvalRow> {
    let natural_correct = model.predict(x)? == y;
    let mut row = EvalRow {
        sample_id: id,
        label: y,
        natural_correct,
        ifia_label_preserved: None,
        ifia_mean: None,
        ifia_worst: None,
        fgsm_correct: None,
        pgd_correct: false,
        pgd_ig_cosine: None,
        act_nat: None,
        act_pgd: None,
        act_both: None,
    };
    if !natural_correct {
        return Ok(row);
    }
    let s = derive_seed(seed, id as u64);
    let rep = ifia_topk(model, x, y, attack, derive_seed(s, 0))?;
    row.ifia_label_preserved = Some(rep.label_preserved);
    row.ifia_mean = rep.mean_metrics();
    row.ifia_worst = rep.worst_metrics().cloned();
    if spec.fgsm {
        row.fgsm_correct = Some(model.predict(&fgsm(model, x, y, attack.epsilon, attack.clip_range)?)? == y);
    }
    let xa = pgd_unchecked(model, PgdObjective::CrossEntropy, x, y, pgd_cfg, derive_seed(s, 1));
    row.pgd_correct = argmax(&model.logits(&xa)) == y;
    let zero = vec![0.0; x.len()];
    let (ig, _) = ig_parts(model, x, y, &zero, spec.m);
    let (ig_a, _) = ig_parts(model, &xa, y, &zero, spec.m);
    row.pgd_ig_cosine = Some(cosine_unchecked(&ig, &ig_a).value);
    let pa = model.activation_pattern(x)?;
    let pb = model.activation_pattern(&xa)?;
    let (mut a, mut b, mut ab) = (0, 0, 0);
    for (la, lb) in pa.iter().zip(&pb) {
        for (&u, &v) in la.iter().zip(lb) {
            a += u as u64;
            b += v as u64;
            ab += (u && v) as u64;
        }
    }
    row.act_nat = Some(a);
    row.act_pgd = Some(b);
    row.act_both = Some(ab);
    Ok(row)
}

/// Evaluates every sample of `dataset`: IFIA (mean and worst restart),
/// FGSM and PGD accuracy, IG cosine at the PGD point and activation
/// counts. Rows come back in sample order.
pub fn run_eval(
    model: &MlpModel,
    dataset: &Dataset,
    attack: &AttackConfig,
    spec: &EvalSpec,
    seed: u64,
) -> Result<(Vec<EvalRow>, EvalSummary)> {
    attack.validate()?;
    if !dataset.is_empty() {
        if dataset.dim() != model.input_dim() {
            return Err(Error::Shape { expected: model.input_dim(), got: dataset.dim() });
        }
        if attack.k > dataset.dim() {
            return Err(Error::Config(format!("attack k = {} exceeds input dimension {}", attack.k, dataset.dim())));
        }
    }
    let pgd_cfg = eval_pgd_config(attack, spec);
    pgd_cfg.validate()?;
    let n = spec.max_samples.map_or(dataset.len(), |m| m.min(dataset.len()));
    let rows = par::map_range(n, |i| {
        eval_sample(model, &dataset.inputs[i], dataset.labels[i], i, attack, &pgd_cfg, spec, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summary = EvalSummary::from_rows(&rows);
    Ok((rows, summary))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Fresh model for `data` with the configured hidden widths.
pub fn init_model(cfg: &ExperimentConfig, data: &Dataset) -> Result<MlpModel> {
    let mut sizes = vec![data.dim()];
    sizes.extend(&cfg.model.hidden);
    sizes.push(data.class_count);
    MlpModel::init(&sizes, Init::He, &mut derived(cfg.train.seed, 0x1417))
}

/// The configured checkpoint, else `out_dir/checkpoint.json` when present.
pub fn existing_model(cfg: &ExperimentConfig) -> Result<Option<MlpModel>> {
    let path = match &cfg.model.checkpoint {
        Some(c) => cfg.base_dir.join(c),
        None => cfg.out_dir().join("checkpoint.json"),
    };
    if cfg.model.checkpoint.is_none() && !path.exists() {
        return Ok(None);
    }
    Ok(Some(checkpoint::load(path)?.0))
}

/// Trains on the training split and writes `config.json`,
/// `checkpoint.json` and `train_log.csv`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<(MlpModel, TrainLog)> {
    let (train_set, _) = cfg.dataset()?.build_split(&cfg.base_dir, cfg.seed)?;
    let init = match &cfg.model.checkpoint {
        Some(c) => checkpoint::load(cfg.base_dir.join(c))?.0,
        None => init_model(cfg, &train_set)?,
    };
    let (model, log) = train(&cfg.train, &train_set, init)?;
    let out = cfg.out_dir();
    write(&out, "config.json", &cfg.to_json()?)?;
    let mut meta = serde_json::Map::new();
    meta.insert("seed".into(), cfg.train.seed.into());
    meta.insert("loss_kind".into(), serde_json::to_value(cfg.train.loss_kind)?);
    meta.insert("use_igr".into(), cfg.train.use_igr.into());
    write(&out, "checkpoint.json", &checkpoint::to_json(&model, meta)?)?;
    write(&out, "train_log.csv", &log.to_csv())?;
    Ok((model, log))
}

fn model_for(cfg: &ExperimentConfig) -> Result<MlpModel> {
    match existing_model(cfg)? {
        Some(m) => Ok(m),
        None => Ok(run_train(cfg)?.0),
    }
}

/// Evaluates on the test split, training first when no model exists, and
/// writes `eval.csv` and `summary.json`.
pub fn run_eval_command(cfg: &ExperimentConfig) -> Result<EvalSummary> {
    let model = model_for(cfg)?;
    let (_, test) = cfg.dataset()?.build_split(&cfg.base_dir, cfg.seed)?;
    let (rows, summary) = run_eval(&model, &test, &cfg.attack, &cfg.eval, cfg.seed)?;
    let out = cfg.out_dir();
    write(&out, "config.json", &cfg.to_json()?)?;
    write(&out, "eval.csv", &eval_csv(&rows))?;
    write(&out, "summary.json", &to_json(&summary)?)?;
    Ok(summary)
}

/// One row per test sample: `sample_id,label_preserved,tau,cosine,pearson,topk`.
///
/// With the `topk` objective the metrics come from the worst IFIA restart;
/// with a PGD objective they compare `IG(x)` and `IG(x̃)` at the PGD point.
/// Misclassified samples get empty metric cells.
pub fn run_attack_command(cfg: &ExperimentConfig, objective: Option<PgdObjective>) -> Result<String> {
    let model = model_for(cfg)?;
    let (_, test) = cfg.dataset()?.build_split(&cfg.base_dir, cfg.seed)?;
    let a = &cfg.attack;
    a.validate()?;
    if !test.is_empty() && a.k > test.dim() {
        return Err(Error::Config(format!("attack k = {} exceeds input dimension {}", a.k, test.dim())));
    }
    let n = cfg.eval.max_samples.map_or(test.len(), |m| m.min(test.len()));
    let rows = par::map_range(n, |i| -> Result<String> {
        let (x, y) = (&test.inputs[i], test.labels[i]);
        let s = derive_seed(cfg.seed, i as u64);
        if model.predict(x)? != y {
            return Ok(format!("{i},false,,,,"));
        }
        let (preserved, m) = match objective {
            None => {
                let r = ifia_topk(&model, x, y, a, s)?;
                (r.label_preserved, r.worst_metrics().cloned().expect("attacked"))
            }
            Some(obj) => {
                let xa = pgd_unchecked(&model, obj, x, y, a, s);
                let zero = vec![0.0; x.len()];
                let ig = ig_parts(&model, x, y, &zero, a.m).0;
                let ig_a = ig_parts(&model, &xa, y, &zero, a.m).0;
                (model.predict(&xa)? == y, MetricReport::compute(&ig, &ig_a, a.k, a.absolute)?)
            }
        };
        Ok(format!("{i},{preserved},{}", m.csv_row()))
    });
    let mut csv = String::from("sample_id,label_preserved,tau,cosine,pearson,topk\n");
    for r in rows {
        csv.push_str(&r?);
        csv.push('\n');
    }
    write(&cfg.out_dir(), "attack.csv", &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub association: Option<f64>,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
}

/// Writes `simulate.csv` (`cosine,tau`) and `simulate_summary.json`.
pub fn run_simulate_command(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    let sim = simulate_tau_cos(cfg.simulate.dim, cfg.simulate.n_samples, cfg.seed)?;
    let mut csv = String::from("cosine,tau\n");
    for s in &sim.samples {
        let _ = writeln!(csv, "{},{}", s.cosine, s.tau);
    }
    let summary = SimulateSummary { association: sim.association, n: sim.samples.len(), dim: sim.dim, seed: sim.seed };
    let out = cfg.out_dir();
    write(&out, "simulate.csv", &csv)?;
    write(&out, "simulate_summary.json", &to_json(&summary)?)?;
    Ok(summary)
}

/// Consistency between natural and PGD activations on the test split,
/// written to `consistency.csv` as `model_id,dataset,consistency,layer_1,...`.
pub fn run_consistency_command(cfg: &ExperimentConfig) -> Result<String> {
    let model = model_for(cfg)?;
    let ds_spec = cfg.dataset()?;
    let (_, test) = ds_spec.build_split(&cfg.base_dir, cfg.seed)?;
    let pgd_cfg = eval_pgd_config(&cfg.attack, &cfg.eval);
    pgd_cfg.validate()?;
    let n = cfg.eval.max_samples.map_or(test.len(), |m| m.min(test.len()));
    let idx: Vec<usize> = (0..n).filter(|&i| model.predict(&test.inputs[i]).ok() == Some(test.labels[i])).collect();
    let layers = model.hidden_widths().len();
    let mut csv = String::from("model_id,dataset,consistency");
    for l in 1..=layers {
        let _ = write!(csv, ",layer_{l}");
    }
    csv.push('\n');
    if !idx.is_empty() && layers > 0 {
        let nat: Vec<Vec<f64>> = idx.iter().map(|&i| test.inputs[i].clone()).collect();
        let adv: Vec<Vec<f64>> = par::map_slice(&idx, |&i| {
            pgd_unchecked(&model, PgdObjective::CrossEntropy, &test.inputs[i], test.labels[i], &pgd_cfg, derive_seed(cfg.seed, i as u64))
        });
        let c = activation_consistency(&record_activation_trace(&model, &nat)?, &record_activation_trace(&model, &adv)?)?;
        let model_id = match &cfg.model.checkpoint {
            Some(p) => p.display().to_string(),
            None => format!("{:?}{}", cfg.train.loss_kind, if cfg.train.use_igr { "+igr" } else { "" }),
        };
        let _ = write!(csv, "{model_id},{},{}", serde_json::to_value(ds_spec.kind)?.as_str().unwrap_or(""), c.value);
        for v in &c.per_layer {
            let _ = write!(csv, ",{}", cell(*v));
        }
        csv.push('\n');
    }
    write(&cfg.out_dir(), "consistency.csv", &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingEntry {
    pub op: String,
    pub stat: OrderingStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub ordering: Vec<OrderingEntry>,
    pub sequence: SequenceSearchStats,
    pub pearson: Option<PearsonDemo>,
}

/// Ordering statistics, sequence-search success rate and the Pearson
/// demo, written to `theorem.json`.
pub fn run_theorem_command(cfg: &ExperimentConfig) -> Result<TheoremReport> {
    let t = &cfg.theorem;
    let mut ordering = Vec::new();
    for &d in &t.dims {
        for (name, op) in [("exchange", OpKind::Exchange), ("scale", OpKind::Scale)] {
            let stat = conditional_tau_ordering(d, t.trials, op, derive_seed(cfg.seed, d as u64))?;
            ordering.push(OrderingEntry { op: name.into(), stat });
        }
    }
    let report = TheoremReport {
        ordering,
        sequence: sequence_success_rate(t.sequence_triples, t.max_dim, t.budget, cfg.seed)?,
        pearson: pearson_instability_demo(t.pearson_dim, cfg.seed)?,
    };
    write(&cfg.out_dir(), "theorem.json", &to_json(&report)?)?;
    Ok(report)
}
