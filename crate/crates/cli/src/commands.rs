use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use issuepoint::corpus::{load_dataset, read_bills, split_folds, Lawmaker, RollCallDataset};
use issuepoint::eval::{
    corrected_adjustments, cross_validate, improved_votes, improvement_from_logliks, party_discriminant,
    permutation_significance, random_adjustment_baseline, write_histograms, write_parallel_plot, CvRow,
    DiscriminantReport, ExtremeFlag, IssueImprovement, Variant, VariantInput,
};
use issuepoint::inference::{fit_with, Checkpoint, FitControl, FitOutcome, FitResult};
use issuepoint::model::{ModelParams, ParamsFile};
use issuepoint::rng::derive_seed;
use issuepoint::topics::{
    build_labeled_topics_with, encode_direct_labels, fit_unsupervised_lda, infer_mixtures, permute_mixtures,
    read_mixtures, retained_labels, smooth_topics_with, write_mixtures, IssueMixture,
};
use issuepoint::vocab::{
    extract_phrases, filter_phrases, read_lines, select_vocabulary, train_phrase_classifier, AuxStats, VocabModel,
};
use serde::{Deserialize, Serialize};

use crate::manifest::{self, Recorder};
use crate::settings::Settings;
use crate::{CliError, DataArgs, EvaluateArgs, ExploreArgs, FitArgs, PrepareArgs, VerifyArgs};

const TAG_PERMUTED_FIT: u64 = 0x9e4f;
const TAG_FULL_FIT: u64 = 0xf011;
const TAG_BASELINE: u64 = 0xba5e;
const CHECKPOINT: &str = "checkpoint.json";

fn labels_for(mixtures: &Path, labels: Option<&Path>) -> Result<Vec<String>, CliError> {
    let path = match labels {
        Some(p) => p.to_path_buf(),
        None => mixtures.with_file_name("labels.txt"),
    };
    let labels = read_lines(&path)?;
    if labels.is_empty() {
        return Err(CliError::data(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}

struct Mixtures {
    labels: Vec<String>,
    mixtures: Vec<IssueMixture>,
}

fn load_mixtures(rec: &mut Recorder, path: &Path, labels: Option<&Path>) -> Result<Mixtures, CliError> {
    let labels = labels_for(path, labels)?;
    rec.input(path)?;
    let mixtures = read_mixtures(path, labels.len())?;
    Ok(Mixtures { labels, mixtures })
}

fn load_data(rec: &mut Recorder, d: &DataArgs) -> Result<RollCallDataset, CliError> {
    for p in [&d.votes, &d.lawmakers, &d.bills] {
        rec.input(p)?;
    }
    Ok(load_dataset(&d.votes, &d.lawmakers, &d.bills)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn prepare(args: &PrepareArgs, s: &Settings) -> Result<(), CliError> {
    let p = &s.prepare;
    let mut rec = Recorder::new("prepare", &args.out)?;
    rec.input(&args.bills)?;
    let bills = read_bills(&args.bills)?;
    let labels_out = rec.output("labels.txt");
    let mixtures_out = rec.output("mixtures.csv");

    if args.variant == Variant::IssueDirect {
        let labels = retained_labels(&bills, p.min_label_count);
        if labels.is_empty() {
            return Err(CliError::data(format!("no label is applied to at least {} bills", p.min_label_count)));
        }
        let mixtures = encode_direct_labels(&bills, &labels)?;
        write_lines(&labels_out, &labels)?;
        write_mixtures(&mixtures_out, &mixtures)?;
        println!("K = {}", labels.len());
        rec.finish(s)?;
        return Ok(());
    }

    let stats = extract_phrases(&bills, p.max_phrase_len);
    let kept = filter_phrases(&stats, bills.len(), &s.thresholds);
    let aux = match &args.features {
        Some(path) => {
            rec.input(path)?;
            AuxStats::read(path)?
        }
        None => AuxStats::default(),
    };
    let features = aux.features(&kept)?;
    let model = match &args.bad_phrases {
        Some(path) => {
            rec.input(path)?;
            let bad: HashSet<String> = read_lines(path)?.into_iter().collect();
            let m = train_phrase_classifier(&features, &bad, &s.classifier)?;
            write_json(&rec.output("vocab_model.json"), &m)?;
            m
        }
        None => {
            log::info!("no bad-phrase list; ranking phrases by document frequency");
            VocabModel::doc_frequency()
        }
    };
    let size = p.vocab_size.min(features.len());
    if size < p.vocab_size {
        log::warn!("only {} candidate phrases survive filtering; vocabulary holds all of them", features.len());
    }
    let vocab = select_vocabulary(&model, &features, size)?;
    vocab.write(&rec.output("vocabulary.txt"))?;

    let mut topics = match args.variant {
        Variant::StandardLda => {
            let k = if p.topics > 0 { p.topics } else { retained_labels(&bills, p.min_label_count).len() };
            if k == 0 {
                return Err(CliError::usage("standard_lda needs --topics (or labels to count)"));
            }
            fit_unsupervised_lda(&bills, &vocab, k, s.seed, p.lda_max_iter)?.model
        }
        Variant::IssueLda => {
            let labeled = build_labeled_topics_with(&bills, &vocab, p.min_label_count, p.pseudocount)?;
            smooth_topics_with(&labeled, &bills, &vocab, p.smoothing_iterations, p.pseudocount)
        }
        v => return Err(CliError::usage(format!("prepare does not build mixtures for `{}`", v.name()))),
    };
    if let Some(a) = p.alpha {
        if a.is_nan() || a <= 0.0 {
            return Err(CliError::usage(format!("alpha must be positive, got {a}")));
        }
        topics.alpha = a;
    }
    topics.write(&rec.output("topics.json"))?;
    let mixtures = infer_mixtures(&bills, &topics, &vocab, &s.topic_inference)?;
    write_lines(&labels_out, &topics.labels())?;
    write_mixtures(&mixtures_out, &mixtures)?;
    println!("K = {}", topics.k());
    rec.finish(s)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FitSummaryFile {
    variant: String,
    k: usize,
    sweeps: usize,
    converged: bool,
    identified: bool,
    final_m: usize,
    skipped_updates: u64,
    final_elbo: Option<f64>,
}

fn fit_mixtures(variant: Variant, m: Option<Mixtures>, seed: u64) -> Result<Option<Mixtures>, CliError> {
    match (variant, m) {
        (Variant::Classic, _) => Ok(None),
        (Variant::IssuePermuted, Some(m)) => Ok(Some(Mixtures {
            mixtures: permute_mixtures(&m.mixtures, derive_seed(seed, &[TAG_PERMUTED_FIT])),
            labels: m.labels,
        })),
        (_, Some(m)) => Ok(Some(m)),
        (v, None) => Err(CliError::usage(format!("variant {} needs --mixtures", v.name()))),
    }
}

pub fn fit(args: &FitArgs, s: &Settings, threads: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new("fit", &args.out)?;
    let ds = load_data(&mut rec, &args.data)?;
    let loaded = match &args.mixtures {
        Some(p) if args.variant != Variant::Classic => Some(load_mixtures(&mut rec, p, args.labels.as_deref())?),
        _ => None,
    };
    let mix = fit_mixtures(args.variant, loaded, s.seed)?;
    let ckpt_path = args.out.join(CHECKPOINT);
    let resume = if args.resume {
        let c = Checkpoint::read(&ckpt_path)?;
        if c.seed != s.seed {
            return Err(CliError::usage(format!(
                "checkpoint was written with seed {}, not {}",
                c.seed, s.seed
            )));
        }
        Some(c)
    } else {
        None
    };
    let mut save = |c: &Checkpoint| c.write(&ckpt_path);
    let control = FitControl {
        variances: s.variances,
        resume,
        stop_after_sweeps: args.stop_after_sweeps,
        on_sweep: Some(&mut save),
        parallel: threads > 1,
    };
    let labels = mix.as_ref().map(|m| m.labels.clone()).unwrap_or_default();
    let outcome = fit_with(
        &ds,
        mix.as_ref().map(|m| m.mixtures.as_slice()),
        &s.hyperparams,
        &s.schedule,
        s.seed,
        control,
    )?;
    let res: FitResult = match outcome {
        FitOutcome::Stopped(c) => {
            c.write(&ckpt_path)?;
            println!("stopped after {} sweeps; checkpoint at {}", c.sweeps, ckpt_path.display());
            return Ok(());
        }
        FitOutcome::Finished(r) => r,
    };
    if !res.identified {
        log::warn!("sign identification skipped: the lawmakers file lacks Democrats or Republicans");
    }
    if !res.converged {
        log::warn!("reached max_sweeps = {} before convergence", s.schedule.max_sweeps);
    }
    let params = res.state.to_params();
    ParamsFile::from_params(&params, &labels, &s.hyperparams).write(&rec.output("params.json"))?;
    let trace: String = std::iter::once("sweep,elbo\n".to_string())
        .chain(res.elbo_trace.iter().enumerate().map(|(i, e)| format!("{},{e:?}\n", i + 1)))
        .collect();
    let trace_path = rec.output("trace.csv");
    std::fs::write(&trace_path, trace).map_err(|e| CliError::data(format!("{}: {e}", trace_path.display())))?;
    write_json(
        &rec.output("fit.json"),
        &FitSummaryFile {
            variant: args.variant.name().to_string(),
            k: params.k,
            sweeps: res.sweeps,
            converged: res.converged,
            identified: res.identified,
            final_m: res.final_m,
            skipped_updates: res.skipped_updates,
            final_elbo: res.elbo_trace.last().copied(),
        },
    )?;
    if let Some(m) = &mix {
        if args.variant == Variant::IssuePermuted {
            write_mixtures(&rec.output("permuted_mixtures.csv"), &m.mixtures)?;
        }
    }
    let _ = std::fs::remove_file(&ckpt_path);
    println!(
        "fit {}: {} sweeps, final ELBO {:.4}{}",
        args.variant.name(),
        res.sweeps,
        res.elbo_trace.last().copied().unwrap_or(f64::NAN),
        if res.converged { "" } else { " (not converged)" }
    );
    rec.finish(s)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SignificanceSection {
    pub replications: usize,
    pub with_intercept: bool,
    pub flags: Vec<NamedFlag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedFlag {
    pub lawmaker_id: String,
    pub issue: String,
    pub z_hat: f64,
    pub p_value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds: usize,
    pub rows: Vec<CvRow>,
    pub mean_loglik: BTreeMap<String, f64>,
    pub issue_variant: Option<String>,
    pub improvement: Vec<IssueImprovement>,
    pub improved_votes: Option<usize>,
    pub significance: Option<SignificanceSection>,
    pub discriminant: Option<DiscriminantReport>,
}

fn name_flags(flags: &[ExtremeFlag], labels: &[String]) -> Vec<NamedFlag> {
    flags
        .iter()
        .map(|f| NamedFlag {
            lawmaker_id: f.lawmaker_id.clone(),
            issue: labels[f.issue].clone(),
            z_hat: f.z_hat,
            p_value: f.p_value,
        })
        .collect()
}

pub fn evaluate(args: &EvaluateArgs, s: &Settings) -> Result<(), CliError> {
    let e = &s.evaluate;
    if e.folds < 2 {
        return Err(CliError::usage(format!("--folds must be at least 2, got {}", e.folds)));
    }
    let variants = &args.variants;
    if variants.is_empty() {
        return Err(CliError::usage("no variants requested"));
    }
    let mut rec = Recorder::new("evaluate", &args.out)?;
    let ds = load_data(&mut rec, &args.data)?;
    let issue = match &args.mixtures {
        Some(p) => Some(load_mixtures(&mut rec, p, args.labels.as_deref())?),
        None => None,
    };
    let direct = match &args.direct_mixtures {
        Some(p) => Some(load_mixtures(&mut rec, p, None)?),
        None => None,
    };
    let lda = match &args.lda_mixtures {
        Some(p) => Some(load_mixtures(&mut rec, p, None)?),
        None => None,
    };
    let mut inputs = Vec::new();
    for &v in variants {
        let source = match v {
            Variant::Classic => None,
            Variant::IssueLda | Variant::IssuePermuted => issue.as_ref(),
            Variant::IssueDirect => direct.as_ref(),
            Variant::StandardLda => lda.as_ref(),
        };
        inputs.push(match (v, source) {
            (Variant::Classic, _) => VariantInput::classic(),
            (_, Some(m)) => {
                let mut i = VariantInput::with_mixtures(v, m.mixtures.clone());
                i.permutations = e.permutations;
                i
            }
            (_, None) => {
                let flag = match v {
                    Variant::IssueDirect => "--direct-mixtures",
                    Variant::StandardLda => "--lda-mixtures",
                    _ => "--mixtures",
                };
                return Err(CliError::usage(format!("variant {} needs {flag}", v.name())));
            }
        });
    }

    let folds = split_folds(&ds, e.folds, s.seed)?;
    folds.write(&rec.output("folds.csv"))?;
    let cv = cross_validate(&ds, &inputs, &s.hyperparams, &s.schedule, &folds, s.seed)?;
    let mean_loglik: BTreeMap<String, f64> = variants
        .iter()
        .filter_map(|&v| cv.mean_loglik(v).map(|m| (v.name().to_string(), m)))
        .collect();

    let issue_variant = [Variant::IssueLda, Variant::IssueDirect, Variant::StandardLda]
        .into_iter()
        .find(|v| variants.contains(v));
    let issue_source = |v: Variant| match v {
        Variant::IssueDirect => direct.as_ref(),
        Variant::StandardLda => lda.as_ref(),
        _ => issue.as_ref(),
    };
    let (mut improvement, mut improved) = (Vec::new(), None);
    if let (Some(v), true) = (issue_variant, variants.contains(&Variant::Classic)) {
        let m = issue_source(v).expect("checked above");
        let ll = cv.vote_logliks(v, &m.mixtures);
        improvement = improvement_from_logliks(&ll, &m.mixtures, &m.labels);
        improved = Some(improved_votes(&ll));
    }

    let (mut significance, mut discriminant) = (None, None);
    if let Some(v) = issue_variant {
        let m = issue_source(v).expect("checked above");
        if e.significance_permutations > 0 {
            let rep = permutation_significance(
                &ds,
                &m.mixtures,
                &s.hyperparams,
                &s.schedule,
                e.significance_permutations,
                s.seed,
                e.with_intercept,
            )?;
            significance = Some(SignificanceSection {
                replications: rep.replications,
                with_intercept: e.with_intercept,
                flags: name_flags(&rep.flags, &m.labels),
            });
        }
        let full = issuepoint::inference::fit(
            &ds,
            Some(&m.mixtures),
            &s.hyperparams,
            &s.schedule,
            derive_seed(s.seed, &[TAG_FULL_FIT]),
        )?;
        let params = full.state.to_params();
        ParamsFile::from_params(&params, &m.labels, &s.hyperparams).write(&rec.output("params_full.json"))?;
        discriminant = Some(discriminant_with_baseline(&params, &ds.lawmakers, s, e.baseline_trials)?);
    }

    let report = EvaluationReport {
        folds: e.folds,
        rows: cv.rows.clone(),
        mean_loglik,
        issue_variant: issue_variant.map(|v| v.name().to_string()),
        improvement,
        improved_votes: improved,
        significance,
        discriminant,
    };
    write_json(&rec.output("report.json"), &report)?;
    let table: String = std::iter::once("variant,fold,mean_loglik,accuracy,evaluated,excluded,converged\n".to_string())
        .chain(cv.rows.iter().map(|r| {
            format!(
                "{},{},{:?},{:?},{},{},{}\n",
                r.variant.name(),
                r.fold,
                r.mean_loglik,
                r.accuracy,
                r.evaluated,
                r.excluded,
                r.converged
            )
        }))
        .collect();
    let table_path = rec.output("cv.csv");
    std::fs::write(&table_path, table).map_err(|e| CliError::data(format!("{}: {e}", table_path.display())))?;
    for (v, ll) in &report.mean_loglik {
        println!("{v:>16}  {ll:.4}");
    }
    rec.finish(s)?;
    Ok(())
}

fn discriminant_with_baseline(
    params: &ModelParams,
    lawmakers: &[Lawmaker],
    s: &Settings,
    trials: usize,
) -> Result<DiscriminantReport, CliError> {
    let mut d = party_discriminant(params, lawmakers)?;
    if trials >= 2 {
        let (m, sd) = random_adjustment_baseline(params, lawmakers, trials, derive_seed(s.seed, &[TAG_BASELINE]))?;
        d.baseline_mean = Some(m);
        d.baseline_sd = Some(sd);
    }
    Ok(d)
}

pub fn explore(args: &ExploreArgs, s: &Settings) -> Result<(), CliError> {
    let mut rec = Recorder::new("explore", &args.out)?;
    rec.input(&args.params)?;
    rec.input(&args.lawmakers)?;
    let file = ParamsFile::read(&args.params)?;
    let params = file.to_params()?;
    if params.k == 0 {
        return Err(CliError::usage("explore needs an issue-adjusted fit; these parameters are classical"));
    }
    let labels = if file.labels.len() == params.k {
        file.labels.clone()
    } else {
        (0..params.k).map(|j| format!("issue-{j}")).collect()
    };
    let lawmakers = issuepoint::corpus::read_lawmakers(&args.lawmakers)?;

    let issues: Vec<usize> = match &args.issue {
        Some(name) => match labels.iter().position(|l| l == name) {
            Some(j) => vec![j],
            None => {
                return Err(CliError::usage(format!(
                    "unknown issue `{name}`; valid issues: {}",
                    labels.join(", ")
                )))
            }
        },
        None => (0..params.k).collect(),
    };
    write_parallel_plot(&rec.output("parallel.csv"), &params, &lawmakers, &labels, &issues)?;
    let corrected = corrected_adjustments(&params, s.evaluate.with_intercept)?;
    write_histograms(&rec.output("histograms.csv"), &corrected, &lawmakers, &labels, s.evaluate.bins.max(1))?;
    let d = discriminant_with_baseline(&params, &lawmakers, s, s.evaluate.baseline_trials)?;
    write_json(&rec.output("discriminant.json"), &d)?;

    let flags: Vec<NamedFlag> = match &args.report {
        Some(p) => {
            rec.input(p)?;
            let r: EvaluationReport = read_json(p)?;
            r.significance.map(|s| s.flags).unwrap_or_default()
        }
        None => Vec::new(),
    };
    if let Some(id) = &args.lawmaker {
        let u = params
            .lawmaker_ids
            .iter()
            .position(|l| l == id)
            .ok_or_else(|| CliError::usage(format!("unknown lawmaker `{id}`")))?;
        let mut out = String::from("issue,z,z_hat,flagged,p_value\n");
        println!("{id}: x = {:.4}", params.x[u]);
        for (j, label) in labels.iter().enumerate() {
            let flag = flags.iter().find(|f| &f.lawmaker_id == id && &f.issue == label);
            let z_hat = corrected.residual(u, j);
            let z = params.z[u * params.k + j];
            let p = flag.map_or(String::new(), |f| format!("{:?}", f.p_value));
            out.push_str(&format!("{label},{z:?},{z_hat:?},{},{p}\n", flag.is_some()));
            if let Some(f) = flag {
                println!("  {label}: z_hat = {z_hat:+.4} (p = {:.3})", f.p_value);
            }
        }
        if args.report.is_none() {
            log::warn!("no --report given; flags are unavailable and only adjustments are written");
        }
        let path = rec.output("lawmaker.csv");
        std::fs::write(&path, out).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    rec.finish(s)?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let path: PathBuf = if args.manifest.is_dir() { args.manifest.join(manifest::FILE_NAME) } else { args.manifest.clone() };
    let bad = manifest::verify(&path)?;
    if bad.is_empty() {
        println!("ok: every recorded file matches {}", path.display());
        Ok(())
    } else {
        Err(CliError::data(format!("hash mismatch or missing file: {}", bad.join(", "))))
    }
}
