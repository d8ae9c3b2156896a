use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use exiffi_core::ablation::{
    log_grid, sweep_contamination, sweep_forest_parameter, sweep_trees, ContaminationMetric, ForestParameter,
    SweepResult,
};
use exiffi_core::forest::{quantile, write_model};
use exiffi_core::metrics::precision_of_predictions;
use exiffi_core::seeds::derive_seed;
use exiffi_core::synth::gaussian_noise;
use exiffi_core::{
    average_precision, generate, global_importance, global_importance_runs, load_csv, load_model,
    local_importance, local_importance_batch, local_scoremap, precision_at_contamination,
    profile_dependencies, roc_auc, run_feature_selection, split, Contamination, Dataset, Forest,
    GfiResult, MetricReport, Mode, OutlierSet, SynthSpec,
};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{header, Run};

fn load(run: &mut Run, path: &Path, label_col: Option<&str>) -> CliResult<Dataset<f64>> {
    run.input(path)?;
    Ok(load_csv(path, label_col)?)
}

fn train_test(run: &mut Run, input: &InputArgs, s: &SplitArgs, seed: u64) -> CliResult<(Dataset<f64>, Dataset<f64>)> {
    let d = load(run, &input.input, input.label_col.as_deref())?;
    match &s.test {
        Some(test) => {
            let t = load(run, test, input.label_col.as_deref())?;
            if t.n_features() != d.n_features() {
                return Err(exiffi_core::Error::Shape {
                    expected: d.n_features(),
                    got: t.n_features(),
                }
                .into());
            }
            Ok((d, t))
        }
        None => Ok(split(&d, s.train_fraction, seed, s.split.into())?),
    }
}

fn seed_list(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|s| derive_seed(base, s)).collect()
}

fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::If => "IF",
        Mode::Eif => "EIF",
        Mode::EifPlus => "EIF+",
    }
}

pub fn synth(run: &mut Run, a: &SynthArgs) -> CliResult<()> {
    let mut spec = SynthSpec::new(a.kind.into())
        .with_seed(a.seed)
        .with_noise_features(a.noise_features);
    spec.n_inliers = a.n_inliers;
    spec.n_outliers = a.n_outliers;
    run.seeds.push(a.seed);
    let d = generate::<f64>(&spec)?;
    let name = format!("{}.csv", spec.kind);
    let path = run.path(&name);
    d.write_csv(&path, "label")?;
    run.outputs.push(name);
    run.json("synth.json", &spec)?;
    println!("{}: {} rows, {} features", path.display(), d.n_samples(), d.n_features());
    Ok(())
}

pub fn profile(run: &mut Run, a: &ProfileArgs) -> CliResult<()> {
    let d = load(run, &a.input.input, a.input.label_col.as_deref())?;
    let prof = run.time("profile", || profile_dependencies(&d, a.corr_threshold, a.mi_bins))?;
    run.json("profile.json", &prof)?;
    let names = prof.feature_names.clone();
    run.csv("pearson.csv", &names, &prof.pearson)?;
    run.csv("mutual_info.csv", &names, &prof.mutual_info)?;
    println!(
        "{} features: {:.3} of pairs weakly correlated, {:.3} with nonzero MI among those",
        names.len(),
        prof.frac_low_corr,
        prof.frac_nonlinear
    );
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    model: String,
    n_train: usize,
    n_test: usize,
    n_features: usize,
    threshold: Option<f64>,
    metrics: Option<MetricReport>,
    no_positive_predictions: Option<bool>,
}

pub fn fit(run: &mut Run, a: &FitArgs) -> CliResult<()> {
    let params = a.forest.params();
    let (train, test) = train_test(run, &a.input, &a.split, params.seed)?;
    run.seeds.push(params.seed);
    let fit_start = Instant::now();
    let forest = run.time("fit", || Forest::fit(&train, &params))?;
    let fit_time_s = fit_start.elapsed().as_secs_f64();
    run.bytes("model.bin", &write_model(&forest))?;

    let predict_start = Instant::now();
    let scores = run.time("predict", || forest.score_batch(&test))?;
    let predictions = forest
        .threshold()
        .map(|t| scores.iter().map(|&s| u8::from(s > t)).collect::<Vec<u8>>());
    let predict_time_s = predict_start.elapsed().as_secs_f64();

    let labels = test.labels().filter(|l| l.contains(&0) && l.contains(&1));
    let mut metrics = None;
    let mut no_positive = None;
    if let Some(labels) = labels {
        let precision = match &predictions {
            Some(p) => precision_of_predictions(p, labels),
            None => {
                let c = test.prevalence().unwrap_or(0.0).min(0.5);
                precision_at_contamination(&scores, labels, c)?
            }
        };
        no_positive = Some(precision.no_positive_predictions);
        metrics = Some(MetricReport {
            average_precision: average_precision(&scores, labels)?,
            precision: precision.precision,
            roc_auc: roc_auc(&scores, labels)?,
            fit_time_s,
            predict_time_s,
        });
    }

    let mut header = header(&["row", "score"]);
    if predictions.is_some() {
        header.push("prediction".into());
    }
    if test.labels().is_some() {
        header.push("label".into());
    }
    let rows: Vec<Vec<f64>> = (0..test.n_samples())
        .map(|i| {
            let mut r = vec![i as f64, scores[i]];
            if let Some(p) = &predictions {
                r.push(f64::from(p[i]));
            }
            if let Some(l) = test.labels() {
                r.push(f64::from(l[i]));
            }
            r
        })
        .collect();
    run.csv("scores.csv", &header, &rows)?;
    run.json(
        "report.json",
        &FitReport {
            model: mode_label(params.mode).into(),
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            n_features: train.n_features(),
            threshold: forest.threshold(),
            metrics: metrics.clone(),
            no_positive_predictions: no_positive,
        },
    )?;
    match metrics {
        Some(m) => println!(
            "AP {:.4}  precision {:.4}  ROC AUC {:.4}  fit {:.3}s  predict {:.3}s",
            m.average_precision, m.precision, m.roc_auc, m.fit_time_s, m.predict_time_s
        ),
        None => println!("fitted {} trees; test set unlabelled, no metrics", forest.trees().len()),
    }
    Ok(())
}

#[derive(Serialize)]
struct LocalRow {
    row: usize,
    score: f64,
    lfi: Vec<f64>,
    raw: Vec<f64>,
    normalizer: Vec<f64>,
}

#[derive(Serialize)]
struct LocalReport {
    feature_names: Vec<String>,
    rows: Vec<LocalRow>,
}

#[derive(Serialize)]
struct GlobalReport<'a> {
    #[serde(flatten)]
    gfi: &'a GfiResult,
    outlier_source: &'static str,
    n_outliers: usize,
}

pub fn explain(run: &mut Run, a: &ExplainArgs) -> CliResult<()> {
    run.input(&a.model)?;
    let forest: Forest<f64> = load_model(&a.model)?;
    let d = load(run, &a.input.input, a.input.label_col.as_deref())?;
    if d.n_features() != forest.n_features() {
        return Err(exiffi_core::Error::Shape {
            expected: forest.n_features(),
            got: d.n_features(),
        }
        .into());
    }
    run.seeds.push(forest.params().seed);
    match a.kind {
        ExplainKind::Local => {
            let idx: Vec<usize> = match &a.rows {
                Some(r) => r.clone(),
                None => (0..d.n_samples()).collect(),
            };
            if let Some(&bad) = idx.iter().find(|&&i| i >= d.n_samples()) {
                return Err(CliError::Usage(format!("row {bad} out of range for {} rows", d.n_samples())));
            }
            let sel = d.select_rows(&idx);
            let imps = run.time("explain", || local_importance_batch(&forest, &sel))?;
            let scores = forest.score_batch(&sel)?;
            let mut head = header(&["row", "score"]);
            head.extend(d.feature_names().iter().map(|n| format!("lfi_{n}")));
            let rows: Vec<Vec<f64>> = idx
                .iter()
                .zip(&imps)
                .zip(&scores)
                .map(|((&i, imp), &s)| {
                    let mut r = vec![i as f64, s];
                    r.extend(&imp.lfi);
                    r
                })
                .collect();
            run.csv("lfi.csv", &head, &rows)?;
            let report = LocalReport {
                feature_names: d.feature_names().to_vec(),
                rows: idx
                    .iter()
                    .zip(imps)
                    .zip(&scores)
                    .map(|((&row, imp), &score)| LocalRow {
                        row,
                        score,
                        lfi: imp.lfi,
                        raw: imp.raw,
                        normalizer: imp.normalizer,
                    })
                    .collect(),
            };
            run.json("local.json", &report)?;
            println!("explained {} rows", idx.len());
        }
        ExplainKind::Global => {
            let (mask, source) = match (a.outlier_fraction, d.labels(), forest.threshold()) {
                (Some(c), _, _) => {
                    let mut calibrated = forest.clone();
                    calibrated.calibrate(&d, c)?;
                    (calibrated.predict(&d)?, "outlier_fraction")
                }
                (None, Some(l), _) => (l.to_vec(), "labels"),
                (None, None, Some(_)) => (forest.predict(&d)?, "model_threshold"),
                (None, None, None) => {
                    return Err(CliError::Usage(
                        "no outlier set: pass --label-col or --outlier-fraction, or use a calibrated model".into(),
                    ))
                }
            };
            let g = run.time("explain", || global_importance(&forest, &d, &mask))?;
            let top: Vec<Vec<f64>> = g
                .top_k(a.top_k)
                .iter()
                .enumerate()
                .map(|(rank, &(j, _, s))| vec![(rank + 1) as f64, j as f64, s])
                .collect();
            run.csv("gfi_top.csv", &header(&["rank", "feature", "score"]), &top)?;
            run.json(
                "gfi.json",
                &GlobalReport {
                    gfi: &g,
                    outlier_source: source,
                    n_outliers: mask.iter().filter(|&&m| m == 1).count(),
                },
            )?;
            for (j, name, s) in g.top_k(a.top_k.min(5)) {
                println!("{j:>4}  {name:<20} {s:.4}");
            }
        }
        ExplainKind::Scoremap => {
            let map = run.time("explain", || local_scoremap(&forest, &d, a.feat_i, a.feat_j, a.grid))?;
            let mut rows = Vec::with_capacity(a.grid * a.grid);
            for (ia, &x) in map.xs.iter().enumerate() {
                for (ib, &y) in map.ys.iter().enumerate() {
                    rows.push(vec![x, y, map.lfi_i[ia][ib], map.lfi_j[ia][ib]]);
                }
            }
            run.csv("scoremap.csv", &header(&["x_i", "x_j", "lfi_i", "lfi_j"]), &rows)?;
            run.json("scoremap.json", &map)?;
            println!("{0}x{0} scoremap over features {1} and {2}", a.grid, a.feat_i, a.feat_j);
        }
    }
    Ok(())
}

fn read_ranking(run: &mut Run, path: &Path, p: usize) -> CliResult<Vec<usize>> {
    let r: Dataset<f64> = load(run, path, None)?;
    if r.n_features() != 1 {
        return Err(CliError::Data(format!(
            "{}: ranking CSV needs exactly one column, got {}",
            path.display(),
            r.n_features()
        )));
    }
    let ranking = r
        .values()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < p as f64 {
                Ok(v as usize)
            } else {
                Err(CliError::Data(format!("{}: {v} is not a feature index below {p}", path.display())))
            }
        })
        .collect::<CliResult<Vec<usize>>>()?;
    Ok(ranking)
}

#[derive(Serialize)]
struct FsReport<'a> {
    #[serde(flatten)]
    fs: &'a exiffi_core::FsResult,
    ranking_source: &'static str,
    gfi: Option<GfiResult>,
}

fn outlier_set(d: &Dataset<f64>, c: Contamination) -> CliResult<OutlierSet> {
    match (d.labels(), c) {
        (Some(_), _) => Ok(OutlierSet::Labels),
        (None, Contamination::Fixed(c)) => Ok(OutlierSet::Contamination(c)),
        (None, Contamination::Auto) => Err(CliError::Usage(
            "GFI ranking needs training labels or a fixed --contamination".into(),
        )),
    }
}

pub fn fs(run: &mut Run, a: &FsArgs) -> CliResult<()> {
    let params = a.forest.params();
    let (train, test) = train_test(run, &a.input, &a.split, params.seed)?;
    run.seeds = seed_list(params.seed, a.seeds);
    let (ranking, gfi) = match &a.ranking {
        Some(path) => (read_ranking(run, path, train.n_features())?, None),
        None => {
            let outliers = outlier_set(&train, params.contamination)?;
            let g = run.time("gfi", || global_importance_runs(&train, &train, &params, &outliers, a.seeds))?;
            (g.ranking.clone(), Some(g))
        }
    };
    let r = run.time("fs", || run_feature_selection(&train, &test, &params, &ranking, a.seeds))?;
    let rows: Vec<Vec<f64>> = r
        .direct
        .points
        .iter()
        .zip(&r.inverse.points)
        .zip(&r.random.points)
        .map(|((d, i), x)| vec![d.n_features as f64, d.mean_ap, d.std_ap, i.mean_ap, i.std_ap, x.mean_ap, x.std_ap])
        .collect();
    run.csv(
        "fs_curves.csv",
        &header(&["n_features", "direct_mean", "direct_std", "inverse_mean", "inverse_std", "random_mean", "random_std"]),
        &rows,
    )?;
    let rank_rows: Vec<Vec<f64>> = ranking.iter().enumerate().map(|(k, &j)| vec![(k + 1) as f64, j as f64]).collect();
    run.csv("ranking.csv", &header(&["rank", "feature"]), &rank_rows)?;
    run.json(
        "fs.json",
        &FsReport {
            fs: &r,
            ranking_source: if a.ranking.is_some() { "file" } else { "gfi" },
            gfi,
        },
    )?;
    println!("AUC_FS {:.4} (random {:.4})", r.auc_fs, r.auc_fs_random);
    Ok(())
}

fn integer_values(values: &[f64]) -> CliResult<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Usage(format!("{v} is not a positive integer")))
            }
        })
        .collect()
}

#[derive(Serialize)]
struct AblationReport<'a> {
    #[serde(flatten)]
    sweep: &'a SweepResult,
    argmax: usize,
    /// Centre of the default contamination grid.
    center: Option<f64>,
}

pub fn ablate(run: &mut Run, a: &AblateArgs) -> CliResult<()> {
    let params = a.forest.params();
    let (train, test) = train_test(run, &a.input, &a.split, params.seed)?;
    run.seeds = seed_list(params.seed, a.seeds);
    let mut center = None;
    let sweep = match a.param {
        AblateParam::Contamination => {
            let values = match &a.values {
                Some(v) => v.clone(),
                None => {
                    let c = match (train.prevalence(), params.contamination) {
                        (Some(c), _) if c > 0.0 => c,
                        (_, Contamination::Fixed(c)) => c,
                        _ => {
                            return Err(CliError::Usage(
                                "contamination grid needs training labels or a fixed --contamination".into(),
                            ))
                        }
                    };
                    center = Some(c);
                    log_grid(c, 8.0, 9)
                }
            };
            let metric = match a.metric {
                AblateMetric::RocAuc => ContaminationMetric::RocAuc,
                AblateMetric::AucFs => ContaminationMetric::AucFs,
            };
            run.time("sweep", || {
                sweep_contamination(&train, &test, &params, &values, a.seeds, metric, a.fs_seeds)
            })?
        }
        other => {
            let (parameter, default) = match other {
                AblateParam::Trees => (ForestParameter::Trees, vec![10, 30, 100, 300]),
                AblateParam::MaxDepth => (ForestParameter::MaxDepth, vec![2, 4, 6, 8, 10, 12]),
                _ => (ForestParameter::SampleSize, vec![32, 64, 128, 256, 512]),
            };
            let values = match &a.values {
                Some(v) => integer_values(v)?,
                None => default,
            };
            run.time("sweep", || {
                if parameter == ForestParameter::Trees {
                    sweep_trees(&train, &test, &params, &values, a.seeds)
                } else {
                    sweep_forest_parameter(&train, &test, &params, parameter, &values, a.seeds)
                }
            })?
        }
    };
    let rows: Vec<Vec<f64>> = (0..sweep.values.len())
        .map(|i| vec![sweep.values[i], sweep.mean[i], sweep.std[i]])
        .collect();
    run.csv("ablation.csv", &header(&["parameter_value", "mean", "std"]), &rows)?;
    let mut runs_head = header(&["parameter_value"]);
    runs_head.extend((0..a.seeds).map(|s| format!("seed_{s}")));
    let run_rows: Vec<Vec<f64>> = sweep
        .values
        .iter()
        .zip(&sweep.runs)
        .map(|(&v, r)| std::iter::once(v).chain(r.iter().copied()).collect())
        .collect();
    run.csv("ablation_runs.csv", &runs_head, &run_rows)?;
    run.json(
        "ablation.json",
        &AblationReport {
            sweep: &sweep,
            argmax: sweep.argmax(),
            center,
        },
    )?;
    for i in 0..sweep.values.len() {
        println!("{:>12.6}  {:.4} +- {:.4}", sweep.values[i], sweep.mean[i], sweep.std[i]);
    }
    Ok(())
}

#[derive(Serialize)]
struct Phase {
    median_s: f64,
    p95_s: f64,
    samples_s: Vec<f64>,
}

impl Phase {
    fn new(samples: Vec<f64>) -> Self {
        Phase {
            median_s: quantile(&samples, 0.5),
            p95_s: quantile(&samples, 0.95),
            samples_s: samples,
        }
    }
}

#[derive(Serialize)]
struct TableRow {
    model: String,
    fit_time_s: Option<f64>,
    predict_time_s: f64,
    explanation_time_s: f64,
}

#[derive(Serialize)]
struct BenchReport {
    n_samples: usize,
    n_features: usize,
    n_trees: usize,
    sample_size: usize,
    repeats: usize,
    explained_row: usize,
    fit: Option<Phase>,
    predict: Phase,
    explain_single: Phase,
    table_row: TableRow,
}

fn time_repeats<R>(repeats: usize, mut f: impl FnMut() -> CliResult<R>) -> CliResult<(Vec<f64>, R)> {
    let mut samples = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let out = black_box(f()?);
        samples.push(start.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((samples, last.expect("at least one repeat")))
}

pub fn bench(run: &mut Run, a: &BenchArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let params = a.forest.params();
    run.seeds.push(params.seed);
    let d = match &a.input {
        Some(path) => load(run, path, a.label_col.as_deref())?,
        None => gaussian_noise::<f64>(a.random_rows, a.random_cols, params.seed)?,
    };
    let (fit, forest) = match &a.model {
        Some(path) => {
            run.input(path)?;
            let f: Forest<f64> = load_model(path)?;
            if f.n_features() != d.n_features() {
                return Err(exiffi_core::Error::Shape {
                    expected: f.n_features(),
                    got: d.n_features(),
                }
                .into());
            }
            (None, f)
        }
        None => {
            let (samples, f) = time_repeats(a.repeats, || Ok(Forest::grow(&d, &params)?))?;
            (Some(Phase::new(samples)), f)
        }
    };
    let (predict, scores) = time_repeats(a.repeats, || Ok(forest.score_batch(&d)?))?;
    let target = (0..scores.len())
        .max_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(j.cmp(&i)))
        .expect("non-empty data");
    let x = d.row(target);
    let (explain, _) = time_repeats(a.repeats, || Ok(local_importance(&forest, black_box(x))?))?;
    let (predict, explain) = (Phase::new(predict), Phase::new(explain));
    for (k, v) in [("fit", fit.as_ref()), ("predict", Some(&predict)), ("explain_single", Some(&explain))] {
        if let Some(ph) = v {
            run.timings.insert(k.into(), ph.samples_s.iter().sum());
        }
    }
    let report = BenchReport {
        n_samples: d.n_samples(),
        n_features: d.n_features(),
        n_trees: forest.trees().len(),
        sample_size: forest.sample_size(),
        repeats: a.repeats,
        explained_row: target,
        table_row: TableRow {
            model: mode_label(forest.params().mode).into(),
            fit_time_s: fit.as_ref().map(|p| p.median_s),
            predict_time_s: predict.median_s,
            explanation_time_s: explain.median_s,
        },
        fit,
        predict,
        explain_single: explain,
    };
    run.json("bench.json", &report)?;
    println!(
        "median: fit {}  predict {:.4}s  single-sample LFI {:.6}s",
        report.fit.as_ref().map_or("-".to_string(), |p| format!("{:.3}s", p.median_s)),
        report.predict.median_s,
        report.explain_single.median_s
    );
    Ok(())
}
