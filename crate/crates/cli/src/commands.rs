use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use geoprior::domain::RawRow;
use geoprior::encode::FeatureConvention;
use geoprior::fusion::{fuse_file, ProbMatrix, DEFAULT_EPSILON};
use geoprior::geonet::{
    init_network, load_checkpoint, save_checkpoint, train_samples, CrlSettings, GeoNetConfig, SampleOrder,
    TrainOptions, TrainSet,
};
use geoprior::imbalance::{
    alpha_schedule, class_counts, class_weights, cluster_oversample, minority_classes, per_sample_weights,
    random_oversample, random_undersample, smote_oversample, PlanKind, PlanSource, ResamplePlan, WeightKind,
    WeightScheme, DEFAULT_SMOTE_K,
};
use geoprior::io;
use geoprior::metrics::{eval_report, Averaging};
use geoprior::synth::{describe_generator, generate_dataset, SynthSpec};
use geoprior::{validate_dataset, Dataset, Error, Result};
use serde::{Deserialize, Serialize};

use crate::settings::echo;

pub const OUT_DIR_ENV: &str = "GEOPRIOR_OUT_DIR";

pub const CONFIG_ECHO: &str = "config.toml";

/// `--out` joined under `GEOPRIOR_OUT_DIR` when that is set; the variable
/// alone is enough when `--out` is omitted.
pub fn output_dir(out: Option<&Path>) -> Result<PathBuf> {
    let base = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let dir = match (base, out) {
        (Some(b), Some(o)) => b.join(o),
        (Some(b), None) => b,
        (None, Some(o)) => o.to_path_buf(),
        (None, None) => {
            return Err(Error::InvalidConfig(format!("--out is required unless {OUT_DIR_ENV} is set")));
        }
    };
    fs::create_dir_all(&dir).map_err(|e| geoprior::io::with_path(&dir, e))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    geoprior::io::write_text(&dir.join(name), contents)
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
pub struct SynthFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confusable species pairs; the class count is twice this.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Power-law imbalance exponent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Range spread in degrees.
    #[arg(long)]
    pub geo_sigma: Option<f64>,
    /// Minimum distance between range centers, in units of geo_sigma.
    #[arg(long)]
    pub pair_separation: Option<f64>,
    /// Seasonal window standard deviation in days.
    #[arg(long)]
    pub season_width: Option<f64>,
    /// Image-model mass on the pair partner.
    #[arg(long)]
    pub image_confusion: Option<f64>,
    /// Dirichlet concentration of the image-model jitter.
    #[arg(long)]
    pub image_concentration: Option<f64>,
    /// Exponent on the training frequency absorbed by the image model.
    #[arg(long)]
    pub image_prior_tilt: Option<f64>,
}

pub fn synth(flags: SynthFlags, out: Option<&Path>) -> Result<()> {
    let d = SynthSpec::default();
    let spec = SynthSpec {
        n_pairs: flags.pairs.unwrap_or(d.n_pairs),
        n_train: flags.n_train.unwrap_or(d.n_train),
        n_test: flags.n_test.unwrap_or(d.n_test),
        imbalance_gamma: flags.gamma.unwrap_or(d.imbalance_gamma),
        geo_sigma: flags.geo_sigma.unwrap_or(d.geo_sigma),
        pair_separation: flags.pair_separation.unwrap_or(d.pair_separation),
        season_width: flags.season_width.unwrap_or(d.season_width),
        image_confusion: flags.image_confusion.unwrap_or(d.image_confusion),
        image_concentration: flags.image_concentration.unwrap_or(d.image_concentration),
        image_prior_tilt: flags.image_prior_tilt.unwrap_or(d.image_prior_tilt),
        seed: flags.seed.unwrap_or(d.seed),
    };
    let output = generate_dataset(&spec)?;
    let dir = output_dir(out)?;
    io::write_observations(&output.train, dir.join("train.csv"))?;
    io::write_observations(&output.test, dir.join("test.csv"))?;
    io::write_prob_matrix(&output.image_probs, dir.join("image_probs.csv"))?;
    write(&dir, "generator.txt", &describe_generator(&output))?;
    let resolved = SynthFlags {
        seed: Some(spec.seed),
        pairs: Some(spec.n_pairs),
        n_train: Some(spec.n_train),
        n_test: Some(spec.n_test),
        gamma: Some(spec.imbalance_gamma),
        geo_sigma: Some(spec.geo_sigma),
        pair_separation: Some(spec.pair_separation),
        season_width: Some(spec.season_width),
        image_confusion: Some(spec.image_confusion),
        image_concentration: Some(spec.image_concentration),
        image_prior_tilt: Some(spec.image_prior_tilt),
    };
    write(&dir, CONFIG_ECHO, &echo("synth", &resolved)?)
}

/// Imbalance handling during prior training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    None,
    Weights(WeightKind),
    Sampler(WeightKind),
    Smote,
    Cluster,
    Crl,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidConfig(format!(
                "unknown strategy {s:?}; expected none, weights:inverse, weights:inverse_log, \
                 sampler:inverse, sampler:inverse_log, smote, cluster or crl"
            ))
        };
        Ok(match s.split_once(':') {
            Some(("weights", kind)) => Strategy::Weights(kind.parse().map_err(|_| bad())?),
            Some(("sampler", kind)) => Strategy::Sampler(kind.parse().map_err(|_| bad())?),
            Some(_) => return Err(bad()),
            None => match s {
                "none" => Strategy::None,
                "smote" => Strategy::Smote,
                "cluster" => Strategy::Cluster,
                "crl" => Strategy::Crl,
                _ => return Err(bad()),
            },
        })
    }
}

pub const DEFAULT_CLUSTERS: usize = 3;
pub const DEFAULT_CRL_ETA: f64 = 1.0;
pub const DEFAULT_CRL_MARGIN: f64 = 0.2;
pub const DEFAULT_MINORITY_FRACTION: f64 = 0.5;

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
pub struct TrainFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Per-epoch multiplicative learning-rate decay.
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// lat-lon-date or lat-lon.
    #[arg(long)]
    pub features: Option<String>,
    /// none | weights:inverse | weights:inverse_log | sampler:inverse |
    /// sampler:inverse_log | smote | cluster | crl
    #[arg(long)]
    pub strategy: Option<String>,
    /// Upper bound on any class weight.
    #[arg(long)]
    pub weight_cap: Option<f64>,
    /// Enables MixUp with Beta(a, a) mixing coefficients.
    #[arg(long)]
    pub mixup_alpha: Option<f64>,
    /// Scale of the per-class CRL weight clamp(eta (1 - n_c / n_max), 0, 1).
    #[arg(long)]
    pub crl_eta: Option<f64>,
    #[arg(long)]
    pub crl_margin: Option<f64>,
    /// Smallest classes holding at most this share of the data anchor triplets.
    #[arg(long)]
    pub crl_minority_fraction: Option<f64>,
    #[arg(long)]
    pub smote_k: Option<usize>,
    /// k-means clusters per class for cluster oversampling.
    #[arg(long)]
    pub clusters: Option<usize>,
}

fn encoded_rows(set: &TrainSet) -> Vec<Vec<f64>> {
    set.features.iter().map(|f| f.0.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> TrainSet {
    let features = rows
        .into_iter()
        .map(|r| geoprior::encode::EncodedFeatures(r.try_into().expect("encoded rows have six values")))
        .collect();
    TrainSet { features, labels }
}

pub fn train_geo(flags: TrainFlags, train_path: &Path, val_path: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let train = io::read_observations(train_path)?;
    let val = val_path.map(|p| io::read_observations_with(p, train.vocabulary())).transpose()?;
    let c = train.vocabulary().len();
    let d = GeoNetConfig::new(c);
    let seed = flags.seed.unwrap_or(0);
    let cfg = GeoNetConfig {
        hidden_width: flags.hidden_width.unwrap_or(d.hidden_width),
        epochs: flags.epochs.unwrap_or(d.epochs),
        batch_size: flags.batch_size.unwrap_or(d.batch_size),
        learning_rate: flags.lr.unwrap_or(d.learning_rate),
        momentum: flags.momentum.unwrap_or(d.momentum),
        lr_decay: flags.lr_decay.unwrap_or(d.lr_decay),
        seed,
        ..d
    };
    let features_name = flags.features.clone().unwrap_or_else(|| FeatureConvention::LatLonDate.to_string());
    let convention: FeatureConvention = features_name.parse()?;
    let strategy_name = flags.strategy.clone().unwrap_or_else(|| "none".into());
    let strategy: Strategy = strategy_name.parse()?;
    let smote_k = flags.smote_k.unwrap_or(DEFAULT_SMOTE_K);
    let clusters = flags.clusters.unwrap_or(DEFAULT_CLUSTERS);
    let crl_eta = flags.crl_eta.unwrap_or(DEFAULT_CRL_ETA);
    let crl_margin = flags.crl_margin.unwrap_or(DEFAULT_CRL_MARGIN);
    let minority_fraction = flags.crl_minority_fraction.unwrap_or(DEFAULT_MINORITY_FRACTION);

    let net = init_network(cfg, train.vocabulary().clone(), convention)?;
    let mut data = TrainSet::from_dataset(&train, &net);
    let val_set = val.as_ref().map(|v| TrainSet::from_dataset(v, &net));
    let counts = class_counts(&train);
    let mut opts = TrainOptions { mixup_alpha: flags.mixup_alpha, sampler_seed: seed, ..Default::default() };
    let scheme = |kind| WeightScheme { kind, cap: flags.weight_cap };
    match strategy {
        Strategy::None => {}
        Strategy::Weights(kind) => opts.class_weights = Some(class_weights(&counts, scheme(kind))?),
        Strategy::Sampler(kind) => {
            let w = class_weights(&counts, scheme(kind))?;
            opts.order = SampleOrder::Weighted(per_sample_weights(&data.labels, &w));
        }
        Strategy::Smote => {
            let plan = smote_oversample(&encoded_rows(&data), &data.labels, c, smote_k, seed)?;
            let (rows, labels) = plan.apply(&encoded_rows(&data));
            data = from_rows(rows, labels);
        }
        Strategy::Cluster => {
            let plan = cluster_oversample(&encoded_rows(&data), &data.labels, c, clusters, seed)?;
            let (rows, labels) = plan.apply(&encoded_rows(&data));
            data = from_rows(rows, labels);
        }
        Strategy::Crl => {
            opts.crl = Some(CrlSettings {
                alpha: alpha_schedule(&counts, crl_eta),
                margin: crl_margin,
                minority: minority_classes(&counts, minority_fraction),
            })
        }
    }
    let (net, history) = train_samples(net, &data, val_set.as_ref(), &opts)?;

    let dir = output_dir(out)?;
    save_checkpoint(&net, dir.join("model.json"))?;
    write(&dir, "history.csv", &history.to_csv())?;
    let uses = |s: &[&str]| s.iter().any(|p| strategy_name.starts_with(p));
    let resolved = TrainFlags {
        seed: Some(seed),
        hidden_width: Some(cfg.hidden_width),
        epochs: Some(cfg.epochs),
        batch_size: Some(cfg.batch_size),
        lr: Some(cfg.learning_rate),
        momentum: Some(cfg.momentum),
        lr_decay: Some(cfg.lr_decay),
        features: Some(features_name),
        strategy: Some(strategy_name.clone()),
        weight_cap: flags.weight_cap,
        mixup_alpha: flags.mixup_alpha,
        crl_eta: uses(&["crl"]).then_some(crl_eta),
        crl_margin: uses(&["crl"]).then_some(crl_margin),
        crl_minority_fraction: uses(&["crl"]).then_some(minority_fraction),
        smote_k: uses(&["smote"]).then_some(smote_k),
        clusters: uses(&["cluster"]).then_some(clusters),
    };
    write(&dir, CONFIG_ECHO, &echo("train-geo", &resolved)?)
}

pub fn predict_geo(model: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let net = load_checkpoint(model)?;
    let data = io::read_observations_with(input, net.vocabulary())?;
    let mut probs = ProbMatrix::new(net.vocabulary().clone());
    for obs in data.observations() {
        probs.push(obs.obs_id.clone(), net.predict(obs))?;
    }
    let dir = output_dir(out)?;
    io::write_prob_matrix(&probs, dir.join("geo_probs.csv"))?;
    write(&dir, CONFIG_ECHO, &echo("predict-geo", &toml::Table::new())?)
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
pub struct FuseFlags {
    /// Probability floor applied before multiplying.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

pub fn fuse(flags: FuseFlags, image: &Path, geo: &Path, out: Option<&Path>) -> Result<()> {
    let epsilon = flags.epsilon.unwrap_or(DEFAULT_EPSILON);
    let fused = fuse_file(&io::read_prob_matrix(image)?, &io::read_prob_matrix(geo)?, epsilon)?;
    let dir = output_dir(out)?;
    io::write_prob_matrix(&fused, dir.join("fused_probs.csv"))?;
    write(&dir, CONFIG_ECHO, &echo("fuse", &FuseFlags { epsilon: Some(epsilon) })?)
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
pub struct EvalFlags {
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',')]
    pub topk: Option<Vec<usize>>,
    /// Comma-separated subset of micro,macro.
    #[arg(long, value_delimiter = ',')]
    pub average: Option<Vec<String>>,
}

pub fn eval(flags: EvalFlags, probs: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let ks = flags.topk.unwrap_or_else(|| vec![1, 3]);
    let averages = flags.average.unwrap_or_else(|| vec!["micro".into(), "macro".into()]);
    let parsed = averages.iter().map(|a| a.parse()).collect::<Result<Vec<Averaging>>>()?;
    let probs = io::read_prob_matrix(probs)?;
    let truth = io::read_observations_with(truth, probs.vocabulary())?;
    let report = eval_report(&probs, &truth, &ks, &parsed)?;
    let dir = output_dir(out)?;
    write(&dir, "report.txt", &report.to_text())?;
    write(&dir, "per_class.csv", &report.to_csv()?)?;
    write(&dir, CONFIG_ECHO, &echo("eval", &EvalFlags { topk: Some(ks), average: Some(averages) })?)
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
pub struct ResampleFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// weights | oversample | undersample | smote | cluster
    #[arg(long)]
    pub method: Option<String>,
    /// Weight scheme for --method weights: inverse or inverse_log.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub weight_cap: Option<f64>,
    #[arg(long)]
    pub smote_k: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Feature encoding for smote and cluster: lat-lon-date or lat-lon.
    #[arg(long)]
    pub features: Option<String>,
}

/// Rows of the resampled observation file; duplicates get `~dupN` id suffixes.
fn resampled_rows(data: &Dataset, plan: &ResamplePlan) -> Vec<RawRow> {
    let rows = data.to_rows();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    plan.entries
        .iter()
        .map(|e| match e.source {
            PlanSource::Original(i) => rows[i].clone(),
            PlanSource::Duplicate(i) => {
                let n = seen.entry(i).or_insert(0);
                *n += 1;
                RawRow { obs_id: format!("{}~dup{n}", rows[i].obs_id), ..rows[i].clone() }
            }
            PlanSource::Synthetic { .. } => unreachable!("only smote plans hold synthetic entries"),
        })
        .collect()
}

pub fn resample(flags: ResampleFlags, input: &Path, out: Option<&Path>) -> Result<()> {
    let data = io::read_observations(input)?;
    let vocab = data.vocabulary().clone();
    let c = vocab.len();
    let seed = flags.seed.unwrap_or(0);
    let method: PlanKind =
        flags.method.as_deref().ok_or_else(|| Error::InvalidConfig("--method is required".into()))?.parse()?;
    let ids: Vec<String> = data.observations().iter().map(|o| o.obs_id.clone()).collect();
    let mut resolved = ResampleFlags { seed: Some(seed), method: Some(method.to_string()), ..Default::default() };
    let dir = output_dir(out)?;
    let features_name = flags.features.clone().unwrap_or_else(|| FeatureConvention::LatLonDate.to_string());
    let encoded = || -> Result<Vec<Vec<f64>>> {
        let conv: FeatureConvention = features_name.parse()?;
        Ok(data.observations().iter().map(|o| conv.encode(o).0.to_vec()).collect())
    };

    let plan = match method {
        PlanKind::Weights => {
            let scheme = flags.scheme.clone().unwrap_or_else(|| "inverse".into());
            let kind: WeightKind = scheme.parse()?;
            let w = class_weights(&class_counts(&data), WeightScheme { kind, cap: flags.weight_cap })?;
            write(&dir, "class_weights.csv", &io::class_weights_to_csv(&w, &vocab)?)?;
            resolved.scheme = Some(scheme);
            resolved.weight_cap = flags.weight_cap;
            ResamplePlan::weights(w)
        }
        PlanKind::Oversample | PlanKind::Undersample | PlanKind::Cluster => {
            let plan = match method {
                PlanKind::Oversample => random_oversample(data.labels(), c, seed),
                PlanKind::Undersample => random_undersample(data.labels(), c, seed)?,
                _ => {
                    let k = flags.clusters.unwrap_or(DEFAULT_CLUSTERS);
                    resolved.clusters = Some(k);
                    resolved.features = Some(features_name.clone());
                    cluster_oversample(&encoded()?, data.labels(), c, k, seed)?
                }
            };
            let out_data = validate_dataset(&resampled_rows(&data, &plan))?;
            io::write_observations(&out_data, dir.join("resampled.csv"))?;
            plan
        }
        PlanKind::Smote => {
            let k = flags.smote_k.unwrap_or(DEFAULT_SMOTE_K);
            resolved.smote_k = Some(k);
            resolved.features = Some(features_name.clone());
            let features = encoded()?;
            let plan = smote_oversample(&features, data.labels(), c, k, seed)?;
            let (rows, labels) = plan.apply(&features);
            let mut synthetic = 0;
            let row_ids: Vec<String> = plan
                .entries
                .iter()
                .map(|e| match e.source {
                    PlanSource::Original(i) | PlanSource::Duplicate(i) => ids[i].clone(),
                    PlanSource::Synthetic { .. } => {
                        synthetic += 1;
                        format!("syn{synthetic:06}")
                    }
                })
                .collect();
            write(&dir, "features.csv", &io::features_to_csv(&row_ids, &labels, &rows, &vocab)?)?;
            plan
        }
    };
    for note in &plan.notes {
        eprintln!("note: {note}");
    }
    write(&dir, "plan.csv", &plan.to_table(&ids, &vocab)?)?;
    write(&dir, CONFIG_ECHO, &echo("resample", &resolved)?)
}
