//! Synthetic sightings with confusable species pairs.
//!
//! Species `2p` and `2p + 1` form a pair that the simulated image model
//! cannot tell apart well, but whose geographic ranges are far apart and
//! whose seasonal windows sit half a year from each other. That is the
//! situation where a location/date prior should recover what the image
//! model loses.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, Normal};

use crate::domain::{validate_dataset_with, ClassVocabulary, Dataset, ProbVector, RawRow};
use crate::error::{Error, Result};
use crate::fusion::ProbMatrix;
use crate::imbalance::ClassCounts;

/// Mass the simulated image model spreads over classes outside the pair.
pub const IMAGE_LEAK: f64 = 0.05;

const LAT_BOUND: f64 = 60.0;
const LON_BOUND: f64 = 170.0;
const PLACEMENT_ATTEMPTS: usize = 20_000;
const FIRST_YEAR: i32 = 2016;
const LAST_YEAR: i32 = 2021;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_pairs: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Class `c` gets mass proportional to `(c + 1)^-gamma`.
    pub imbalance_gamma: f64,
    /// Range spread in degrees.
    pub geo_sigma: f64,
    /// Minimum distance between any two range centers, in units of `geo_sigma`.
    pub pair_separation: f64,
    /// Standard deviation of the seasonal window, in days.
    pub season_width: f64,
    /// Image-model mass on the pair partner.
    pub image_confusion: f64,
    /// Dirichlet concentration of the image-model jitter; smaller is noisier.
    pub image_concentration: f64,
    /// Exponent on the training-class frequency absorbed by the simulated
    /// image model. 0 leaves it class-agnostic; 1 matches a classifier that
    /// has learned the training prior.
    pub image_prior_tilt: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_pairs: 10,
            n_train: 5000,
            n_test: 1000,
            imbalance_gamma: 1.5,
            geo_sigma: 4.0,
            pair_separation: 6.0,
            season_width: 20.0,
            image_confusion: 0.45,
            image_concentration: 1.0,
            image_prior_tilt: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn classes(&self) -> usize {
        2 * self.n_pairs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_pairs == 0 || self.n_train == 0 || self.n_test == 0 {
            return bad("n_pairs, n_train and n_test must be positive".into());
        }
        for (name, v) in [
            ("geo_sigma", self.geo_sigma),
            ("pair_separation", self.pair_separation),
            ("season_width", self.season_width),
            ("image_concentration", self.image_concentration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.imbalance_gamma.is_finite() && self.imbalance_gamma >= 0.0) {
            return bad(format!("imbalance_gamma must be >= 0, got {}", self.imbalance_gamma));
        }
        if !(self.image_prior_tilt.is_finite() && self.image_prior_tilt >= 0.0) {
            return bad(format!("image_prior_tilt must be >= 0, got {}", self.image_prior_tilt));
        }
        if !(0.0..0.5).contains(&self.image_confusion) {
            return bad(format!("image_confusion must be in [0, 0.5), got {}", self.image_confusion));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// `(latitude, longitude)` of each species' range center.
    pub centers: Vec<(f64, f64)>,
    /// Seasonal peak as a fraction of the year in `[0, 1)`.
    pub season_peaks: Vec<f64>,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub spec: SynthSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub image_probs: ProbMatrix,
    pub params: GeneratorParams,
}

pub fn species_label(c: usize) -> String {
    format!("sp{c:03}")
}

pub fn vocabulary(spec: &SynthSpec) -> ClassVocabulary {
    ClassVocabulary::from_labels((0..spec.classes()).map(species_label))
}

/// Split `n` by power-law mass with largest-remainder rounding
/// (ties to the lower class index).
pub fn power_law_counts(n: usize, classes: usize, gamma: f64) -> Vec<usize> {
    let mass: Vec<f64> = (0..classes).map(|c| ((c + 1) as f64).powf(-gamma)).collect();
    let total: f64 = mass.iter().sum();
    let exact: Vec<f64> = mass.iter().map(|m| m / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..classes).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    counts
}

fn place_centers(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, f64)>> {
    let min_dist = spec.pair_separation * spec.geo_sigma;
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(spec.classes());
    for c in 0..spec.classes() {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cand = (rng.gen_range(-LAT_BOUND..LAT_BOUND), rng.gen_range(-LON_BOUND..LON_BOUND));
            if centers.iter().all(|p| ((p.0 - cand.0).powi(2) + (p.1 - cand.1).powi(2)).sqrt() >= min_dist) {
                centers.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleSpec(format!(
                "could not place range center {} of {} at least {min_dist} degrees from the others",
                c + 1,
                spec.classes()
            )));
        }
    }
    Ok(centers)
}

fn sample_row(spec: &SynthSpec, params: &GeneratorParams, class: usize, rng: &mut ChaCha8Rng) -> (f64, f64, NaiveDate) {
    let spread = Normal::new(0.0, spec.geo_sigma).expect("positive sigma");
    let (clat, clon) = params.centers[class];
    let lat = loop {
        let v = clat + spread.sample(rng);
        if (-90.0..=90.0).contains(&v) {
            break v;
        }
    };
    let lon = loop {
        let v = clon + spread.sample(rng);
        if (-180.0..180.0).contains(&v) {
            break v;
        }
    };
    let year = rng.gen_range(FIRST_YEAR..=LAST_YEAR);
    let year_len = if NaiveDate::from_ymd_opt(year, 1, 1).unwrap().leap_year() { 366 } else { 365 };
    let season = Normal::new(0.0, spec.season_width).expect("positive width");
    let day = (params.season_peaks[class] * f64::from(year_len) + season.sample(rng)).round() as i64;
    let day = day.rem_euclid(i64::from(year_len)) as u32;
    let date = NaiveDate::from_yo_opt(year, day + 1).expect("day within year");
    (lat, lon, date)
}

fn rows_for(
    spec: &SynthSpec,
    params: &GeneratorParams,
    counts: &[usize],
    prefix: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<(RawRow, usize)> {
    let mut rows = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let (lat, lon, date) = sample_row(spec, params, c, rng);
            rows.push((
                RawRow {
                    obs_id: String::new(),
                    latitude: lat,
                    longitude: lon,
                    date: date.format("%Y-%m-%d").to_string(),
                    label_l1: format!("fam{:02}", c / 6),
                    label_l2: format!("gen{:02}", c / 2),
                    label_l3: species_label(c),
                },
                c,
            ));
        }
    }
    // Fisher-Yates with the generator's stream so ids carry no class order.
    for i in (1..rows.len()).rev() {
        let j = rng.gen_range(0..=i);
        rows.swap(i, j);
    }
    for (i, (r, _)) in rows.iter_mut().enumerate() {
        r.obs_id = format!("{prefix}{i:06}");
    }
    rows
}

fn image_row(spec: &SynthSpec, class: usize, tilt: &[f64], rng: &mut ChaCha8Rng) -> ProbVector {
    let c = spec.classes();
    let partner = class ^ 1;
    let leak = if c > 2 { IMAGE_LEAK } else { 0.0 };
    let mut base = vec![if c > 2 { leak / (c - 2) as f64 } else { 0.0 }; c];
    base[class] = 1.0 - spec.image_confusion - leak;
    base[partner] = spec.image_confusion;
    // Dirichlet needs strictly positive parameters; zero-mass entries stay zero.
    let support: Vec<usize> = (0..c).filter(|&j| base[j] > 0.0).collect();
    let alphas: Vec<f64> = support.iter().map(|&j| spec.image_concentration * base[j]).collect();
    let mut q = vec![0.0; c];
    if support.len() >= 2 {
        let draw = Dirichlet::new(&alphas).expect("positive concentrations").sample(rng);
        for (&j, v) in support.iter().zip(draw) {
            q[j] = v;
        }
    } else {
        q[support[0]] = 1.0;
    }
    for (v, t) in q.iter_mut().zip(tilt) {
        *v *= t;
    }
    if q.iter().sum::<f64>() <= 0.0 || q.iter().any(|v| !v.is_finite()) {
        // every drawn entry underflowed; fall back to the undisturbed means
        q = base.iter().zip(tilt).map(|(b, t)| b * t).collect();
    }
    ProbVector::normalize(q)
}

pub fn generate_dataset(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let c = spec.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = place_centers(spec, &mut rng)?;
    let season_peaks: Vec<f64> = (0..spec.n_pairs)
        .flat_map(|_| {
            let peak: f64 = rng.gen_range(0.0..1.0);
            [peak, (peak + 0.5).fract()]
        })
        .collect();
    let params = GeneratorParams {
        centers,
        season_peaks,
        train_counts: power_law_counts(spec.n_train, c, spec.imbalance_gamma),
        test_counts: power_law_counts(spec.n_test, c, spec.imbalance_gamma),
    };

    let vocab = vocabulary(spec);
    let train_rows = rows_for(spec, &params, &params.train_counts, "tr", &mut rng);
    let test_rows = rows_for(spec, &params, &params.test_counts, "te", &mut rng);

    let counts = ClassCounts::from_counts(params.train_counts.clone());
    let n_max = counts.max().max(1) as f64;
    let tilt: Vec<f64> =
        params.train_counts.iter().map(|&n| (n.max(1) as f64 / n_max).powf(spec.image_prior_tilt)).collect();
    let mut image_probs = ProbMatrix::new(vocab.clone());
    for (row, class) in &test_rows {
        image_probs.push(row.obs_id.clone(), image_row(spec, *class, &tilt, &mut rng))?;
    }

    let strip = |rows: Vec<(RawRow, usize)>| rows.into_iter().map(|(r, _)| r).collect::<Vec<_>>();
    let train = validate_dataset_with(&strip(train_rows), &vocab)?;
    let test = validate_dataset_with(&strip(test_rows), &vocab)?;
    Ok(SynthOutput { spec: spec.clone(), train, test, image_probs, params })
}

/// Human-readable summary of the generator's ground truth.
pub fn describe_generator(out: &SynthOutput) -> String {
    let p = &out.params;
    let mut s = String::new();
    writeln!(s, "classes = {}", out.spec.classes()).unwrap();
    writeln!(s, "pairs = {}", out.spec.n_pairs).unwrap();
    writeln!(s, "train_observations = {}", out.train.len()).unwrap();
    writeln!(s, "test_observations = {}", out.test.len()).unwrap();
    let train = ClassCounts::from_counts(p.train_counts.clone());
    let ratio = match train.min_present() {
        Some(min) => format!("{}", train.max() as f64 / min as f64),
        None => "inf".into(),
    };
    writeln!(s, "imbalance_ratio = {ratio}").unwrap();
    writeln!(s, "\nclass,pair_partner,train_count,test_count,center_lat,center_lon,season_peak_day").unwrap();
    for c in 0..out.spec.classes() {
        writeln!(
            s,
            "{},{},{},{},{:.4},{:.4},{:.1}",
            species_label(c),
            species_label(c ^ 1),
            p.train_counts[c],
            p.test_counts[c],
            p.centers[c].0,
            p.centers[c].1,
            p.season_peaks[c] * 365.0
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::top_k;
    use crate::metrics::{accuracy_from_hits, Averaging};

    fn small() -> SynthSpec {
        SynthSpec { n_pairs: 3, n_train: 600, n_test: 300, ..Default::default() }
    }

    #[test]
    fn gamma_zero_is_balanced() {
        assert_eq!(power_law_counts(400, 4, 0.0), vec![100, 100, 100, 100]);
        assert_eq!(power_law_counts(10, 4, 0.0), vec![3, 3, 2, 2]);
    }

    #[test]
    fn gamma_one_two_classes() {
        assert_eq!(power_law_counts(300, 2, 1.0), vec![200, 100]);
        let c = power_law_counts(1001, 2, 1.0);
        assert!((c[0] as f64 / c[1] as f64 - 2.0).abs() < 0.01);
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_dataset(&small()).unwrap(), generate_dataset(&small()).unwrap());
        let other = SynthSpec { seed: 1, ..small() };
        assert_ne!(generate_dataset(&small()).unwrap(), generate_dataset(&other).unwrap());
    }

    #[test]
    fn outputs_are_valid() {
        let out = generate_dataset(&small()).unwrap();
        assert_eq!(out.train.len(), 600);
        assert_eq!(out.test.len(), 300);
        assert_eq!(out.image_probs.len(), 300);
        assert_eq!(out.image_probs.ids(), out.test.observations().iter().map(|o| o.obs_id.clone()).collect::<Vec<_>>());
        for row in out.image_probs.rows() {
            assert!((row.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for o in out.train.observations().iter().chain(out.test.observations()) {
            assert!((-90.0..=90.0).contains(&o.latitude) && (-180.0..180.0).contains(&o.longitude));
        }
        let again = crate::domain::validate_dataset(&out.train.to_rows()).unwrap();
        assert_eq!(again.vocabulary(), out.train.vocabulary());
    }

    #[test]
    fn centers_respect_separation() {
        let out = generate_dataset(&small()).unwrap();
        let min = small().pair_separation * small().geo_sigma;
        let cs = &out.params.centers;
        for i in 0..cs.len() {
            for j in 0..i {
                let d = ((cs[i].0 - cs[j].0).powi(2) + (cs[i].1 - cs[j].1).powi(2)).sqrt();
                assert!(d >= min);
            }
        }
    }

    #[test]
    fn infeasible_spec() {
        let spec = SynthSpec { n_pairs: 50, geo_sigma: 20.0, ..small() };
        assert!(matches!(generate_dataset(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn invalid_spec() {
        let spec = SynthSpec { image_confusion: 0.5, ..small() };
        assert!(matches!(generate_dataset(&spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn nearest_center_oracle() {
        let spec = SynthSpec { seed: 3, ..Default::default() };
        let out = generate_dataset(&spec).unwrap();
        let hits: Vec<bool> = out
            .test
            .observations()
            .iter()
            .zip(out.test.labels())
            .map(|(o, &y)| {
                let d: Vec<f64> = out
                    .params
                    .centers
                    .iter()
                    .map(|c| -((c.0 - o.latitude).powi(2) + (c.1 - o.longitude).powi(2)))
                    .collect();
                top_k(&d, 1).unwrap()[0] == y
            })
            .collect();
        let acc = accuracy_from_hits(&hits, out.test.labels(), spec.classes(), Averaging::Micro);
        assert!(acc >= 0.99, "nearest-center accuracy {acc}");
    }

    #[test]
    fn image_model_ceiling() {
        for seed in 0..3 {
            let spec = SynthSpec { seed, imbalance_gamma: 1.5, image_prior_tilt: 0.0, ..Default::default() };
            let out = generate_dataset(&spec).unwrap();
            let rows: Vec<&[f64]> = out.image_probs.rows().iter().map(|r| r.as_slice()).collect();
            let hits = crate::metrics::topk_hits(&rows, out.test.labels(), 1).unwrap();
            let acc = accuracy_from_hits(&hits, out.test.labels(), spec.classes(), Averaging::Micro);
            let ceiling = 1.0 - spec.image_confusion - IMAGE_LEAK;
            assert!((acc - ceiling).abs() <= 0.03, "seed {seed}: image top-1 {acc}");
        }
    }

    #[test]
    fn summary_lists_every_class() {
        let spec = SynthSpec { n_pairs: 2, n_train: 400, n_test: 40, imbalance_gamma: 0.0, ..Default::default() };
        let out = generate_dataset(&spec).unwrap();
        let text = describe_generator(&out);
        assert_eq!(text.lines().filter(|l| l.starts_with("sp")).count(), 4);
        assert!(text.contains("imbalance_ratio = 1\n"));
        assert_eq!(out.params.train_counts, vec![100; 4]);
    }
}
