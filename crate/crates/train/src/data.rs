//! Synthetic in-context retrieval data.
//!
//! A sequence is `x_1, y_1, ..., x_n, y_n, x_query` laid out as `2n + 1`
//! token rows: row `2(i-1)` holds item `i`, row `2(i-1) + 1` its label vector
//! and the last row the query. Items come from `n/B` classes with `B`
//! occurrences each; the query is a fresh sample of one of them.
//!
//! Randomness is always derived from `(seed, stream, index)`, so a
//! sequence depends only on its index and never on generation order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::{index::sample, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use posbias_core::seed::stream_rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum VocabMode {
    GaussianMixture,
    /// Items are the fixed vectors `v_k = (μ_k + λω)/√(1+λ²)`.
    FixedVocab { lambda: f64 },
}

/// Which item position the query's class is copied from, 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum BiasMode {
    Uniform,
    Position(usize),
    PositionSet(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub k_classes: usize,
    pub l_labels: usize,
    pub burstiness: usize,
    pub n_items: usize,
    pub dim: usize,
    pub within_class_eps: f64,
    pub vocab: VocabMode,
    pub bias: BiasMode,
    pub seed: u64,
}

impl Default for DataConfig {
    /// Desk scale: `K = 256`, `L = 32`, `B = 4`, `n = 8`, `d = 64`, `ε = 0.75`.
    fn default() -> Self {
        DataConfig {
            k_classes: 256,
            l_labels: 32,
            burstiness: 4,
            n_items: 8,
            dim: 64,
            within_class_eps: 0.75,
            vocab: VocabMode::GaussianMixture,
            bias: BiasMode::Uniform,
            seed: 0,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DataConfig(m));
        if self.dim == 0 || self.n_items == 0 || self.k_classes == 0 || self.l_labels == 0 {
            return bad("k_classes, l_labels, n_items and dim must be positive".into());
        }
        if self.l_labels > self.k_classes {
            return bad(format!("l_labels={} exceeds k_classes={}", self.l_labels, self.k_classes));
        }
        if self.burstiness == 0 || self.n_items % self.burstiness != 0 {
            return bad(format!("burstiness={} must divide n_items={}", self.burstiness, self.n_items));
        }
        if self.n_items / self.burstiness > self.k_classes {
            return bad(format!(
                "{} classes per sequence but only k_classes={}",
                self.n_items / self.burstiness,
                self.k_classes
            ));
        }
        if !(self.within_class_eps >= 0.0) || !self.within_class_eps.is_finite() {
            return bad(format!("within_class_eps must be finite and >= 0, got {}", self.within_class_eps));
        }
        if let VocabMode::FixedVocab { lambda } = self.vocab {
            if !lambda.is_finite() {
                return bad("lambda must be finite".into());
            }
        }
        let check = |p: usize| {
            if p == 0 || p > self.n_items {
                Err(Error::DataConfig(format!("bias position {p} outside 1..={}", self.n_items)))
            } else {
                Ok(())
            }
        };
        match &self.bias {
            BiasMode::Uniform => {}
            BiasMode::Position(p) => check(*p)?,
            BiasMode::PositionSet(ps) => {
                if ps.is_empty() {
                    return bad("bias position set is empty".into());
                }
                ps.iter().try_for_each(|&p| check(p))?;
            }
        }
        Ok(())
    }

    pub fn tokens(&self) -> usize {
        2 * self.n_items + 1
    }

    /// Position `n/2` (at least 1).
    pub fn middle(&self) -> usize {
        (self.n_items / 2).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct ClassBank {
    /// `K × d`.
    pub centers: Array2<f64>,
    pub label_of: Vec<usize>,
    /// `L × d`.
    pub label_vectors: Array2<f64>,
    pub shared_direction: Option<Array1<f64>>,
    pub realized_vocab: Option<Array2<f64>>,
}

impl ClassBank {
    pub fn k(&self) -> usize {
        self.centers.nrows()
    }
}

fn normal_rows(rows: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let sd = 1.0 / (d as f64).sqrt();
    Array2::from_shape_simple_fn((rows, d), || {
        let z: f64 = StandardNormal.sample(rng);
        z * sd
    })
}

fn fixed_vocab(mu: ArrayView1<f64>, omega: ArrayView1<f64>, lambda: f64) -> Array1<f64> {
    let scale = (1.0 + lambda * lambda).sqrt();
    (&mu + &(&omega * lambda)) / scale
}

pub fn build_class_bank(cfg: &DataConfig) -> Result<ClassBank> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, "bank", 0);
    let centers = normal_rows(cfg.k_classes, cfg.dim, &mut rng);
    let label_of = (0..cfg.k_classes).map(|_| rng.random_range(0..cfg.l_labels)).collect();
    let label_vectors = normal_rows(cfg.l_labels, cfg.dim, &mut rng);
    let (shared_direction, realized_vocab) = match cfg.vocab {
        VocabMode::GaussianMixture => (None, None),
        VocabMode::FixedVocab { lambda } => {
            let omega = normal_rows(1, cfg.dim, &mut rng).row(0).to_owned();
            let mut v = Array2::zeros(centers.raw_dim());
            for (k, mu) in centers.rows().into_iter().enumerate() {
                v.row_mut(k).assign(&fixed_vocab(mu, omega.view(), lambda));
            }
            (Some(omega), Some(v))
        }
    };
    Ok(ClassBank { centers, label_of, label_vectors, shared_direction, realized_vocab })
}

/// Noisy draw `μ + εη/√(1+ε²)` around a center.
fn noisy(mu: ArrayView1<f64>, eps: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let d = mu.len();
    let scale = eps / (1.0 + eps * eps).sqrt() / (d as f64).sqrt();
    mu.mapv(|m| {
        let z: f64 = StandardNormal.sample(rng);
        m + scale * z
    })
}

pub fn sample_item(bank: &ClassBank, class: usize, cfg: &DataConfig, rng: &mut ChaCha8Rng) -> Result<Array1<f64>> {
    if class >= bank.k() {
        return Err(Error::UnknownClass { class, k: bank.k() });
    }
    Ok(match &bank.realized_vocab {
        Some(v) => v.row(class).to_owned(),
        None => noisy(bank.centers.row(class), cfg.within_class_eps, rng),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    /// `(2n+1) × d`.
    pub tokens: Array2<f64>,
    /// Class of each item; novel classes are numbered from `K` upward.
    pub item_classes: Vec<usize>,
    pub target_label: usize,
    /// 1-based item positions sharing the query's class.
    pub answer_positions: Vec<usize>,
    /// 1-based position the query's class was taken from; in test sets the
    /// position holding the target label.
    pub query_position: usize,
}

fn assemble(items: &[Array1<f64>], labels: &[ArrayView1<f64>], query: &Array1<f64>) -> Array2<f64> {
    let n = items.len();
    let d = query.len();
    let mut tokens = Array2::zeros((2 * n + 1, d));
    for i in 0..n {
        tokens.row_mut(2 * i).assign(&items[i]);
        tokens.row_mut(2 * i + 1).assign(&labels[i]);
    }
    tokens.row_mut(2 * n).assign(query);
    tokens
}

pub fn build_train_sequence(bank: &ClassBank, cfg: &DataConfig, rng: &mut ChaCha8Rng) -> Result<SequenceSample> {
    let (n, b) = (cfg.n_items, cfg.burstiness);
    let groups = n / b;
    if groups > bank.k() {
        return Err(Error::DataConfig(format!("{groups} classes per sequence but the bank has {}", bank.k())));
    }
    let chosen = sample(rng, bank.k(), groups).into_vec();
    let mut classes: Vec<usize> = chosen.iter().flat_map(|&c| std::iter::repeat_n(c, b)).collect();
    classes.shuffle(rng);
    let query_position = match &cfg.bias {
        BiasMode::Uniform => rng.random_range(1..=n),
        BiasMode::Position(p) => *p,
        BiasMode::PositionSet(ps) => *ps.choose(rng).expect("validated non-empty"),
    };
    let qc = classes[query_position - 1];
    let items = classes.iter().map(|&c| sample_item(bank, c, cfg, rng)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<_> = classes.iter().map(|&c| bank.label_vectors.row(bank.label_of[c])).collect();
    let query = sample_item(bank, qc, cfg, rng)?;
    Ok(SequenceSample {
        tokens: assemble(&items, &labels, &query),
        answer_positions: (1..=n).filter(|&p| classes[p - 1] == qc).collect(),
        item_classes: classes,
        target_label: bank.label_of[qc],
        query_position,
    })
}

/// The `index`-th training sequence of the infinite stream for `cfg.seed`.
pub fn train_sequence_at(bank: &ClassBank, cfg: &DataConfig, index: u64) -> Result<SequenceSample> {
    sequence_at(bank, cfg, "train", index)
}

/// Like [`train_sequence_at`] on a separately named stream.
pub fn sequence_at(bank: &ClassBank, cfg: &DataConfig, stream: &str, index: u64) -> Result<SequenceSample> {
    build_train_sequence(bank, cfg, &mut stream_rng(cfg.seed, stream, index))
}

/// Test pair positions, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPairSpec {
    pub pos_a: usize,
    pub pos_b: usize,
}

impl TestPairSpec {
    pub fn new(pos_a: usize, pos_b: usize) -> Self {
        TestPairSpec { pos_a, pos_b }
    }
}

/// Fresh class centers independent of the training bank, with the
/// bank's item rule (noisy draws or fixed vectors through the same `ω`).
struct NovelClasses<'a> {
    bank: &'a ClassBank,
    cfg: &'a DataConfig,
    known: HashSet<Vec<u64>>,
}

impl<'a> NovelClasses<'a> {
    fn new(bank: &'a ClassBank, cfg: &'a DataConfig) -> Self {
        let known = bank.centers.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        NovelClasses { bank, cfg, known }
    }

    fn center(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let mu = normal_rows(1, self.cfg.dim, rng).row(0).to_owned();
        let key: Vec<u64> = mu.iter().map(|v| v.to_bits()).collect();
        assert!(!self.known.contains(&key), "novel center coincides with a training center");
        mu
    }

    /// One item of the class centred at `mu`.
    fn item(&self, mu: &Array1<f64>, rng: &mut ChaCha8Rng) -> Array1<f64> {
        match (&self.cfg.vocab, &self.bank.shared_direction) {
            (VocabMode::FixedVocab { lambda }, Some(omega)) => fixed_vocab(mu.view(), omega.view(), *lambda),
            _ => noisy(mu.view(), self.cfg.within_class_eps, rng),
        }
    }
}

/// Labels for filler classes avoid every label in `exclude`.
fn filler_label(l: usize, exclude: &[usize], rng: &mut ChaCha8Rng) -> usize {
    loop {
        let c = rng.random_range(0..l);
        if !exclude.contains(&c) {
            return c;
        }
    }
}

/// Fills `slots` (0-based item positions) with novel classes in groups of
/// `B`, the last group possibly smaller; returns per-slot (class, item, label).
fn fillers(
    novel: &NovelClasses,
    slots: &[usize],
    first_id: usize,
    exclude: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize, Array1<f64>, usize)> {
    let b = novel.cfg.burstiness;
    let mut groups: Vec<usize> = (0..slots.len()).map(|s| s / b).collect();
    groups.shuffle(rng);
    let count = slots.len().div_ceil(b);
    let centers: Vec<_> = (0..count).map(|_| novel.center(rng)).collect();
    let labels: Vec<_> = (0..count).map(|_| filler_label(novel.cfg.l_labels, exclude, rng)).collect();
    slots
        .iter()
        .zip(groups)
        .map(|(&s, g)| (s, first_id + g, novel.item(&centers[g], rng), labels[g]))
        .collect()
}

/// Paired test lists for `[a, b]` and `[b, a]` built from novel classes.
///
/// Both lists share every token except the labels at `a` and `b`: list one
/// carries the target label at `a` and a distractor at `b`, list two the
/// reverse. The base draws depend only on the unordered pair, so
/// `(b, a)` reproduces the same lists swapped.
pub fn build_novel_test_pairs(
    bank: &ClassBank,
    cfg: &DataConfig,
    spec: TestPairSpec,
    count: usize,
    seed: u64,
) -> Result<(Vec<SequenceSample>, Vec<SequenceSample>)> {
    cfg.validate()?;
    let n = cfg.n_items;
    let (a, b) = (spec.pos_a, spec.pos_b);
    if a == b || a == 0 || b == 0 || a > n || b > n {
        return Err(Error::DataConfig(format!("pair ({a}, {b}) must be two distinct positions in 1..={n}")));
    }
    if cfg.l_labels < 3 {
        return Err(Error::DataConfig("test pairs need at least 3 labels".into()));
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let novel = NovelClasses::new(bank, cfg);
    let mut first = Vec::with_capacity(count);
    let mut second = Vec::with_capacity(count);
    for r in 0..count {
        let key = ((lo as u64) << 48) | ((hi as u64) << 32) | r as u64;
        let rng = &mut stream_rng(seed, "pairs", key);
        let mu = novel.center(rng);
        let x = novel.item(&mu, rng);
        let query = novel.item(&mu, rng);
        let target = rng.random_range(0..cfg.l_labels);
        let distractor = filler_label(cfg.l_labels, &[target], rng);
        let slots: Vec<usize> = (0..n).filter(|&p| p != lo - 1 && p != hi - 1).collect();
        let k = bank.k();
        let mut classes = vec![k; n];
        let mut items = vec![x.clone(); n];
        let mut labels = vec![0; n];
        for (s, class, item, label) in fillers(&novel, &slots, k + 1, &[target, distractor], rng) {
            classes[s] = class;
            items[s] = item;
            labels[s] = label;
        }
        let build = |at_target: usize, at_other: usize| {
            let mut lab = labels.clone();
            lab[at_target - 1] = target;
            lab[at_other - 1] = distractor;
            let views: Vec<_> = lab.iter().map(|&l| bank.label_vectors.row(l)).collect();
            SequenceSample {
                tokens: assemble(&items, &views, &query),
                item_classes: classes.clone(),
                target_label: target,
                answer_positions: vec![lo, hi],
                query_position: at_target,
            }
        };
        first.push(build(a, b));
        second.push(build(b, a));
    }
    Ok((first, second))
}

/// For each position `p = 1..=n`, `count` sequences whose only item of the
/// query's class sits at `p`. The fillers' labels avoid the target.
pub fn build_position_probes(bank: &ClassBank, cfg: &DataConfig, count: usize, seed: u64) -> Result<Vec<Vec<SequenceSample>>> {
    cfg.validate()?;
    let n = cfg.n_items;
    if cfg.l_labels < 2 {
        return Err(Error::DataConfig("position probes need at least 2 labels".into()));
    }
    let novel = NovelClasses::new(bank, cfg);
    let k = bank.k();
    Ok((1..=n)
        .map(|p| {
            (0..count)
                .map(|r| {
                    let rng = &mut stream_rng(seed, "probe", ((p as u64) << 32) | r as u64);
                    let mu = novel.center(rng);
                    let x = novel.item(&mu, rng);
                    let query = novel.item(&mu, rng);
                    let target = rng.random_range(0..cfg.l_labels);
                    let slots: Vec<usize> = (0..n).filter(|&s| s != p - 1).collect();
                    let mut classes = vec![k; n];
                    let mut items = vec![x.clone(); n];
                    let mut labels = vec![target; n];
                    for (s, class, item, label) in fillers(&novel, &slots, k + 1, &[target], rng) {
                        classes[s] = class;
                        items[s] = item;
                        labels[s] = label;
                    }
                    let views: Vec<_> = labels.iter().map(|&l| bank.label_vectors.row(l)).collect();
                    SequenceSample {
                        tokens: assemble(&items, &views, &query),
                        item_classes: classes,
                        target_label: target,
                        answer_positions: vec![p],
                        query_position: p,
                    }
                })
                .collect()
        })
        .collect())
}

/// `[a, b] - [b, a]`.
pub fn gap_statistic(acc_ab: f64, acc_ba: f64) -> f64 {
    acc_ab - acc_ba
}

impl fmt::Display for VocabMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabMode::GaussianMixture => write!(f, "gaussian"),
            VocabMode::FixedVocab { lambda } => write!(f, "fixed:lambda={lambda}"),
        }
    }
}

impl FromStr for VocabMode {
    type Err = Error;

    /// `gaussian` or `fixed:lambda=<x>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(VocabMode::GaussianMixture),
            other => other
                .strip_prefix("fixed:lambda=")
                .and_then(|v| v.parse().ok())
                .map(|lambda| VocabMode::FixedVocab { lambda })
                .ok_or_else(|| Error::DataConfig(format!("unknown vocab mode `{s}`"))),
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasMode::Uniform => write!(f, "uniform"),
            BiasMode::Position(p) => write!(f, "position:p={p}"),
            BiasMode::PositionSet(ps) => {
                let parts: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                write!(f, "set:p={}", parts.join("/"))
            }
        }
    }
}

impl FromStr for BiasMode {
    type Err = Error;

    /// `uniform`, `position:p=<i>` or `set:p=<i>/<j>/...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::DataConfig(format!("unknown bias mode `{s}`"));
        if s == "uniform" {
            return Ok(BiasMode::Uniform);
        }
        if let Some(v) = s.strip_prefix("position:p=") {
            return v.parse().map(BiasMode::Position).map_err(|_| bad());
        }
        if let Some(v) = s.strip_prefix("set:p=") {
            let ps = v.split('/').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<Vec<usize>>>()?;
            return Ok(BiasMode::PositionSet(ps));
        }
        Err(bad())
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(VocabMode);
string_serde!(BiasMode);

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DataConfig {
        DataConfig { k_classes: 16, l_labels: 8, dim: 8, ..DataConfig::default() }
    }

    #[test]
    fn config_errors() {
        let bad = [
            DataConfig { burstiness: 3, ..small() },
            DataConfig { l_labels: 17, ..small() },
            DataConfig { bias: BiasMode::Position(9), ..small() },
            DataConfig { bias: BiasMode::PositionSet(vec![]), ..small() },
            DataConfig { within_class_eps: -1.0, ..small() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(small().validate().is_ok());
    }

    #[test]
    fn mode_strings_round_trip() {
        for s in ["uniform", "position:p=3", "set:p=1/8"] {
            assert_eq!(s.parse::<BiasMode>().unwrap().to_string(), s);
        }
        for s in ["gaussian", "fixed:lambda=0.5"] {
            assert_eq!(s.parse::<VocabMode>().unwrap().to_string(), s);
        }
        assert!("set:p=".parse::<BiasMode>().is_err());
        assert!("fixed".parse::<VocabMode>().is_err());
    }

    #[test]
    fn zero_eps_returns_center() {
        let cfg = DataConfig { within_class_eps: 0.0, ..small() };
        let bank = build_class_bank(&cfg).unwrap();
        let mut rng = stream_rng(1, "t", 0);
        assert_eq!(sample_item(&bank, 3, &cfg, &mut rng).unwrap(), bank.centers.row(3));
        assert!(matches!(sample_item(&bank, 16, &cfg, &mut rng), Err(Error::UnknownClass { class: 16, k: 16 })));
    }

    #[test]
    fn fixed_vocab_at_zero_lambda_is_the_center() {
        let cfg = DataConfig { vocab: VocabMode::FixedVocab { lambda: 0.0 }, ..small() };
        let bank = build_class_bank(&cfg).unwrap();
        assert_eq!(bank.realized_vocab.as_ref().unwrap(), &bank.centers);
        let mut rng = stream_rng(1, "t", 0);
        let a = sample_item(&bank, 2, &cfg, &mut rng).unwrap();
        let b = sample_item(&bank, 2, &cfg, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_statistic(0.9, 0.9), 0.0);
        assert_eq!(gap_statistic(1.0, 0.0), 1.0);
    }
}
