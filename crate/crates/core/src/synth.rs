//! Seeded synthetic corpora with a planted linear signal.
//!
//! Each user's four letters are drawn independently with the configured
//! first-letter shares. Embedding column `d` (one per dichotomy) is
//! `±signal + N(0, 1)` depending on the letter, so the true log-odds of the
//! first letter given that column is `ln(p/(1−p)) + 2·signal·x`. Every other
//! column, the text and the metadata are independent of the labels.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{BotScores, UserRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::learn::logistic::sigmoid;
use crate::mbti::{Dichotomy, MbtiType};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Share of the first letter (E, N, T, J) per dichotomy.
    pub first_letter_share: [f64; 4],
    /// Class-mean offset of each planted embedding column.
    pub signal: f64,
    pub embedding_dim: usize,
    pub posts_per_user: usize,
    /// Share of extra records built to fail the inclusion filter.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            first_letter_share: [0.5, 0.85, 0.5, 0.5],
            signal: 0.5,
            embedding_dim: 8,
            posts_per_user: 100,
            contamination: 0.02,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 100 {
            return Err(Error::Parameter(format!("need at least 100 users, got {}", self.n_users)));
        }
        if let Some(p) = self.first_letter_share.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Parameter(format!("class share {p} outside (0, 1)")));
        }
        if !self.signal.is_finite() || self.signal < 0.0 {
            return Err(Error::Parameter(format!("signal {} must be finite and >= 0", self.signal)));
        }
        if self.embedding_dim < 4 {
            return Err(Error::Parameter(format!(
                "embedding dimension {} cannot hold 4 planted columns",
                self.embedding_dim
            )));
        }
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(Error::Parameter(format!("contamination {} outside [0, 0.5)", self.contamination)));
        }
        Ok(())
    }
}

/// Generating model of one dichotomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCoefficient {
    pub dichotomy: String,
    pub feature: String,
    pub intercept: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub coefficients: Vec<PlantedCoefficient>,
    /// Users per type among the clean records.
    pub type_counts: BTreeMap<String, usize>,
}

const FUNCTION_WORDS: [&str; 16] = [
    "the", "and", "i", "to", "is", "it", "that", "we", "for", "with", "my", "this", "you", "so", "of", "on",
];
const CONTENT_WORDS: [&str; 24] = [
    "coffee", "music", "work", "friends", "game", "book", "city", "rain", "morning", "project", "weekend",
    "movie", "team", "idea", "happy", "sad", "love", "great", "tired", "excited", "worried", "plan", "party",
    "think",
];
const EMOJI: [&str; 6] = ["😀", "🎉", "❤️", "🔥", "😂", "👍"];
const FOREIGN_WORDS: [&str; 8] = ["hola", "gracias", "buenos", "dias", "amigo", "noche", "casa", "fiesta"];

fn post(rng: &mut seed::Rng, english: bool) -> String {
    let mut words: Vec<&str> = Vec::with_capacity(9);
    let len = rng.random_range(6..10);
    for k in 0..len {
        let w = if !english {
            *FOREIGN_WORDS.choose(rng).unwrap()
        } else if k % 2 == 0 {
            *FUNCTION_WORDS.choose(rng).unwrap()
        } else {
            *CONTENT_WORDS.choose(rng).unwrap()
        };
        words.push(w);
    }
    if rng.random::<f64>() < 0.15 {
        words.push(EMOJI.choose(rng).unwrap());
    }
    words.join(" ")
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn gaussian(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn base_record(rng: &mut seed::Rng, id: String, bio: String, n_posts: usize, english: bool, dim: usize) -> UserRecord {
    let posts = (0..n_posts).map(|_| post(rng, english)).collect();
    let mut r = UserRecord::new(id, bio, posts);
    r.followers_count = rng.random_range(0..5000);
    r.friends_count = rng.random_range(0..2000);
    r.listed_count = rng.random_range(0..50);
    r.favourites_count = rng.random_range(0..20000);
    r.statuses_count = rng.random_range(100..30000);
    r.geo_enabled = rng.random::<f64>() < 0.3;
    r.verified = rng.random::<f64>() < 0.02;
    r.default_profile = rng.random::<f64>() < 0.4;
    r.default_profile_image = rng.random::<f64>() < 0.05;
    r.profile_use_background_image = rng.random::<f64>() < 0.7;
    r.has_extended_profile = rng.random::<f64>() < 0.5;
    let mut score = || round4(rng.random::<f64>() * 0.6);
    r.bot_scores = Some(BotScores {
        cap_english: score(),
        english_astroturf: score(),
        english_fake_follower: score(),
        english_financial: score(),
        english_other: score(),
        english_self_declared: score(),
        english_spammer: score(),
    });
    let v: Vec<f64> = (0..dim).map(|_| round4(gaussian(rng))).collect();
    r.post_embeddings = Some(vec![v; n_posts]);
    r
}

/// Generates the corpus (clean users in id order, then the contaminating
/// records) and its ground truth.
pub fn synthesize(config: &SynthConfig) -> Result<(Vec<UserRecord>, GroundTruth)> {
    config.validate()?;
    let mut rng = seed::rng_for(config.seed, "synth/users");
    let mut records = Vec::with_capacity(config.n_users);
    let mut type_counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..config.n_users {
        let first: [bool; 4] = std::array::from_fn(|d| rng.random::<f64>() < config.first_letter_share[d]);
        let t = MbtiType::from_letters(first);
        let bio = format!("{} | {} and {}", t, CONTENT_WORDS.choose(&mut rng).unwrap(), CONTENT_WORDS.choose(&mut rng).unwrap());
        let mut r = base_record(&mut rng, format!("user{i:05}"), bio, config.posts_per_user, true, config.embedding_dim);
        if let Some(emb) = r.post_embeddings.as_mut() {
            let mut v = emb[0].clone();
            for d in 0..4 {
                let sign = if first[d] { 1.0 } else { -1.0 };
                v[d] = round4(v[d] + sign * config.signal);
            }
            emb.iter_mut().for_each(|e| e.clone_from(&v));
        }
        *type_counts.entry(t.acronym()).or_insert(0) += 1;
        records.push(r);
    }

    let mut rng = seed::rng_for(config.seed, "synth/contamination");
    let extra = (config.n_users as f64 * config.contamination).round() as usize;
    for i in 0..extra {
        let t = MbtiType::from_index(rng.random_range(0..16));
        let id = format!("noise{i:04}");
        let dim = config.embedding_dim;
        let r = match i % 4 {
            0 => base_record(&mut rng, id, format!("{t}"), config.posts_per_user / 5, true, dim),
            1 => base_record(&mut rng, id, format!("{t}"), config.posts_per_user, false, dim),
            2 => {
                let mut r = base_record(&mut rng, id, format!("{t}"), config.posts_per_user, true, dim);
                if let Some(s) = r.bot_scores.as_mut() {
                    s.cap_english = 0.95;
                }
                r
            }
            _ => {
                let other = MbtiType::from_index((t.index() + 1) % 16);
                base_record(&mut rng, id, format!("{t} or {other}"), config.posts_per_user, true, dim)
            }
        };
        records.push(r);
    }

    let coefficients = Dichotomy::ALL
        .iter()
        .map(|&d| {
            let p = config.first_letter_share[d.index()];
            PlantedCoefficient {
                dichotomy: d.name().to_string(),
                feature: format!("bert_{}", d.index()),
                intercept: (p / (1.0 - p)).ln(),
                coefficient: 2.0 * config.signal,
            }
        })
        .collect();
    Ok((
        records,
        GroundTruth {
            config: *config,
            coefficients,
            type_counts,
        },
    ))
}

/// A dense design with uniform(−1, 1) columns and a binary response whose
/// log-odds are `coefficient · Σ_{j ∈ signal} x_j`. Column `j` is named
/// `x{j}`.
pub fn planted_design(
    n: usize,
    m: usize,
    signal: &[usize],
    coefficient: f64,
    seed_value: u64,
) -> Result<(FeatureMatrix, Vec<bool>)> {
    if let Some(j) = signal.iter().find(|&&j| j >= m) {
        return Err(Error::Parameter(format!("signal column {j} outside 0..{m}")));
    }
    let mut rng = seed::rng(seed_value);
    let x = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let y = (0..n)
        .map(|i| {
            let eta: f64 = signal.iter().map(|&j| coefficient * x[(i, j)]).sum();
            rng.random::<f64>() < sigmoid(eta)
        })
        .collect();
    let matrix = FeatureMatrix::new(
        (0..n).map(|i| format!("r{i}")).collect(),
        vec![None; n],
        (0..m).map(|j| format!("x{j}")).collect(),
        vec![FeatureGroup::Liwc; m],
        x,
    )?;
    Ok((matrix, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, FilterPolicy};
    use crate::textprep::StopwordDetector;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 200,
            posts_per_user: 100,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let (a, ta) = synthesize(&small()).unwrap();
        let (b, tb) = synthesize(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.len(), 204);
        assert!(a.iter().all(|r| r.validate().is_ok()));
        assert_eq!(ta.type_counts.values().sum::<usize>(), 200);
    }

    #[test]
    fn filter_keeps_clean_users_only() {
        let (records, _) = synthesize(&small()).unwrap();
        let out = filter_corpus(records, &FilterPolicy::default(), &StopwordDetector::default());
        assert_eq!(out.kept.len(), 200);
        assert!(out.kept.iter().all(|r| r.user_id.starts_with("user") && r.label.is_some()));
        assert_eq!(out.dropped.len(), 4);
    }

    #[test]
    fn shares_follow_config() {
        let cfg = SynthConfig {
            n_users: 2000,
            posts_per_user: 1,
            contamination: 0.0,
            ..Default::default()
        };
        let (_, truth) = synthesize(&cfg).unwrap();
        let n_first = |d: Dichotomy| -> usize {
            truth
                .type_counts
                .iter()
                .filter(|(t, _)| t.parse::<MbtiType>().unwrap().is_first(d))
                .map(|(_, c)| c)
                .sum()
        };
        // within about 4 binomial standard deviations
        assert!((n_first(Dichotomy::EI) as f64 - 1000.0).abs() < 90.0);
        assert!((n_first(Dichotomy::NS) as f64 - 1700.0).abs() < 65.0);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SynthConfig { first_letter_share: [0.5, 1.0, 0.5, 0.5], ..small() };
        assert!(matches!(synthesize(&bad), Err(Error::Parameter(_))));
        assert!(synthesize(&SynthConfig { n_users: 50, ..small() }).is_err());
        assert!(planted_design(10, 3, &[3], 1.0, 0).is_err());
    }
}
