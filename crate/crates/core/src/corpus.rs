//! Account records: parsing, self-report label extraction, deduplication and
//! the inclusion/exclusion filter.
//!
//! The corpus file holds one JSON object per line. Required keys are
//! `user_id`, `biography` and `posts`; social metadata, `bot_scores`,
//! `post_embeddings` and `label` are optional.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbti::{is_acronym, MbtiType};
use crate::textprep::{self, LanguageDetector};

pub const DEFAULT_EMBEDDING_DIM: usize = 768;

/// The seven bot-likelihood scores, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BotScores {
    pub cap_english: f64,
    pub english_astroturf: f64,
    pub english_fake_follower: f64,
    pub english_financial: f64,
    pub english_other: f64,
    pub english_self_declared: f64,
    pub english_spammer: f64,
}

impl BotScores {
    pub const NAMES: [&'static str; 7] = [
        "cap_english",
        "english_astroturf",
        "english_fake_follower",
        "english_financial",
        "english_other",
        "english_self_declared",
        "english_spammer",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.cap_english,
            self.english_astroturf,
            self.english_fake_follower,
            self.english_financial,
            self.english_other,
            self.english_self_declared,
            self.english_spammer,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub biography: String,
    pub posts: Vec<String>,
    #[serde(default)]
    pub followers_count: u64,
    #[serde(default)]
    pub friends_count: u64,
    #[serde(default)]
    pub listed_count: u64,
    #[serde(default)]
    pub favourites_count: u64,
    #[serde(default)]
    pub statuses_count: u64,
    #[serde(default)]
    pub geo_enabled: bool,
    #[serde(default)]
    pub verified: bool,
    #[serde(default)]
    pub default_profile: bool,
    #[serde(default)]
    pub default_profile_image: bool,
    #[serde(default)]
    pub profile_use_background_image: bool,
    #[serde(default)]
    pub has_extended_profile: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bot_scores: Option<BotScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_embeddings: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<MbtiType>,
}

impl UserRecord {
    pub fn new(user_id: impl Into<String>, biography: impl Into<String>, posts: Vec<String>) -> Self {
        UserRecord {
            user_id: user_id.into(),
            biography: biography.into(),
            posts,
            followers_count: 0,
            friends_count: 0,
            listed_count: 0,
            favourites_count: 0,
            statuses_count: 0,
            geo_enabled: false,
            verified: false,
            default_profile: false,
            default_profile_image: false,
            profile_use_background_image: false,
            has_extended_profile: false,
            bot_scores: None,
            post_embeddings: None,
            label: None,
        }
    }

    /// Checks the record-level invariants: embedding count and dimension,
    /// bot scores in range.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(scores) = &self.bot_scores {
            for (name, v) in BotScores::NAMES.iter().zip(scores.values()) {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("bot score {name}={v} outside [0,1]"));
                }
            }
        }
        if let Some(emb) = &self.post_embeddings {
            if emb.len() != self.posts.len() {
                return Err(format!(
                    "{} post embeddings for {} posts",
                    emb.len(),
                    self.posts.len()
                ));
            }
            if let Some(first) = emb.first() {
                let d = first.len();
                if d == 0 {
                    return Err("zero-dimensional embedding".into());
                }
                if let Some(bad) = emb.iter().position(|v| v.len() != d) {
                    return Err(format!("embedding {bad} has dimension {} (expected {d})", emb[bad].len()));
                }
                if emb.iter().flatten().any(|x| !x.is_finite()) {
                    return Err("non-finite embedding value".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub records: Vec<UserRecord>,
    pub rejects: Vec<Reject>,
}

/// Reads line-delimited records. Blank lines are skipped; every other line
/// that fails to parse or validate lands in `rejects` with its 1-based line
/// number.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<UserRecord>(&line) {
            Ok(record) => match record.validate() {
                Ok(()) => out.records.push(record),
                Err(reason) => out.rejects.push(Reject { line: line_no, reason }),
            },
            Err(e) => out.rejects.push(Reject {
                line: line_no,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut writer: W, records: &[UserRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(mut writer: W, rejects: &[Reject]) -> Result<()> {
    for r in rejects {
        writeln!(writer, "{r}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// Acronym appears as a whole token of the username or biography.
    UsernameBio,
    /// A post contains "I am x", "I am a x" or "I am an x".
    TweetPhrase,
}

/// Alphanumeric runs of `text` with their byte spans.
fn alnum_runs(text: &str) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            runs.push((s, i));
        }
    }
    if let Some(s) = start {
        runs.push((s, text.len()));
    }
    runs
}

fn whitespace_gap(text: &str, a: (usize, usize), b: (usize, usize)) -> bool {
    let gap = &text[a.1..b.0];
    !gap.is_empty() && gap.chars().all(char::is_whitespace)
}

fn phrase_matches(post: &str, out: &mut BTreeSet<MbtiType>) {
    let lower = post.to_lowercase();
    let runs = alnum_runs(&lower);
    let word = |i: usize| &lower[runs[i].0..runs[i].1];
    for i in 0..runs.len().saturating_sub(2) {
        if word(i) != "i" || word(i + 1) != "am" || !whitespace_gap(&lower, runs[i], runs[i + 1]) {
            continue;
        }
        let mut j = i + 2;
        if matches!(word(j), "a" | "an") && whitespace_gap(&lower, runs[j - 1], runs[j]) {
            j += 1;
        }
        if j < runs.len() && whitespace_gap(&lower, runs[j - 1], runs[j]) {
            if let Ok(t) = word(j).parse::<MbtiType>() {
                out.insert(t);
            }
        }
    }
}

/// Extracts self-reported types, case-insensitively. Acronyms embedded in
/// longer alphanumeric tokens never match.
pub fn extract_mbti_labels(bio: &str, posts: &[String], mode: LabelSource) -> BTreeSet<MbtiType> {
    let mut out = BTreeSet::new();
    match mode {
        LabelSource::UsernameBio => {
            for (s, e) in alnum_runs(bio) {
                let tok = &bio[s..e];
                if is_acronym(tok) {
                    out.insert(tok.parse().expect("checked acronym"));
                }
            }
        }
        LabelSource::TweetPhrase => {
            for p in posts {
                phrase_matches(p, &mut out);
            }
        }
    }
    out
}

/// All distinct types referenced by the account: biography tokens, post
/// phrases and the record's own label, if any.
pub fn referenced_types(record: &UserRecord) -> BTreeSet<MbtiType> {
    let mut set = extract_mbti_labels(&record.biography, &record.posts, LabelSource::UsernameBio);
    set.extend(extract_mbti_labels(&record.biography, &record.posts, LabelSource::TweetPhrase));
    if let Some(l) = record.label {
        set.insert(l);
    }
    set
}

/// Keeps the first occurrence of each `user_id`, preserving order.
pub fn deduplicate(records: Vec<UserRecord>) -> Vec<UserRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert(r.user_id.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub min_posts: usize,
    pub min_english_fraction: f64,
    pub max_cap_score: f64,
    pub require_unique_label: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_posts: 100,
            min_english_fraction: 0.5,
            max_cap_score: 0.8,
            require_unique_label: true,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_english_fraction", self.min_english_fraction),
            ("max_cap_score", self.max_cap_score),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name}={v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Drop reasons, in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    Posts,
    English,
    Bot,
    Label,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Posts => "posts",
            DropReason::English => "english",
            DropReason::Bot => "bot",
            DropReason::Label => "label",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop(DropReason),
}

/// Inclusion decision for one account. The post bound is inclusive; a
/// record without bot scores passes the bot check.
pub fn apply_inclusion_filter(
    record: &UserRecord,
    policy: &FilterPolicy,
    english_fraction: f64,
    label_count: usize,
) -> Decision {
    if record.posts.len() < policy.min_posts {
        return Decision::Drop(DropReason::Posts);
    }
    if english_fraction <= policy.min_english_fraction {
        return Decision::Drop(DropReason::English);
    }
    if let Some(scores) = &record.bot_scores {
        if scores.cap_english >= policy.max_cap_score {
            return Decision::Drop(DropReason::Bot);
        }
    }
    if policy.require_unique_label && label_count != 1 {
        return Decision::Drop(DropReason::Label);
    }
    Decision::Keep
}

#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub kept: Vec<UserRecord>,
    pub dropped: Vec<(String, DropReason)>,
}

/// Runs the filter over a corpus. Kept records get their label set to the
/// unique referenced type.
pub fn filter_corpus(
    records: Vec<UserRecord>,
    policy: &FilterPolicy,
    detector: &dyn LanguageDetector,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for mut r in records {
        let english = if r.posts.is_empty() {
            0.0
        } else {
            textprep::english_fraction(&r.posts, detector).unwrap_or(0.0)
        };
        let types = referenced_types(&r);
        match apply_inclusion_filter(&r, policy, english, types.len()) {
            Decision::Keep => {
                if types.len() == 1 {
                    r.label = types.into_iter().next();
                }
                out.kept.push(r)
            }
            Decision::Drop(reason) => out.dropped.push((r.user_id.clone(), reason)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::StopwordDetector;

    fn t(s: &str) -> MbtiType {
        s.parse().unwrap()
    }

    fn record_with(n_posts: usize, cap: Option<f64>) -> UserRecord {
        let mut r = UserRecord::new("u", "INTJ", vec!["the cat and the dog".to_string(); n_posts]);
        r.bot_scores = cap.map(|c| BotScores {
            cap_english: c,
            english_astroturf: 0.0,
            english_fake_follower: 0.0,
            english_financial: 0.0,
            english_other: 0.0,
            english_self_declared: 0.0,
            english_spammer: 0.0,
        });
        r
    }

    #[test]
    fn parse_empty_and_single() {
        let parsed = parse_records("".as_bytes()).unwrap();
        assert!(parsed.records.is_empty() && parsed.rejects.is_empty());

        let line = r#"{"user_id":"42","biography":"b","posts":["p"]}"#;
        let parsed = parse_records(line.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].user_id, "42");
    }

    #[test]
    fn truncated_middle_line_is_rejected_with_line_number() {
        let text = concat!(
            r#"{"user_id":"a","biography":"","posts":[]}"#,
            "\n",
            r#"{"user_id":"b","biography":"","po"#,
            "\n",
            r#"{"user_id":"c","biography":"","posts":[]}"#,
            "\n"
        );
        let parsed = parse_records(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.rejects.len(), 1);
        assert_eq!(parsed.rejects[0].line, 2);
        assert!(parsed.rejects[0].to_string().starts_with("line 2: "));
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let bad_emb = r#"{"user_id":"a","biography":"","posts":["x","y"],"post_embeddings":[[1.0,2.0]]}"#;
        let bad_dim = r#"{"user_id":"a","biography":"","posts":["x","y"],"post_embeddings":[[1.0,2.0],[1.0]]}"#;
        let bad_bot = r#"{"user_id":"a","biography":"","posts":[],"bot_scores":{"cap_english":1.5,"english_astroturf":0,"english_fake_follower":0,"english_financial":0,"english_other":0,"english_self_declared":0,"english_spammer":0}}"#;
        for line in [bad_emb, bad_dim, bad_bot] {
            let parsed = parse_records(line.as_bytes()).unwrap();
            assert_eq!(parsed.rejects.len(), 1, "{line}");
        }
    }

    #[test]
    fn bio_extraction() {
        let got = extract_mbti_labels("Proud INTJ | runner", &[], LabelSource::UsernameBio);
        assert_eq!(got, BTreeSet::from([t("INTJ")]));
        assert!(extract_mbti_labels("PRINTJOB fan", &[], LabelSource::UsernameBio).is_empty());
        let got = extract_mbti_labels("intj or entp?", &[], LabelSource::UsernameBio);
        assert_eq!(got, BTreeSet::from([t("INTJ"), t("ENTP")]));
    }

    #[test]
    fn phrase_extraction() {
        let posts = vec!["i am an enfp honestly".to_string()];
        assert_eq!(
            extract_mbti_labels("", &posts, LabelSource::TweetPhrase),
            BTreeSet::from([t("ENFP")])
        );
        let posts = vec![
            "I AM INTJ".to_string(),
            "I am a istp.".to_string(),
            "i am xinfj".to_string(),
            "i am not infj".to_string(),
            "infj".to_string(),
        ];
        assert_eq!(
            extract_mbti_labels("", &posts, LabelSource::TweetPhrase),
            BTreeSet::from([t("INTJ"), t("ISTP")])
        );
        // the bio mode ignores posts and vice versa
        assert!(extract_mbti_labels("INTJ", &[], LabelSource::TweetPhrase).is_empty());
    }

    #[test]
    fn dedup_keeps_first() {
        let a = UserRecord::new("a", "first", vec![]);
        let b = UserRecord::new("b", "", vec![]);
        let a2 = UserRecord::new("a", "second", vec![]);
        let out = deduplicate(vec![a.clone(), b.clone(), a2]);
        assert_eq!(out, vec![a, b]);
        assert!(deduplicate(vec![]).is_empty());
    }

    #[test]
    fn dedup_fixture_count() {
        let mut recs: Vec<_> = (0..990).map(|i| UserRecord::new(i.to_string(), "", vec![])).collect();
        for i in 0..10 {
            recs.push(UserRecord::new((i * 7).to_string(), "dup", vec![]));
        }
        assert_eq!(deduplicate(recs).len(), 990);
    }

    #[test]
    fn filter_examples() {
        let p = FilterPolicy::default();
        assert_eq!(apply_inclusion_filter(&record_with(150, Some(0.1)), &p, 0.9, 1), Decision::Keep);
        assert_eq!(
            apply_inclusion_filter(&record_with(150, Some(0.85)), &p, 0.9, 1),
            Decision::Drop(DropReason::Bot)
        );
        assert_eq!(
            apply_inclusion_filter(&record_with(150, Some(0.1)), &p, 0.9, 2),
            Decision::Drop(DropReason::Label)
        );
        // boundary and ordering
        assert_eq!(apply_inclusion_filter(&record_with(100, None), &p, 0.9, 1), Decision::Keep);
        assert_eq!(
            apply_inclusion_filter(&record_with(99, Some(0.95)), &p, 0.1, 0),
            Decision::Drop(DropReason::Posts)
        );
        assert_eq!(
            apply_inclusion_filter(&record_with(100, Some(0.95)), &p, 0.5, 0),
            Decision::Drop(DropReason::English)
        );
        assert_eq!(
            apply_inclusion_filter(&record_with(100, Some(0.8)), &p, 0.51, 1),
            Decision::Drop(DropReason::Bot)
        );
    }

    #[test]
    fn filtering_is_idempotent() {
        let mut recs = vec![record_with(120, Some(0.1)), record_with(50, None), record_with(120, Some(0.9))];
        for (i, r) in recs.iter_mut().enumerate() {
            r.user_id = i.to_string();
        }
        recs.push(UserRecord::new("x", "INTJ ENFP", vec!["the and of to".into(); 120]));
        let p = FilterPolicy::default();
        let once = filter_corpus(recs, &p, &StopwordDetector::default());
        assert_eq!(once.kept.len(), 1);
        assert_eq!(once.kept[0].label, Some(t("INTJ")));
        let twice = filter_corpus(once.kept.clone(), &p, &StopwordDetector::default());
        assert_eq!(twice.kept, once.kept);
        assert!(twice.dropped.is_empty());
    }

    #[test]
    fn policy_validation() {
        assert!(FilterPolicy::default().validate().is_ok());
        let bad = FilterPolicy {
            max_cap_score: 1.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn extraction_ignores_case(bio in "[a-zA-Z |?!]{0,40}", post in "[a-zA-Z ]{0,40}") {
                let posts = vec![post.clone()];
                for mode in [LabelSource::UsernameBio, LabelSource::TweetPhrase] {
                    let base = extract_mbti_labels(&bio, &posts, mode);
                    let up = extract_mbti_labels(&bio.to_uppercase(), &[post.to_uppercase()], mode);
                    let low = extract_mbti_labels(&bio.to_lowercase(), &[post.to_lowercase()], mode);
                    prop_assert_eq!(&base, &up);
                    prop_assert_eq!(&base, &low);
                }
            }

            #[test]
            fn dedup_is_distinct_subsequence(ids in proptest::collection::vec(0u8..20, 0..60)) {
                let recs: Vec<_> = ids.iter().map(|i| UserRecord::new(i.to_string(), "", vec![])).collect();
                let out = deduplicate(recs.clone());
                let uniq: HashSet<_> = out.iter().map(|r| r.user_id.clone()).collect();
                prop_assert_eq!(uniq.len(), out.len());
                let mut it = recs.iter();
                for r in &out {
                    prop_assert!(it.any(|x| x.user_id == r.user_id));
                }
            }
        }
    }
}
