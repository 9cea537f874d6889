//! Per-user feature matrix: assembly from records, persistence,
//! standardization and PCA.

pub mod lexicon;
pub mod pca;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BotScores, UserRecord};
use crate::error::{Error, Result};
use crate::mbti::MbtiType;
use crate::textprep::{self, clean_tokens, TokenList};

pub use lexicon::{liwc_scores, valence_scores, Lexicon, ValenceScores};
pub use pca::{standardize, PcaModel, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureGroup {
    Sm,
    Botometer,
    Liwc,
    Bert,
    Vader,
    Emoji,
    /// Principal-component scores derived from the other groups.
    Pca,
}

impl FeatureGroup {
    /// Column order of assembled matrices.
    pub const ORDER: [FeatureGroup; 7] = [
        FeatureGroup::Sm,
        FeatureGroup::Botometer,
        FeatureGroup::Liwc,
        FeatureGroup::Bert,
        FeatureGroup::Vader,
        FeatureGroup::Emoji,
        FeatureGroup::Pca,
    ];

    /// The five groups of the base roster (everything but emoji counts).
    pub const TABLE: [FeatureGroup; 5] = [
        FeatureGroup::Sm,
        FeatureGroup::Botometer,
        FeatureGroup::Liwc,
        FeatureGroup::Bert,
        FeatureGroup::Vader,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureGroup::Sm => "SM",
            FeatureGroup::Botometer => "BOTOMETER",
            FeatureGroup::Liwc => "LIWC",
            FeatureGroup::Bert => "BERT",
            FeatureGroup::Vader => "VADER",
            FeatureGroup::Emoji => "EMOJI",
            FeatureGroup::Pca => "PCA",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ORDER
            .into_iter()
            .find(|g| g.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown feature group {s:?}")))
    }
}

pub const SM_NAMES: [&str; 11] = [
    "followers_count",
    "friends_count",
    "listed_count",
    "favourites_count",
    "geo_enabled",
    "verified",
    "statuses_count",
    "default_profile",
    "default_profile_image",
    "profile_use_background_image",
    "has_extended_profile",
];

/// Row-per-user numeric matrix with named, grouped columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<String>,
    pub labels: Vec<Option<MbtiType>>,
    pub columns: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(
        rows: Vec<String>,
        labels: Vec<Option<MbtiType>>,
        columns: Vec<String>,
        groups: Vec<FeatureGroup>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        let m = FeatureMatrix {
            rows,
            labels,
            columns,
            groups,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.values.shape();
        if self.rows.len() != n || self.labels.len() != n {
            return Err(Error::Shape(format!("{} row ids / {} labels for {n} rows", self.rows.len(), self.labels.len())));
        }
        if self.columns.len() != m || self.groups.len() != m {
            return Err(Error::Shape(format!("{} names / {} groups for {m} columns", self.columns.len(), self.groups.len())));
        }
        let unique: BTreeSet<&String> = self.columns.iter().collect();
        if unique.len() != m {
            return Err(Error::Shape("duplicate column names".into()));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at row {}, column {}",
                pos % n.max(1),
                pos / n.max(1)
            )));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn group_counts(&self) -> BTreeMap<FeatureGroup, usize> {
        let mut out = BTreeMap::new();
        for g in &self.groups {
            *out.entry(*g).or_insert(0) += 1;
        }
        out
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.clone(),
            labels: self.labels.clone(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            values: self.values.select_columns(idx),
        }
    }

    pub fn without_groups(&self, drop: &[FeatureGroup]) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| !drop.contains(&self.groups[j])).collect();
        self.select_columns(&keep)
    }

    /// Binary targets for one dichotomy (`true` = first letter). Fails if
    /// any row is unlabeled.
    pub fn targets(&self, d: crate::Dichotomy) -> Result<Vec<bool>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.map(|t| t.is_first(d))
                    .ok_or_else(|| Error::UndefinedInput(format!("row {} ({}) has no label", i, self.rows[i])))
            })
            .collect()
    }

    /// Writes the tab-delimited form: a header of `user_id`, `label` and
    /// `name:GROUP` cells, then one row per user. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "user_id\tlabel")?;
        for (c, g) in self.columns.iter().zip(&self.groups) {
            write!(w, "\t{c}:{g}")?;
        }
        writeln!(w)?;
        for i in 0..self.n_rows() {
            let label = self.labels[i].map_or_else(|| "-".to_string(), |t| t.acronym());
            write!(w, "{}\t{}", self.rows[i], label)?;
            for j in 0..self.n_cols() {
                write!(w, "\t{}", self.values[(i, j)])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            reason: "missing header".into(),
        })??;
        let mut cells = header.split('\t');
        if cells.next() != Some("user_id") || cells.next() != Some("label") {
            return Err(Error::Parse {
                line: 1,
                reason: "header must start with user_id<TAB>label".into(),
            });
        }
        let mut columns = Vec::new();
        let mut groups = Vec::new();
        for cell in cells {
            let (name, group) = cell.rsplit_once(':').ok_or_else(|| Error::Parse {
                line: 1,
                reason: format!("column {cell:?} lacks a :GROUP suffix"),
            })?;
            columns.push(name.to_string());
            groups.push(group.parse().map_err(|e: Error| Error::Parse {
                line: 1,
                reason: e.to_string(),
            })?);
        }
        let m = columns.len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse { line: line_no, reason };
            let mut cells = line.split('\t');
            let id = cells.next().ok_or_else(|| err("empty row".into()))?;
            let label = cells.next().ok_or_else(|| err("missing label".into()))?;
            rows.push(id.to_string());
            labels.push(if label == "-" {
                None
            } else {
                Some(label.parse().map_err(|e: Error| err(e.to_string()))?)
            });
            let before = data.len();
            for cell in cells {
                data.push(cell.parse::<f64>().map_err(|e| err(format!("{cell:?}: {e}")))?);
            }
            if data.len() - before != m {
                return Err(err(format!("{} values, expected {m}", data.len() - before)));
            }
        }
        let values = DMatrix::from_row_slice(rows.len(), m, &data);
        FeatureMatrix::new(rows, labels, columns, groups, values)
    }
}

/// Per-coordinate mean of per-post embeddings.
pub fn aggregate_embeddings(post_embeddings: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = post_embeddings
        .first()
        .ok_or_else(|| Error::UndefinedInput("no embeddings to aggregate".into()))?;
    let d = first.len();
    // running mean: exact when all vectors are equal
    let mut mean = vec![0.0; d];
    for (i, v) in post_embeddings.iter().enumerate() {
        if v.len() != d {
            return Err(Error::Shape(format!("embedding {i} has dimension {}, expected {d}", v.len())));
        }
        let k = (i + 1) as f64;
        for (m, x) in mean.iter_mut().zip(v) {
            *m += (x - *m) / k;
        }
    }
    Ok(mean)
}

/// Emoji seen in at least `min_user_share` of users, ordered by total count
/// (descending) then by the sequence itself.
pub fn emoji_vocabulary(records: &[UserRecord], min_user_share: f64) -> Vec<String> {
    let per_user: Vec<_> = records.par_iter().map(|r| textprep::emoji_frequencies(&r.posts)).collect();
    let mut users: BTreeMap<&str, usize> = BTreeMap::new();
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for counts in &per_user {
        for (e, c) in counts {
            *users.entry(e).or_insert(0) += 1;
            *totals.entry(e).or_insert(0) += c;
        }
    }
    let threshold = min_user_share * records.len() as f64;
    let mut vocab: Vec<(&str, u64)> = totals
        .into_iter()
        .filter(|(e, _)| users[e] as f64 >= threshold)
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    vocab.into_iter().map(|(e, _)| e.to_string()).collect()
}

pub const DEFAULT_EMOJI_USER_SHARE: f64 = 0.001;

/// Lexicons used during assembly.
#[derive(Debug, Clone, Copy)]
pub struct Lexicons<'a> {
    pub liwc: &'a Lexicon,
    pub valence: &'a Lexicon,
}

impl Default for Lexicons<'static> {
    fn default() -> Self {
        Lexicons {
            liwc: Lexicon::default_liwc(),
            valence: Lexicon::default_valence(),
        }
    }
}

fn combined_tokens(r: &UserRecord) -> (TokenList, TokenList) {
    let bio = clean_tokens(&r.biography);
    let mut tweets = TokenList::default();
    for p in &r.posts {
        tweets.extend(clean_tokens(p));
    }
    (bio, tweets)
}

fn record_row(
    r: &UserRecord,
    parts: &BTreeSet<FeatureGroup>,
    lex: Lexicons<'_>,
    bert_dim: Option<usize>,
    vocab: &[String],
) -> Result<Vec<f64>> {
    let assembly = |part: FeatureGroup, reason: String| Error::Assembly {
        record: r.user_id.clone(),
        part: part.tag().to_string(),
        reason,
    };
    let mut row = Vec::new();
    let needs_text = parts.contains(&FeatureGroup::Liwc) || parts.contains(&FeatureGroup::Vader);
    let (bio, tweets) = if needs_text {
        combined_tokens(r)
    } else {
        Default::default()
    };
    for part in parts {
        match part {
            FeatureGroup::Sm => {
                let b = |x: bool| if x { 1.0 } else { 0.0 };
                row.extend([
                    r.followers_count as f64,
                    r.friends_count as f64,
                    r.listed_count as f64,
                    r.favourites_count as f64,
                    b(r.geo_enabled),
                    b(r.verified),
                    r.statuses_count as f64,
                    b(r.default_profile),
                    b(r.default_profile_image),
                    b(r.profile_use_background_image),
                    b(r.has_extended_profile),
                ]);
            }
            FeatureGroup::Botometer => {
                let scores = r
                    .bot_scores
                    .ok_or_else(|| assembly(*part, "bot scores missing".into()))?;
                row.extend(scores.values());
            }
            FeatureGroup::Liwc => {
                let mut all = bio.clone();
                all.extend(tweets.clone());
                let s = liwc_scores(&all, lex.liwc);
                row.extend(s.shares.iter().map(|(_, v)| *v));
                row.push(s.total_word_count as f64);
            }
            FeatureGroup::Bert => {
                let emb = r
                    .post_embeddings
                    .as_ref()
                    .ok_or_else(|| assembly(*part, "post embeddings missing".into()))?;
                let mean = aggregate_embeddings(emb).map_err(|e| assembly(*part, e.to_string()))?;
                if Some(mean.len()) != bert_dim {
                    return Err(assembly(
                        *part,
                        format!("embedding dimension {} differs from corpus dimension {:?}", mean.len(), bert_dim),
                    ));
                }
                row.extend(mean);
            }
            FeatureGroup::Vader => {
                let v = valence_scores(&bio, &tweets, lex.valence).map_err(|e| assembly(*part, e.to_string()))?;
                row.extend(v.values());
            }
            FeatureGroup::Pca => unreachable!("rejected by assemble_matrix"),
            FeatureGroup::Emoji => {
                let counts = textprep::emoji_frequencies(&r.posts);
                row.extend(vocab.iter().map(|e| counts.get(e).copied().unwrap_or(0) as f64));
            }
        }
    }
    Ok(row)
}

/// Builds the feature matrix. Groups always appear in
/// [`FeatureGroup::ORDER`]; requesting EMOJI without a vocabulary derives
/// one from the records.
pub fn assemble_matrix(
    records: &[UserRecord],
    parts: &[FeatureGroup],
    lexicons: Lexicons<'_>,
    emoji_vocabulary_opt: Option<&[String]>,
) -> Result<FeatureMatrix> {
    let parts: BTreeSet<FeatureGroup> = parts.iter().copied().collect();
    if parts.contains(&FeatureGroup::Pca) {
        return Err(Error::Parameter("PCA columns cannot be assembled from records".into()));
    }
    let derived;
    let vocab: &[String] = match (parts.contains(&FeatureGroup::Emoji), emoji_vocabulary_opt) {
        (true, Some(v)) => v,
        (true, None) => {
            derived = emoji_vocabulary(records, DEFAULT_EMOJI_USER_SHARE);
            &derived
        }
        (false, _) => &[],
    };
    let bert_dim = if parts.contains(&FeatureGroup::Bert) {
        records
            .iter()
            .find_map(|r| r.post_embeddings.as_ref().and_then(|e| e.first()).map(Vec::len))
    } else {
        None
    };

    let mut columns = Vec::new();
    let mut groups = Vec::new();
    for part in &parts {
        let names: Vec<String> = match part {
            FeatureGroup::Sm => SM_NAMES.iter().map(|s| s.to_string()).collect(),
            FeatureGroup::Botometer => BotScores::NAMES.iter().map(|s| s.to_string()).collect(),
            FeatureGroup::Liwc => lexicons
                .liwc
                .categories()
                .iter()
                .cloned()
                .chain(std::iter::once("total_word_count".to_string()))
                .collect(),
            FeatureGroup::Bert => (1..=bert_dim.unwrap_or(0)).map(|i| format!("e_{i}")).collect(),
            FeatureGroup::Vader => ValenceScores::NAMES.iter().map(|s| s.to_string()).collect(),
            FeatureGroup::Emoji => vocab.to_vec(),
            FeatureGroup::Pca => Vec::new(),
        };
        groups.extend(std::iter::repeat_n(*part, names.len()));
        columns.extend(names);
    }

    let rows: Vec<Result<Vec<f64>>> = records
        .par_iter()
        .map(|r| record_row(r, &parts, lexicons, bert_dim, vocab))
        .collect();
    let m = columns.len();
    let mut data = Vec::with_capacity(records.len() * m);
    for row in rows {
        data.extend(row?);
    }
    FeatureMatrix::new(
        records.iter().map(|r| r.user_id.clone()).collect(),
        records.iter().map(|r| r.label).collect(),
        columns,
        groups,
        DMatrix::from_row_slice(records.len(), m, &data),
    )
}
