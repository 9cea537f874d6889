use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::textprep::TokenList;

const DEFAULT_LIWC: &str = include_str!("../../data/liwc_default.tsv");
const DEFAULT_VALENCE: &str = include_str!("../../data/valence_default.tsv");

/// Category order of the default word-category lexicon.
pub const LIWC_CATEGORIES: [&str; 73] = [
    "function", "pronoun", "ppron", "i", "we", "you", "shehe", "they", "ipron", "article", "prep",
    "auxverb", "adverb", "conj", "negate", "verb", "adj", "compare", "interrog", "number", "quant",
    "affect", "posemo", "negemo", "anx", "anger", "sad", "social", "family", "friend", "female",
    "male", "cogproc", "insight", "cause", "discrep", "tentat", "certain", "differ", "percept",
    "see", "hear", "feel", "bio", "body", "health", "sexual", "ingest", "drives", "affiliation",
    "achiev", "power", "reward", "risk", "focuspast", "focuspresent", "focusfuture", "relativ",
    "motion", "space", "time", "work", "leisure", "home", "money", "relig", "death", "informal",
    "swear", "netspeak", "assent", "nonflu", "filler",
];

pub const POS: &str = "POS";
pub const NEG: &str = "NEG";

/// Word/prefix → category lexicon.
///
/// A pattern ending in `*` matches any token starting with its stem; every
/// other pattern matches whole tokens only.
#[derive(Debug, Clone)]
pub struct Lexicon {
    categories: Vec<String>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, Vec<usize>)>,
}

impl Lexicon {
    /// Parses `word_or_prefix<TAB>cat1,cat2` lines. When `categories` is
    /// given it fixes the category order and every entry must use them;
    /// otherwise categories are taken in order of first appearance.
    pub fn parse(text: &str, categories: Option<&[&str]>) -> Result<Self> {
        let mut cats: Vec<String> = categories
            .map(|c| c.iter().map(|s| s.to_string()).collect())
            .unwrap_or_default();
        let mut index: HashMap<String, usize> = cats.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        if index.len() != cats.len() {
            return Err(Error::Parameter("duplicate category names".into()));
        }
        let fixed = categories.is_some();
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| Error::Parse {
                line: no + 1,
                reason: reason.to_string(),
            };
            let (pattern, cat_list) = line.split_once('\t').ok_or_else(|| err("expected pattern<TAB>categories"))?;
            let pattern = pattern.trim().to_lowercase();
            let mut ids = Vec::new();
            for cat in cat_list.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                let id = match index.get(cat) {
                    Some(&id) => id,
                    None if !fixed => {
                        cats.push(cat.to_string());
                        index.insert(cat.to_string(), cats.len() - 1);
                        cats.len() - 1
                    }
                    None => return Err(err(&format!("unknown category {cat:?}"))),
                };
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
            if ids.is_empty() {
                return Err(err("entry without categories"));
            }
            let slot = match pattern.strip_suffix('*') {
                Some("") => return Err(err("prefix pattern with empty stem")),
                Some(stem) => prefixes.entry(stem.to_string()).or_default(),
                None if pattern.is_empty() => return Err(err("empty pattern")),
                None => exact.entry(pattern).or_default(),
            };
            for id in ids {
                if !slot.contains(&id) {
                    slot.push(id);
                }
            }
        }
        Ok(Lexicon {
            categories: cats,
            exact,
            prefixes: prefixes.into_iter().collect(),
        })
    }

    pub fn default_liwc() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::parse(DEFAULT_LIWC, Some(&LIWC_CATEGORIES)).expect("bundled lexicon is valid"))
    }

    pub fn default_valence() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::parse(DEFAULT_VALENCE, Some(&[POS, NEG])).expect("bundled lexicon is valid"))
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    /// Marks in `hits` every category matched by `token`.
    fn mark(&self, token: &str, hits: &mut [bool]) {
        if let Some(ids) = self.exact.get(token) {
            for &i in ids {
                hits[i] = true;
            }
        }
        for (stem, ids) in &self.prefixes {
            if token.starts_with(stem.as_str()) {
                for &i in ids {
                    hits[i] = true;
                }
            }
        }
    }

    /// Number of tokens matching each category; a token counts at most once
    /// per category.
    pub fn category_counts(&self, tokens: &TokenList) -> Vec<u64> {
        let mut counts = vec![0u64; self.categories.len()];
        let mut hits = vec![false; self.categories.len()];
        for tok in tokens.iter() {
            hits.iter_mut().for_each(|h| *h = false);
            self.mark(tok, &mut hits);
            for (c, h) in counts.iter_mut().zip(&hits) {
                *c += u64::from(*h);
            }
        }
        counts
    }
}

/// Per-category token share plus the total token count.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScores {
    pub shares: Vec<(String, f64)>,
    pub total_word_count: u64,
}

pub fn liwc_scores(tokens: &TokenList, lexicon: &Lexicon) -> CategoryScores {
    let counts = lexicon.category_counts(tokens);
    let total = tokens.len() as u64;
    let shares = lexicon
        .categories()
        .iter()
        .zip(counts)
        .map(|(name, c)| (name.clone(), if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect();
    CategoryScores {
        shares,
        total_word_count: total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Valence {
    pub pos_words: f64,
    pub neg_words: f64,
    pub sentiment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValenceScores {
    pub bio: Valence,
    pub tweets: Valence,
}

impl ValenceScores {
    pub const NAMES: [&'static str; 6] = [
        "tweets_sentiment",
        "bio_sentiment",
        "tweets_pos_words",
        "bio_pos_words",
        "tweets_neg_words",
        "bio_neg_words",
    ];

    /// Values in [`ValenceScores::NAMES`] order.
    pub fn values(&self) -> [f64; 6] {
        [
            self.tweets.sentiment,
            self.bio.sentiment,
            self.tweets.pos_words,
            self.bio.pos_words,
            self.tweets.neg_words,
            self.bio.neg_words,
        ]
    }
}

fn valence_of(tokens: &TokenList, lexicon: &Lexicon, pos: usize, neg: usize) -> Valence {
    if tokens.is_empty() {
        return Valence::default();
    }
    let counts = lexicon.category_counts(tokens);
    let n = tokens.len() as f64;
    let (p, q) = (counts[pos] as f64 / n, counts[neg] as f64 / n);
    let sentiment = if p + q == 0.0 { 0.0 } else { (p - q) / (p + q) };
    Valence {
        pos_words: p,
        neg_words: q,
        sentiment,
    }
}

pub fn valence_scores(bio: &TokenList, tweets: &TokenList, lexicon: &Lexicon) -> Result<ValenceScores> {
    let (pos, neg) = match (lexicon.category_index(POS), lexicon.category_index(NEG)) {
        (Some(p), Some(n)) => (p, n),
        _ => return Err(Error::Parameter("valence lexicon needs POS and NEG categories".into())),
    };
    Ok(ValenceScores {
        bio: valence_of(bio, lexicon, pos, neg),
        tweets: valence_of(tweets, lexicon, pos, neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::parse("happi*\tposemo\nsad\tnegemo\ngood\tposemo,adj\n", None).unwrap()
    }

    fn share(s: &CategoryScores, name: &str) -> f64 {
        s.shares.iter().find(|(n, _)| n == name).unwrap().1
    }

    #[test]
    fn bundled_lexicons_load() {
        let l = Lexicon::default_liwc();
        assert_eq!(l.categories().len(), 73);
        assert_eq!(Lexicon::default_valence().categories(), [POS, NEG]);
    }

    #[test]
    fn parse_errors() {
        assert!(Lexicon::parse("*\tx\n", None).is_err());
        assert!(Lexicon::parse("word\n", None).is_err());
        assert!(Lexicon::parse("word\tnope\n", Some(&["a"])).is_err());
        assert!(Lexicon::parse("", Some(&["a", "a"])).is_err());
    }

    #[test]
    fn ratio_and_prefix() {
        let toks = tokenize("good good a b c d e f g h");
        let s = liwc_scores(&toks, &lex());
        assert_eq!(share(&s, "posemo"), 0.2);
        assert_eq!(s.total_word_count, 10);
        let s = liwc_scores(&tokenize("happiness"), &lex());
        assert_eq!(share(&s, "posemo"), 1.0);
        let s = liwc_scores(&tokenize("happ"), &lex());
        assert_eq!(share(&s, "posemo"), 0.0);
    }

    #[test]
    fn empty_tokens_give_zero() {
        let s = liwc_scores(&TokenList::default(), &lex());
        assert!(s.shares.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(s.total_word_count, 0);
    }

    #[test]
    fn valence_examples() {
        let v = Lexicon::default_valence();
        let s = valence_scores(&TokenList::default(), &tokenize("good great love"), v).unwrap();
        assert_eq!(s.tweets.sentiment, 1.0);
        assert_eq!(s.bio, Valence::default());
        let s = valence_scores(&tokenize("good bad"), &tokenize("x"), v).unwrap();
        assert_eq!(s.bio.sentiment, 0.0);
        let s = valence_scores(&TokenList::default(), &tokenize("good great love bad a b c d e f"), v).unwrap();
        assert!((s.tweets.pos_words - 0.3).abs() < 1e-15);
        assert!((s.tweets.neg_words - 0.1).abs() < 1e-15);
        assert!((s.tweets.sentiment - 0.5).abs() < 1e-15);
        assert!(valence_scores(&TokenList::default(), &TokenList::default(), &lex()).is_err());
    }

    proptest! {
        #[test]
        fn counts_are_additive_and_shares_bounded(
            a in proptest::collection::vec("(happy|happiness|sad|good|x|y)", 0..20),
            b in proptest::collection::vec("(happy|happiness|sad|good|x|y)", 0..20),
        ) {
            let l = lex();
            let ta = tokenize(&a.join(" "));
            let tb = tokenize(&b.join(" "));
            let mut tab = ta.clone();
            tab.extend(tb.clone());
            let ca = l.category_counts(&ta);
            let cb = l.category_counts(&tb);
            let cab = l.category_counts(&tab);
            for i in 0..ca.len() {
                prop_assert_eq!(ca[i] + cb[i], cab[i]);
            }
            for (_, v) in liwc_scores(&tab, &l).shares {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let vs = valence_scores(&ta, &tb, Lexicon::default_valence()).unwrap();
            prop_assert!((-1.0..=1.0).contains(&vs.bio.sentiment));
            prop_assert!((-1.0..=1.0).contains(&vs.tweets.sentiment));
        }
    }
}
