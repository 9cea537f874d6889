use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// One of the four binary trait pairs.
///
/// The positive class of every dichotomy is its first letter (E, N, T, J);
/// all pooled metrics depend on this orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dichotomy {
    EI,
    NS,
    TF,
    JP,
}

impl Dichotomy {
    pub const ALL: [Dichotomy; 4] = [Dichotomy::EI, Dichotomy::NS, Dichotomy::TF, Dichotomy::JP];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(positive, negative)` letters.
    pub fn letters(self) -> (char, char) {
        match self {
            Dichotomy::EI => ('E', 'I'),
            Dichotomy::NS => ('N', 'S'),
            Dichotomy::TF => ('T', 'F'),
            Dichotomy::JP => ('J', 'P'),
        }
    }

    pub fn letter(self, positive: bool) -> char {
        let (p, n) = self.letters();
        if positive {
            p
        } else {
            n
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dichotomy::EI => "E/I",
            Dichotomy::NS => "N/S",
            Dichotomy::TF => "T/F",
            Dichotomy::JP => "J/P",
        }
    }
}

impl fmt::Display for Dichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A four-letter type. Each slot holds `true` for the first letter of its
/// dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MbtiType {
    first: [bool; 4],
}

impl MbtiType {
    pub fn from_letters(first: [bool; 4]) -> Self {
        MbtiType { first }
    }

    /// Whether the type carries the first (positive) letter of `d`.
    pub fn is_first(&self, d: Dichotomy) -> bool {
        self.first[d.index()]
    }

    pub fn letter(&self, d: Dichotomy) -> char {
        d.letter(self.is_first(d))
    }

    /// All 16 types in a fixed order (index bits: EI, NS, TF, JP; first letter = 0).
    pub fn all() -> impl Iterator<Item = MbtiType> {
        (0..16u8).map(MbtiType::from_index)
    }

    pub fn from_index(idx: u8) -> Self {
        let mut first = [false; 4];
        for (slot, f) in first.iter_mut().enumerate() {
            *f = idx >> (3 - slot) & 1 == 0;
        }
        MbtiType { first }
    }

    pub fn index(&self) -> u8 {
        self.first
            .iter()
            .enumerate()
            .map(|(slot, &f)| if f { 0 } else { 1 << (3 - slot) })
            .sum()
    }

    pub fn acronym(&self) -> String {
        Dichotomy::ALL.iter().map(|&d| self.letter(d)).collect()
    }
}

impl fmt::Display for MbtiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.acronym())
    }
}

impl FromStr for MbtiType {
    type Err = Error;

    /// Case-insensitive parse of a four-letter acronym.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().map(|c| c.to_ascii_uppercase()).collect();
        if chars.len() != 4 {
            return Err(Error::Parameter(format!("not an MBTI acronym: {s:?}")));
        }
        let mut first = [false; 4];
        for (d, c) in Dichotomy::ALL.iter().zip(&chars) {
            let (p, n) = d.letters();
            first[d.index()] = if *c == p {
                true
            } else if *c == n {
                false
            } else {
                return Err(Error::Parameter(format!("not an MBTI acronym: {s:?}")));
            };
        }
        Ok(MbtiType { first })
    }
}

impl Serialize for MbtiType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.acronym())
    }
}

impl<'de> Deserialize<'de> for MbtiType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns true when `token` is one of the 16 acronyms, ignoring case.
pub fn is_acronym(token: &str) -> bool {
    token.len() == 4 && token.parse::<MbtiType>().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_distinct_acronyms_round_trip() {
        let all: Vec<_> = MbtiType::all().collect();
        let mut names: Vec<String> = all.iter().map(|t| t.acronym()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 16);
        for t in all {
            assert_eq!(t.acronym().parse::<MbtiType>().unwrap(), t);
            assert_eq!(MbtiType::from_index(t.index()), t);
        }
    }

    #[test]
    fn parse_is_case_insensitive() {
        let t: MbtiType = "enfp".parse().unwrap();
        assert_eq!(t.acronym(), "ENFP");
        assert!(t.is_first(Dichotomy::EI));
        assert!(!t.is_first(Dichotomy::JP));
    }

    #[test]
    fn rejects_non_acronyms() {
        assert!("INTX".parse::<MbtiType>().is_err());
        assert!("INT".parse::<MbtiType>().is_err());
        assert!(!is_acronym("PRINTJ"));
    }
}
