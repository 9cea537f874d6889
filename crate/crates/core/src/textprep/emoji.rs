//! Emoji sequence scanning over a shipped code point range table.

use std::sync::OnceLock;

const RANGE_TABLE: &str = include_str!("../../data/emoji_ranges.txt");

pub const ZWJ: char = '\u{200D}';
pub const VS16: char = '\u{FE0F}';
const KEYCAP: char = '\u{20E3}';

/// Parses the range table format: `HEX` or `START..END` per line, `#`
/// starts a comment.
pub fn parse_ranges(text: &str) -> Result<Vec<(u32, u32)>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse = |s: &str| u32::from_str_radix(s.trim(), 16).map_err(|e| format!("line {}: {e}", no + 1));
        let (lo, hi) = match line.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(line)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("line {}: empty range", no + 1));
        }
        out.push((lo, hi));
    }
    out.sort_unstable();
    Ok(out)
}

fn ranges() -> &'static [(u32, u32)] {
    static RANGES: OnceLock<Vec<(u32, u32)>> = OnceLock::new();
    RANGES.get_or_init(|| parse_ranges(RANGE_TABLE).expect("bundled emoji table is valid"))
}

pub fn is_emoji_base(c: char) -> bool {
    let cp = c as u32;
    let table = ranges();
    let idx = table.partition_point(|&(lo, _)| lo <= cp);
    idx > 0 && cp <= table[idx - 1].1
}

fn is_regional_indicator(c: char) -> bool {
    ('\u{1F1E6}'..='\u{1F1FF}').contains(&c)
}

fn is_modifier(c: char) -> bool {
    ('\u{1F3FB}'..='\u{1F3FF}').contains(&c)
}

fn is_tag(c: char) -> bool {
    ('\u{E0020}'..='\u{E007F}').contains(&c)
}

/// Code points that only ever appear inside an emoji sequence.
pub fn is_component(c: char) -> bool {
    c == ZWJ || c == VS16 || c == KEYCAP || is_tag(c)
}

/// Anything the text cleaner must preserve as part of an emoji.
pub fn is_emoji_char(c: char) -> bool {
    is_emoji_base(c) || is_component(c)
}

/// Length in bytes of the emoji sequence starting at byte `start` of `s`,
/// or `None` when no sequence starts there.
pub fn sequence_len(s: &str, start: usize) -> Option<usize> {
    let rest = &s[start..];
    let chars: Vec<(usize, char)> = rest.char_indices().take(64).collect();
    let first = chars.first()?.1;
    if !is_emoji_base(first) {
        return None;
    }
    let end_of = |k: usize| chars.get(k).map_or(rest.len(), |&(i, _)| i);
    if is_regional_indicator(first) {
        return match chars.get(1) {
            Some(&(_, c)) if is_regional_indicator(c) => Some(end_of(2)),
            _ => Some(end_of(1)),
        };
    }
    let mut k = 1;
    loop {
        while let Some(&(_, c)) = chars.get(k) {
            if c == VS16 || c == KEYCAP || is_modifier(c) || is_tag(c) {
                k += 1;
            } else {
                break;
            }
        }
        match (chars.get(k), chars.get(k + 1)) {
            (Some(&(_, ZWJ)), Some(&(_, next))) if is_emoji_base(next) => k += 2,
            _ => break,
        }
    }
    Some(end_of(k))
}

/// Iterates the emoji sequences of `s` in order.
pub fn sequences(s: &str) -> impl Iterator<Item = &str> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        while pos < s.len() {
            if let Some(len) = sequence_len(s, pos) {
                let seq = &s[pos..pos + len];
                pos += len;
                return Some(seq);
            }
            pos += s[pos..].chars().next().map_or(1, char::len_utf8);
        }
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parses() {
        assert!(ranges().len() > 20);
        assert!(parse_ranges("zz").is_err());
        assert!(parse_ranges("10..5").is_err());
        assert_eq!(parse_ranges("# c\n41\n42..43 # x\n").unwrap(), vec![(0x41, 0x41), (0x42, 0x43)]);
    }

    #[test]
    fn joins_sequences() {
        let family = "\u{1F468}\u{200D}\u{1F469}\u{200D}\u{1F467}";
        assert_eq!(sequences(family).collect::<Vec<_>>(), vec![family]);
        let thumbs = "\u{1F44D}\u{1F3FD}";
        assert_eq!(sequences(thumbs).collect::<Vec<_>>(), vec![thumbs]);
        let flags = "\u{1F1EC}\u{1F1E7}\u{1F1EB}\u{1F1F7}";
        assert_eq!(sequences(flags).count(), 2);
        assert_eq!(sequences("❤️❤️").collect::<Vec<_>>(), vec!["❤️", "❤️"]);
        assert_eq!(sequences("plain text 123").count(), 0);
    }
}
