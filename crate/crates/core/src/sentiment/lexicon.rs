use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use crate::error::{Error, Result};

/// Empirical intensity increase contributed by a booster word.
pub const BOOSTER_INCREMENT: f64 = 0.293;

const NEGATIONS: &[&str] = &[
    "aint",
    "arent",
    "cannot",
    "cant",
    "couldnt",
    "darent",
    "didnt",
    "doesnt",
    "ain't",
    "aren't",
    "can't",
    "couldn't",
    "daren't",
    "didn't",
    "doesn't",
    "dont",
    "hadnt",
    "hasnt",
    "havent",
    "isnt",
    "mightnt",
    "mustnt",
    "neither",
    "don't",
    "hadn't",
    "hasn't",
    "haven't",
    "isn't",
    "mightn't",
    "mustn't",
    "neednt",
    "needn't",
    "never",
    "none",
    "nope",
    "nor",
    "not",
    "nothing",
    "nowhere",
    "oughtnt",
    "shant",
    "shouldnt",
    "uhuh",
    "wasnt",
    "werent",
    "oughtn't",
    "shan't",
    "shouldn't",
    "uh-uh",
    "wasn't",
    "weren't",
    "without",
    "wont",
    "wouldnt",
    "won't",
    "wouldn't",
    "rarely",
    "seldom",
    "despite",
];

const BOOSTERS_UP: &[&str] = &[
    "absolutely",
    "amazingly",
    "awfully",
    "completely",
    "considerable",
    "considerably",
    "decidedly",
    "deeply",
    "effing",
    "enormous",
    "enormously",
    "entirely",
    "especially",
    "exceptional",
    "exceptionally",
    "extreme",
    "extremely",
    "fabulously",
    "flipping",
    "flippin",
    "frackin",
    "fracking",
    "fricking",
    "frickin",
    "frigging",
    "friggin",
    "fully",
    "fuckin",
    "fucking",
    "fuggin",
    "fugging",
    "greatly",
    "hella",
    "highly",
    "hugely",
    "incredible",
    "incredibly",
    "intensely",
    "major",
    "majorly",
    "more",
    "most",
    "particularly",
    "purely",
    "quite",
    "really",
    "remarkably",
    "so",
    "substantially",
    "thoroughly",
    "total",
    "totally",
    "tremendous",
    "tremendously",
    "uber",
    "unbelievably",
    "unusually",
    "utter",
    "utterly",
    "very",
];

const BOOSTERS_DOWN: &[&str] = &[
    "almost",
    "barely",
    "hardly",
    "just enough",
    "kind of",
    "kinda",
    "kindof",
    "kind-of",
    "less",
    "little",
    "marginal",
    "marginally",
    "occasional",
    "occasionally",
    "partly",
    "scarce",
    "scarcely",
    "slight",
    "slightly",
    "somewhat",
    "sort of",
    "sorta",
    "sortof",
    "sort-of",
];

/// Token valences plus the booster table and negation set used by the
/// scorer. Lookups are made with lowercased tokens.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub entries: HashMap<String, f64>,
    pub boosters: HashMap<String, f64>,
    pub negations: HashSet<String>,
}

/// Result of parsing a lexicon file.
#[derive(Debug, Clone)]
pub struct LexiconLoad {
    pub lexicon: Lexicon,
    /// 1-based line numbers that could not be parsed.
    pub malformed_lines: Vec<usize>,
    /// Tokens seen more than once; the last value wins.
    pub duplicates: usize,
}

impl Lexicon {
    /// Lexicon with the given valences and the standard booster/negation
    /// tables.
    pub fn with_entries(entries: HashMap<String, f64>) -> Self {
        let mut boosters = HashMap::new();
        for w in BOOSTERS_UP {
            boosters.insert((*w).to_string(), BOOSTER_INCREMENT);
        }
        for w in BOOSTERS_DOWN {
            boosters.insert((*w).to_string(), -BOOSTER_INCREMENT);
        }
        Self {
            entries,
            boosters,
            negations: NEGATIONS.iter().map(|s| (*s).to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn valence(&self, token_lower: &str) -> Option<f64> {
        self.entries.get(token_lower).copied()
    }

    #[inline]
    pub fn contains(&self, token_lower: &str) -> bool {
        self.entries.contains_key(token_lower)
    }
}

/// The standard VADER lexicon shipped with the crate.
pub const BUNDLED_LEXICON: &str = include_str!("../../data/vader_lexicon.txt");

/// Parses [`BUNDLED_LEXICON`].
pub fn bundled_lexicon() -> Lexicon {
    load_lexicon(BUNDLED_LEXICON.as_bytes())
        .expect("bundled lexicon parses")
        .lexicon
}

/// Parses `token<TAB>valence[<TAB>extras…]` lines.
pub fn load_lexicon<R: BufRead>(source: R) -> Result<LexiconLoad> {
    let mut entries = HashMap::new();
    let mut malformed_lines = Vec::new();
    let mut duplicates = 0;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let token = fields.next().unwrap_or_default();
        let valence = fields.next().and_then(|v| v.trim().parse::<f64>().ok());
        match valence {
            Some(v) if !token.is_empty() && v.is_finite() => {
                if entries.insert(token.to_string(), v).is_some() {
                    duplicates += 1;
                }
            }
            _ => malformed_lines.push(idx + 1),
        }
    }
    if entries.is_empty() {
        return Err(Error::Data("lexicon source contains no entries".into()));
    }
    if duplicates > 0 {
        log::warn!("lexicon contained {duplicates} duplicate tokens; last value kept");
    }
    Ok(LexiconLoad {
        lexicon: Lexicon::with_entries(entries),
        malformed_lines,
        duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_valence_and_ignores_extras() {
        let load = load_lexicon("good\t1.9\t0.9434\t[2, 1, 1, 3]\n".as_bytes()).unwrap();
        assert_eq!(load.lexicon.valence("good"), Some(1.9));
        assert!(load.malformed_lines.is_empty());
    }

    #[test]
    fn duplicates_keep_last_and_are_counted() {
        let load = load_lexicon("up\t1.0\nup\t2.0\nbad line\n".as_bytes()).unwrap();
        assert_eq!(load.lexicon.valence("up"), Some(2.0));
        assert_eq!(load.duplicates, 1);
        assert_eq!(load.malformed_lines, vec![3]);
    }

    #[test]
    fn empty_source_is_an_error() {
        assert!(load_lexicon("".as_bytes()).is_err());
    }
}
