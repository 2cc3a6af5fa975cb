//! Rule-based valence scoring of short texts.
//!
//! Token valences from the lexicon are adjusted by preceding boosters and
//! dampeners, negations, capitalisation emphasis, "but" clauses and
//! exclamation/question-mark emphasis, then squashed into a compound score
//! in `[-1, 1]`.

use super::lexicon::Lexicon;

/// Scale applied to a negated valence.
pub const NEGATION_SCALAR: f64 = -0.74;
/// Intensity added to an ALL-CAPS word in mixed-case text.
pub const CAPS_INCREMENT: f64 = 0.733;
/// Intensity added per exclamation mark.
pub const EXCLAMATION_INCREMENT: f64 = 0.292;
pub const MAX_EXCLAMATIONS: usize = 4;
pub const QUESTION_INCREMENT: f64 = 0.18;
pub const MAX_QUESTION_AMPLIFIER: f64 = 0.96;
/// Normalisation constant in `s / √(s² + α)`.
pub const NORMALIZATION_ALPHA: f64 = 15.0;

const SPECIAL_CASES: &[(&str, f64)] = &[
    ("the shit", 3.0),
    ("the bomb", 3.0),
    ("bad ass", 1.5),
    ("badass", 1.5),
    ("bus stop", 0.0),
    ("yeah right", -2.0),
    ("kiss of death", -1.5),
    ("to die for", 3.0),
    ("beating heart", 3.5),
];

fn special_case(phrase: &str) -> Option<f64> {
    SPECIAL_CASES
        .iter()
        .find(|(p, _)| *p == phrase)
        .map(|&(_, v)| v)
}

/// `s / √(s² + α)`, clamped to `[-1, 1]`.
pub fn normalize(sum: f64) -> f64 {
    (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
}

/// True when the word has at least one cased character and none lowercase.
fn is_upper(word: &str) -> bool {
    word.chars().any(char::is_uppercase) && !word.chars().any(char::is_lowercase)
}

/// Strips leading and trailing ASCII punctuation unless that would leave at
/// most two characters (which keeps emoticons like `:)` intact).
fn strip_punctuation(token: &str) -> &str {
    let stripped = token.trim_matches(|c: char| c.is_ascii_punctuation());
    if stripped.chars().count() <= 2 {
        token
    } else {
        stripped
    }
}

struct Sentence<'a> {
    words: Vec<&'a str>,
    lower: Vec<String>,
    cap_differential: bool,
}

impl<'a> Sentence<'a> {
    fn new(text: &'a str) -> Self {
        let words: Vec<&str> = text.split_whitespace().map(strip_punctuation).collect();
        let lower = words.iter().map(|w| w.to_lowercase()).collect();
        let caps = words.iter().filter(|w| is_upper(w)).count();
        let diff = words.len() - caps;
        Self {
            cap_differential: diff > 0 && diff < words.len(),
            words,
            lower,
        }
    }
}

/// Compound sentiment of `text` in `[-1, 1]`. Unknown tokens contribute
/// nothing; text without lexicon hits scores exactly 0.
pub fn score_text(lexicon: &Lexicon, text: &str) -> f64 {
    let sentence = Sentence::new(text.trim());
    let n = sentence.words.len();
    let mut sentiments = Vec::with_capacity(n);
    for i in 0..n {
        let lw = sentence.lower[i].as_str();
        if lexicon.boosters.contains_key(lw)
            || (i + 1 < n && lw == "kind" && sentence.lower[i + 1] == "of")
        {
            sentiments.push(0.0);
            continue;
        }
        sentiments.push(token_valence(lexicon, &sentence, i));
    }
    but_reweight(&sentence.lower, &mut sentiments);

    if sentiments.is_empty() {
        return 0.0;
    }
    let mut sum: f64 = sentiments.iter().sum();
    let emphasis = punctuation_emphasis(text);
    if sum > 0.0 {
        sum += emphasis;
    } else if sum < 0.0 {
        sum -= emphasis;
    }
    normalize(sum)
}

fn token_valence(lexicon: &Lexicon, s: &Sentence<'_>, i: usize) -> f64 {
    let lower = &s.lower;
    let n = lower.len();
    let Some(base) = lexicon.valence(&lower[i]) else {
        return 0.0;
    };
    let mut valence = base;

    // "no" directly before another lexicon word acts as a negator, not as a
    // word in its own right.
    if lower[i] == "no" && i + 1 < n && lexicon.contains(&lower[i + 1]) {
        valence = 0.0;
    }
    if (i > 0 && lower[i - 1] == "no")
        || (i > 1 && lower[i - 2] == "no")
        || (i > 2 && lower[i - 3] == "no" && (lower[i - 1] == "or" || lower[i - 1] == "nor"))
    {
        valence = base * NEGATION_SCALAR;
    }

    if is_upper(s.words[i]) && s.cap_differential {
        if valence > 0.0 {
            valence += CAPS_INCREMENT;
        } else {
            valence -= CAPS_INCREMENT;
        }
    }

    for start in 0..3 {
        if i > start && !lexicon.contains(&lower[i - (start + 1)]) {
            let mut scalar = booster_scalar(
                lexicon,
                s.words[i - (start + 1)],
                valence,
                s.cap_differential,
            );
            if scalar != 0.0 {
                if start == 1 {
                    scalar *= 0.95;
                } else if start == 2 {
                    scalar *= 0.9;
                }
            }
            valence += scalar;
            valence = negation_check(lexicon, valence, lower, start, i);
            if start == 2 {
                valence = special_idioms(lexicon, valence, lower, i);
            }
        }
    }
    least_check(lexicon, valence, lower, i)
}

fn booster_scalar(lexicon: &Lexicon, word: &str, valence: f64, cap_differential: bool) -> f64 {
    let Some(&b) = lexicon.boosters.get(&word.to_lowercase()) else {
        return 0.0;
    };
    let mut scalar = if valence < 0.0 { -b } else { b };
    if is_upper(word) && cap_differential {
        if valence > 0.0 {
            scalar += CAPS_INCREMENT;
        } else {
            scalar -= CAPS_INCREMENT;
        }
    }
    scalar
}

fn is_negation(lexicon: &Lexicon, word: &str) -> bool {
    lexicon.negations.contains(word) || word.contains("n't")
}

fn negation_check(
    lexicon: &Lexicon,
    valence: f64,
    lower: &[String],
    start: usize,
    i: usize,
) -> f64 {
    let so_or_this = |w: &str| w == "so" || w == "this";
    match start {
        0 => {
            if is_negation(lexicon, &lower[i - 1]) {
                return valence * NEGATION_SCALAR;
            }
        }
        1 => {
            if lower[i - 2] == "never" && so_or_this(&lower[i - 1]) {
                return valence * 1.25;
            } else if lower[i - 2] == "without" && lower[i - 1] == "doubt" {
                return valence;
            } else if is_negation(lexicon, &lower[i - 2]) {
                return valence * NEGATION_SCALAR;
            }
        }
        2 => {
            if (lower[i - 3] == "never" && so_or_this(&lower[i - 2])) || so_or_this(&lower[i - 1]) {
                return valence * 1.25;
            } else if lower[i - 3] == "without"
                && (lower[i - 2] == "doubt" || lower[i - 1] == "doubt")
            {
                return valence;
            } else if is_negation(lexicon, &lower[i - 3]) {
                return valence * NEGATION_SCALAR;
            }
        }
        _ => {}
    }
    valence
}

fn special_idioms(lexicon: &Lexicon, mut valence: f64, lower: &[String], i: usize) -> f64 {
    let n = lower.len();
    let one_zero = format!("{} {}", lower[i - 1], lower[i]);
    let two_one_zero = format!("{} {} {}", lower[i - 2], lower[i - 1], lower[i]);
    let two_one = format!("{} {}", lower[i - 2], lower[i - 1]);
    let three_two_one = format!("{} {} {}", lower[i - 3], lower[i - 2], lower[i - 1]);
    let three_two = format!("{} {}", lower[i - 3], lower[i - 2]);

    for seq in [
        &one_zero,
        &two_one_zero,
        &two_one,
        &three_two_one,
        &three_two,
    ] {
        if let Some(v) = special_case(seq) {
            valence = v;
            break;
        }
    }
    if n - 1 > i {
        if let Some(v) = special_case(&format!("{} {}", lower[i], lower[i + 1])) {
            valence = v;
        }
    }
    if n - 1 > i + 1 {
        if let Some(v) = special_case(&format!("{} {} {}", lower[i], lower[i + 1], lower[i + 2])) {
            valence = v;
        }
    }
    for gram in [&three_two_one, &three_two, &two_one] {
        if let Some(b) = lexicon.boosters.get(gram.as_str()) {
            valence += b;
        }
    }
    valence
}

fn least_check(lexicon: &Lexicon, valence: f64, lower: &[String], i: usize) -> f64 {
    if i > 1 && !lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
        if lower[i - 2] != "at" && lower[i - 2] != "very" {
            return valence * NEGATION_SCALAR;
        }
    } else if i > 0 && !lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
        return valence * NEGATION_SCALAR;
    }
    valence
}

/// Halves sentiment before the first "but" and boosts it by half after.
///
/// Positions are located by value (first equal entry), which is how the
/// reference scorer behaves when a valence repeats; this is kept so scores
/// agree exactly.
fn but_reweight(lower: &[String], sentiments: &mut [f64]) {
    let Some(bi) = lower.iter().position(|w| w == "but") else {
        return;
    };
    for k in 0..sentiments.len() {
        let value = sentiments[k];
        let si = sentiments.iter().position(|&x| x == value).unwrap_or(k);
        if si < bi {
            sentiments[si] = value * 0.5;
        } else if si > bi {
            sentiments[si] = value * 1.5;
        }
    }
}

fn punctuation_emphasis(text: &str) -> f64 {
    let ep = text.matches('!').count().min(MAX_EXCLAMATIONS) as f64 * EXCLAMATION_INCREMENT;
    let qm_count = text.matches('?').count();
    let qm = if qm_count > 1 {
        if qm_count <= 3 {
            qm_count as f64 * QUESTION_INCREMENT
        } else {
            MAX_QUESTION_AMPLIFIER
        }
    } else {
        0.0
    };
    ep + qm
}
