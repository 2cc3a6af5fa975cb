use std::sync::LazyLock;

use regex::Regex;

static NOISE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:https?://\S+|www\.\S+|@\w+|\$[a-z][a-z.]*)").expect("valid noise pattern")
});

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{L}\p{N}]+(?:['’\-][\p{L}\p{N}]+)*|[!?]+").expect("valid token pattern")
});

/// Strips URLs, user handles and cashtags, then splits into words and runs
/// of `!`/`?`. Case is preserved because capitalisation carries emphasis.
pub fn clean_text(raw: &str) -> Vec<String> {
    let stripped = NOISE.replace_all(raw, " ");
    TOKEN
        .find_iter(&stripped)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Re-joins cleaned tokens for scoring, attaching punctuation runs to the
/// preceding word so they do not count as separate words.
pub fn tokens_to_text(tokens: &[String]) -> String {
    let mut out = String::new();
    for t in tokens {
        let punct = t.chars().all(|c| c == '!' || c == '?');
        if !out.is_empty() && !punct {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_urls_and_splits_emphasis() {
        assert_eq!(
            clean_text("AAPL to the moon!!! https://t.co/x"),
            vec!["AAPL", "to", "the", "moon", "!!!"]
        );
    }

    #[test]
    fn strips_handles_and_cashtags() {
        assert_eq!(clean_text("@user $TSLA GREAT day"), vec!["GREAT", "day"]);
    }

    #[test]
    fn empty_input() {
        assert!(clean_text("").is_empty());
    }

    #[test]
    fn contractions_survive() {
        assert_eq!(
            clean_text("don't sell, hold?"),
            vec!["don't", "sell", "hold", "?"]
        );
        assert_eq!(tokens_to_text(&clean_text("moon!!! now")), "moon!!! now");
    }
}
