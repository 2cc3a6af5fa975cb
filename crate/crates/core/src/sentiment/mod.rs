//! Lexicon-based sentiment scoring and per-trading-day aggregation.

pub mod clean;
pub mod daily;
pub mod lexicon;
pub mod vader;

pub use clean::{clean_text, tokens_to_text};
pub use daily::{
    aggregate_daily, parse_timestamp, score_tweets, DailyAggregation, DailySentiment,
    SentimentRecord,
};
pub use lexicon::{bundled_lexicon, load_lexicon, Lexicon, LexiconLoad, BUNDLED_LEXICON};
pub use vader::score_text;
