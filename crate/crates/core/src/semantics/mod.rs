//! Positional-dictionary scores and their corpus-level aggregates.

mod profile;
mod score;

pub use profile::{
    band_of, band_profile, centrality_histogram, describe, describe_text_stats, render_profile_markdown,
    select_population, CentralityHistogram, CorpusProfile, DescriptiveStats, HistogramPopulation,
    ProfilePopulation, TextStats, BAND_UPPER_EDGES, DEFAULT_Z_CUT,
};
pub use score::{read_scores_csv, score_corpus, score_dimension, score_pair, write_scores_csv};
