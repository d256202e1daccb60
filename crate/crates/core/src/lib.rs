//! Semantic-similarity evaluation for cross-modal video retrieval.
//!
//! Captions are turned into word, part-of-speech and synset sets
//! ([`textproc`]), related by caption-to-caption proxies into a continuous
//! video-caption similarity matrix ([`proxy`]), and that matrix drives
//! nDCG evaluation and diagnostics ([`metrics`]) as well as thresholded
//! triplet sampling for training ([`training`]).
//!
//! ```
//! use semsim::proxy::{ProcessedCorpus, ProxyConfig, ProxyKind, SimilarityBuilder, Direction};
//! use semsim::textproc::Pipeline;
//!
//! let pipeline = Pipeline::default();
//! let captions = vec![
//!     pipeline.process_text("c1", "v1", "stir food in the pan"),
//!     pipeline.process_text("c2", "v2", "mix the ingredients in the pan together"),
//! ];
//! let corpus = ProcessedCorpus::from_processed(captions).unwrap();
//! let config = ProxyConfig::new(ProxyKind::Bow);
//! let sim = SimilarityBuilder::new(&corpus, &config)
//!     .build(Direction::VideoToCaption)
//!     .unwrap();
//! assert_eq!(sim.get(0, 0), 1.0);
//! // {stir, food, pan} against {mix, ingredient, pan, together}
//! assert!((sim.get(0, 1) - 1.0 / 6.0).abs() < 1e-12);
//! ```

pub mod corpus;
pub mod dense;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod proxy;
pub mod textproc;
pub mod training;

pub use error::{Error, Result};

// The guide's code blocks run as doctests so they cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/captions.md")]
    mod captions {}
    #[doc = include_str!("../../../book/src/proxies.md")]
    mod proxies {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
