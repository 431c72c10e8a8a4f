//! Building blocks for mining parallel sentences from bilingual lecture
//! transcripts.

pub mod align;
pub mod corpus;
pub mod embed;
pub mod ingest;
pub mod lang;
pub mod segment;

pub use align::{align_coarse_to_fine, align_exact, extract_pairs, AlignError, AlignParams, AlignmentPath, Link};
pub use corpus::{AlignType, Corpus, CorpusError, Span, TranslationPair};
pub use embed::{EmbedError, EmbeddingProvider, EmbeddingVector};
pub use ingest::{IngestError, LectureMeta};
pub use lang::{LanguageCode, LanguagePair, Script};
