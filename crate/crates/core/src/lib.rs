//! Grayscale image encryption by DNA substitution.
//!
//! Pixels are coded as nucleotide quadruples, swapped pairwise, and each
//! quadruple is replaced by a randomly chosen position where it occurs in a
//! key DNA sequence. The pointer image is then scrambled blockwise by one of
//! sixteen magic-square or zigzag patterns. Replicas encrypted with
//! independent keys and patterns can be spread over several storage
//! backends, and the [`analysis`] module provides the usual statistical
//! checks on the result.
//!
//! ```
//! use dnavault::{cipher, keystore, scramble::PatternId, KeyRing};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
//! let key = keystore::random_key(0, 50_000, &mut rng).unwrap();
//! let keys: KeyRing = [keystore::KeyIndex::build(key)].into_iter().collect();
//! let index = keys.key_index(0).unwrap();
//!
//! let pixels: Vec<u8> = (0..64).collect();
//! let pattern = PatternId::new(3).unwrap();
//! let c = cipher::encrypt(&pixels, 8, 8, &index, pattern, &mut rng, &Default::default()).unwrap();
//! assert_eq!(cipher::decrypt(&c, &keys).unwrap(), pixels);
//! # use dnavault::KeyProvider;
//! ```

pub mod analysis;
pub mod cipher;
pub mod codec;
pub mod error;
pub mod image;
pub mod keystore;
pub mod multicloud;
pub mod num;
pub mod scramble;

pub use cipher::{decrypt, encrypt, CipherContainer, EncryptOptions};
pub use error::{Error, Result};
pub use keystore::{KeyIndex, KeyProvider, KeyRegistry, KeyRing};
pub use num::Real;

pub type CorrelationReport = analysis::CorrelationReport<f64>;
pub type CorrelationReportF32 = analysis::CorrelationReport<f32>;
pub type AvalancheReport = analysis::AvalancheReport<f64>;
pub type AvalancheReportF32 = analysis::AvalancheReport<f32>;
pub type KeyspaceReport = analysis::KeyspaceReport<f64>;
pub type KeyspaceReportF32 = analysis::KeyspaceReport<f32>;
pub type KeyStats = analysis::KeyStats<f64>;
pub type AnalysisRow = analysis::AnalysisRow<f64>;
