//! Audio ingestion, preprocessing and augmentation.
//!
//! Pipeline order is load, augment (trim/filter/reverb/codec), standardize
//! to four seconds, then z-score normalize right before the network.

pub mod augment;
pub mod clip;
pub mod codec;
pub mod filter;
pub mod preprocess;
pub mod reverb;
pub mod spectrum;
pub mod trim;
pub mod wav;

pub use augment::{augment_clip, augment_pipeline, AugmentKind, AugmentOutput, AugmentationSpec};
pub use clip::{AudioClip, Label, CANONICAL_SAMPLE_RATE};
pub use codec::{codec_compress, CodecConfig};
pub use filter::{bandpass_filter, highpass_filter, lowpass_filter};
pub use preprocess::{preprocess, preprocess_to, standardize_length, standardize_samples, zscore_normalize, TARGET_SECONDS, ZSCORE_EPSILON};
pub use reverb::{reverberate, Impulse};
pub use trim::{trim_silence, TrimOutcome};
pub use wav::{load_wav, write_wav_pcm16};
