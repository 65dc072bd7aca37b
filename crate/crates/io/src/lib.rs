//! File formats used across the toolkit: multichannel WAV (PCM16 or
//! float32) and schema-versioned line-delimited JSON records.

mod error;
mod jsonl;
mod wav;

pub use error::{IoError, Result};
pub use jsonl::{read_records, write_records, RecordWriter, SchemaHeader};
pub use wav::{read_wav, read_wav_with_format, require_sample_rate, write_wav, SampleFormat};
