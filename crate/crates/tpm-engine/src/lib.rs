// SPDX-License-Identifier: Apache-2.0

//! A minimal, ephemeral TPM 2.0 engine.
//!
//! Every instance is manufactured from fresh entropy and lives only in
//! memory: seeds, keys, PCR banks and NV indices vanish with it. The command
//! surface covers PCR read/extend, quotes, primary key creation, NV storage,
//! credential activation and the seal/import/unseal key hierarchy flow.

pub mod command;
mod credential;
mod entropy;
mod envelope;
mod error;
mod keys;
mod offline;
mod pcr;
mod quote;
mod state;

pub use credential::{make_credential, CredentialBlob, MAX_CREDENTIAL_SECRET};
pub use entropy::{EntropySource, OsEntropy, RngEntropy};
pub use error::{Result, TpmError};
pub use keys::{Hierarchy, KeyAlgorithm, KeyAttributes, KeyTemplate, Name, PublicKey, PUBLIC_KEY_LEN};
pub use offline::{seal, wrap_key, OfflineKey, SealedBlob, WrappedKey, MAX_SEALED_SECRET};
pub use pcr::{Bank, PcrSelection, PCR_COUNT};
pub use quote::{pcr_digest, Quote, MAX_NONCE};
pub use state::{NvEntry, TpmState, NV_AUTHREAD, NV_AUTHWRITE, NV_MAX_DATA, TRANSIENT_HANDLE_BASE};
