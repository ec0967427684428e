// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the engine. Every variant maps to a stable 32-bit
/// response code so it can cross the command page.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TpmError {
    #[error("PCR index out of range")]
    BadIndex,
    #[error("digest length does not match the bank digest size")]
    BadDigestLength,
    #[error("handle does not reference a loaded object")]
    BadHandle,
    #[error("key does not carry the sign attribute")]
    KeyNotSigning,
    #[error("key is not a restricted decryption key")]
    KeyNotDecrypting,
    #[error("NV index is not defined")]
    IndexUndefined,
    #[error("data exceeds the NV size limit")]
    DataTooLarge,
    #[error("credential activation failed")]
    ActivationFailed,
    #[error("import of wrapped key failed")]
    ImportFailed,
    #[error("unseal failed")]
    UnsealFailed,
    #[error("unsupported key template")]
    UnsupportedTemplate,
    #[error("malformed or unsupported public key")]
    BadPublicKey,
    #[error("entropy source unavailable")]
    EntropyUnavailable,
    #[error("nonce exceeds 64 bytes")]
    NonceTooLarge,
    #[error("PCR selection is empty")]
    EmptySelection,
    #[error("credential secret exceeds 32 bytes")]
    SecretTooLarge,
    #[error("response does not fit in the transport buffer")]
    ResponseTooLarge,
    #[error("unknown command code {0:#x}")]
    UnknownCommand(u32),
    #[error("malformed command: {0}")]
    Decode(&'static str),
}

pub type Result<T> = core::result::Result<T, TpmError>;

impl TpmError {
    pub fn code(&self) -> u32 {
        match self {
            TpmError::BadIndex => 0x0001,
            TpmError::BadDigestLength => 0x0002,
            TpmError::BadHandle => 0x0003,
            TpmError::KeyNotSigning => 0x0004,
            TpmError::KeyNotDecrypting => 0x0005,
            TpmError::IndexUndefined => 0x0006,
            TpmError::DataTooLarge => 0x0007,
            TpmError::ActivationFailed => 0x0008,
            TpmError::ImportFailed => 0x0009,
            TpmError::UnsealFailed => 0x000A,
            TpmError::UnsupportedTemplate => 0x000B,
            TpmError::BadPublicKey => 0x000C,
            TpmError::EntropyUnavailable => 0x000D,
            TpmError::NonceTooLarge => 0x000E,
            TpmError::EmptySelection => 0x000F,
            TpmError::SecretTooLarge => 0x0010,
            TpmError::ResponseTooLarge => 0x0011,
            TpmError::UnknownCommand(_) => 0x0100,
            TpmError::Decode(_) => 0x0101,
        }
    }

    /// Inverse of [`TpmError::code`]. Detail carried by `UnknownCommand`
    /// and `Decode` does not survive the round trip.
    pub fn from_code(code: u32) -> Option<TpmError> {
        Some(match code {
            0x0001 => TpmError::BadIndex,
            0x0002 => TpmError::BadDigestLength,
            0x0003 => TpmError::BadHandle,
            0x0004 => TpmError::KeyNotSigning,
            0x0005 => TpmError::KeyNotDecrypting,
            0x0006 => TpmError::IndexUndefined,
            0x0007 => TpmError::DataTooLarge,
            0x0008 => TpmError::ActivationFailed,
            0x0009 => TpmError::ImportFailed,
            0x000A => TpmError::UnsealFailed,
            0x000B => TpmError::UnsupportedTemplate,
            0x000C => TpmError::BadPublicKey,
            0x000D => TpmError::EntropyUnavailable,
            0x000E => TpmError::NonceTooLarge,
            0x000F => TpmError::EmptySelection,
            0x0010 => TpmError::SecretTooLarge,
            0x0011 => TpmError::ResponseTooLarge,
            0x0100 => TpmError::UnknownCommand(0),
            0x0101 => TpmError::Decode("remote decode failure"),
            _ => return None,
        })
    }
}
