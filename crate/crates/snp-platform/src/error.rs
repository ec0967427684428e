// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("launch image has no parts")]
    EmptyImage,
    #[error("message failed authentication under the VMPCK")]
    AeadFailure,
    #[error("message sequence number was already used")]
    ReplayedSequence,
    #[error("VMPL {0} does not exist")]
    InvalidVmpl(u32),
    #[error("no execution context registered for this role")]
    NoSuchContext,
    #[error("entropy draws are limited to 1024 bytes")]
    DrawTooLarge,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

/// Why a report failed verification against a certificate chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("certificate chain is missing the root or the VCEK")]
    ChainIncomplete,
    #[error("chain root does not match the pinned root")]
    UntrustedRoot,
    #[error("certificate signature invalid")]
    BadCertificate,
    #[error("report signature invalid")]
    BadSignature,
    #[error("malformed certificate chain")]
    MalformedChain,
}
