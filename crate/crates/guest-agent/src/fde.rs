// SPDX-License-Identifier: Apache-2.0

//! Full disk encryption with an ephemeral vTPM.
//!
//! A workstation creates an intermediate storage key, seals the disk key to
//! it once, and on every boot wraps the intermediate key to that boot's
//! parent public key. The guest imports the wrapped key and unseals.

use rand::{CryptoRng, RngCore};
use tpm_engine::{seal, wrap_key, Hierarchy, KeyTemplate, OfflineKey, PublicKey, SealedBlob, WrappedKey};
use zeroize::Zeroizing;

use crate::client::{TpmClient, TpmTransport};
use crate::error::AgentError;

pub const DISK_KEY_LEN: usize = 32;

/// The vTPM key the intermediate key is wrapped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdeParent {
    /// The ephemeral storage root key.
    StorageRoot,
    /// The endorsement key.
    Endorsement,
}

impl FdeParent {
    fn primary(self) -> (Hierarchy, KeyTemplate) {
        match self {
            FdeParent::StorageRoot => (Hierarchy::Storage, KeyTemplate::storage_root()),
            FdeParent::Endorsement => (Hierarchy::Endorsement, KeyTemplate::endorsement()),
        }
    }
}

/// Workstation side: creates the intermediate key and seals the disk key to
/// it. The sealed blob does not change across boots.
pub fn prepare_disk<R: RngCore + CryptoRng>(
    disk_key: &[u8],
    rng: &mut R,
) -> Result<(OfflineKey, SealedBlob), AgentError> {
    let intermediate = OfflineKey::generate_storage_key(rng);
    let sealed = seal(intermediate.public(), disk_key, rng)?;
    Ok((intermediate, sealed))
}

/// Workstation side: wraps the intermediate key to one boot's parent key.
pub fn wrap_for_boot<R: RngCore + CryptoRng>(
    intermediate: &OfflineKey,
    parent_public: &PublicKey,
    rng: &mut R,
) -> Result<WrappedKey, AgentError> {
    Ok(wrap_key(intermediate, parent_public, rng)?)
}

/// Guest side: the public key the workstation must wrap to on this boot.
pub fn fde_parent_public<T: TpmTransport>(
    client: &mut TpmClient<T>,
    parent: FdeParent,
) -> Result<PublicKey, AgentError> {
    let (hierarchy, template) = parent.primary();
    Ok(client.create_primary(hierarchy, template)?.1)
}

/// Guest side: imports the wrapped intermediate key under `parent` and
/// unseals the disk key.
pub fn fde_unlock<T: TpmTransport>(
    client: &mut TpmClient<T>,
    parent: FdeParent,
    sealed: &SealedBlob,
    wrapped: &WrappedKey,
) -> Result<Zeroizing<Vec<u8>>, AgentError> {
    let (hierarchy, template) = parent.primary();
    let (parent_handle, _) = client.create_primary(hierarchy, template)?;
    let handle = client.import(parent_handle, wrapped)?;
    Ok(Zeroizing::new(client.unseal(handle, sealed)?))
}
