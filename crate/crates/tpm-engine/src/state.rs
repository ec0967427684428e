// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use p256::ecdsa::signature::Signer;
use p256::ecdsa::{Signature, SigningKey};
use p256::SecretKey;
use zeroize::Zeroizing;

use crate::credential::{CredentialBlob, CREDENTIAL_LABEL};
use crate::entropy::EntropySource;
use crate::envelope::open_with;
use crate::error::{Result, TpmError};
use crate::keys::{derive_primary, Hierarchy, KeyObject, KeyTemplate, PublicKey};
use crate::offline::{wrap_binding, SealedBlob, WrappedKey, DUPLICATE_LABEL, SEAL_LABEL};
use crate::pcr::{Bank, PcrSelection, PCR_COUNT};
use crate::quote::{pcr_digest, Quote, MAX_NONCE};

/// Maximum size of one NV index.
pub const NV_MAX_DATA: usize = 4096;

/// First handle handed out for loaded objects.
pub const TRANSIENT_HANDLE_BASE: u32 = 0x8000_0000;

/// NV attribute bits. Indices are always owner-readable and owner-writable.
pub const NV_AUTHWRITE: u32 = 1 << 2;
pub const NV_AUTHREAD: u32 = 1 << 18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NvEntry {
    pub data: Vec<u8>,
    pub attributes: u32,
}

struct Seeds {
    endorsement: Zeroizing<[u8; 32]>,
    storage: Zeroizing<[u8; 32]>,
    null: Zeroizing<[u8; 32]>,
}

impl Seeds {
    fn draw(entropy: &mut dyn EntropySource) -> Result<Self> {
        let mut draw = || -> Result<Zeroizing<[u8; 32]>> {
            let mut s = Zeroizing::new([0u8; 32]);
            entropy.fill(s.as_mut())?;
            Ok(s)
        };
        Ok(Self {
            endorsement: draw()?,
            storage: draw()?,
            null: draw()?,
        })
    }

    fn get(&self, hierarchy: Hierarchy) -> &[u8; 32] {
        match hierarchy {
            Hierarchy::Endorsement => &self.endorsement,
            Hierarchy::Storage => &self.storage,
            Hierarchy::Null => &self.null,
        }
    }
}

/// Complete volatile state of one ephemeral engine instance.
///
/// Nothing here is ever persisted. Rebooting discards the instance and draws
/// fresh seeds, so every key and NV index from the previous boot is gone.
pub struct TpmState {
    seeds: Seeds,
    pcrs: BTreeMap<Bank, Vec<Vec<u8>>>,
    nv: BTreeMap<u32, NvEntry>,
    objects: BTreeMap<u32, KeyObject>,
    next_handle: u32,
    boot_counter: u64,
}

impl fmt::Debug for TpmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TpmState")
            .field("boot_counter", &self.boot_counter)
            .field("nv_indices", &self.nv.keys().collect::<Vec<_>>())
            .field("loaded_objects", &self.objects.len())
            .finish_non_exhaustive()
    }
}

impl TpmState {
    /// Manufactures a fresh instance with boot counter 0.
    pub fn manufacture(entropy: &mut dyn EntropySource) -> Result<Self> {
        Self::manufacture_with_counter(entropy, 0)
    }

    /// Discards this instance and manufactures its successor on the same
    /// machine. Only the boot counter carries over.
    pub fn reboot(self, entropy: &mut dyn EntropySource) -> Result<Self> {
        Self::manufacture_with_counter(entropy, self.boot_counter + 1)
    }

    fn manufacture_with_counter(entropy: &mut dyn EntropySource, boot_counter: u64) -> Result<Self> {
        let seeds = Seeds::draw(entropy)?;
        let pcrs = Bank::ALL
            .iter()
            .map(|&b| (b, vec![b.zero_digest(); PCR_COUNT]))
            .collect();
        Ok(Self {
            seeds,
            pcrs,
            nv: BTreeMap::new(),
            objects: BTreeMap::new(),
            next_handle: TRANSIENT_HANDLE_BASE,
            boot_counter,
        })
    }

    pub fn boot_counter(&self) -> u64 {
        self.boot_counter
    }

    /// TPM2_Startup. There is no saved state to resume.
    pub fn startup(&mut self) {}

    /// TPM2_Shutdown. Nothing is saved.
    pub fn shutdown(&mut self) {}

    pub fn create_primary(&mut self, hierarchy: Hierarchy, template: &KeyTemplate) -> Result<(u32, PublicKey)> {
        template.validate()?;
        let secret = derive_primary(self.seeds.get(hierarchy), template);
        let object = KeyObject::from_secret(template.algorithm, secret, template.attributes);
        let public = object.public.clone();
        Ok((self.load(object), public))
    }

    fn load(&mut self, object: KeyObject) -> u32 {
        let handle = self.next_handle;
        self.next_handle = self.next_handle.wrapping_add(1).max(TRANSIENT_HANDLE_BASE);
        self.objects.insert(handle, object);
        handle
    }

    fn object(&self, handle: u32) -> Result<&KeyObject> {
        self.objects.get(&handle).ok_or(TpmError::BadHandle)
    }

    /// Public part of a loaded object.
    pub fn public(&self, handle: u32) -> Result<&PublicKey> {
        Ok(&self.object(handle)?.public)
    }

    pub fn pcr_extend(&mut self, bank: Bank, index: u32, data_digest: &[u8]) -> Result<Vec<u8>> {
        if index as usize >= PCR_COUNT {
            return Err(TpmError::BadIndex);
        }
        if data_digest.len() != bank.digest_size() {
            return Err(TpmError::BadDigestLength);
        }
        let slot = &mut self.pcrs.get_mut(&bank).expect("all banks allocated")[index as usize];
        *slot = bank.extend(slot, data_digest);
        Ok(slot.clone())
    }

    /// Values in selection order, ascending index within each selection.
    pub fn pcr_read(&self, selections: &[PcrSelection]) -> Vec<Vec<u8>> {
        selections
            .iter()
            .flat_map(|s| {
                let bank = &self.pcrs[&s.bank];
                s.indices().map(move |i| bank[i].clone())
            })
            .collect()
    }

    pub fn quote(&self, aik_handle: u32, selections: &[PcrSelection], nonce: &[u8]) -> Result<Quote> {
        let aik = self.object(aik_handle)?;
        if !aik.attributes.sign {
            return Err(TpmError::KeyNotSigning);
        }
        if nonce.len() > MAX_NONCE {
            return Err(TpmError::NonceTooLarge);
        }
        if selections.is_empty() || selections.iter().any(PcrSelection::is_empty) {
            return Err(TpmError::EmptySelection);
        }
        let mut quote = Quote {
            signer: aik.public.name(),
            nonce: nonce.to_vec(),
            selection: selections.to_vec(),
            boot_counter: self.boot_counter,
            pcr_digest: pcr_digest(&self.pcr_read(selections)),
            signature: [0; 64],
        };
        let signature: Signature = SigningKey::from(&aik.secret).sign(&quote.body());
        quote.signature.copy_from_slice(&signature.to_bytes());
        Ok(quote)
    }

    /// Defines the index if needed and replaces its contents.
    pub fn nv_define_write(&mut self, index: u32, data: &[u8]) -> Result<()> {
        if data.len() > NV_MAX_DATA {
            return Err(TpmError::DataTooLarge);
        }
        self.nv.insert(
            index,
            NvEntry {
                data: data.to_vec(),
                attributes: NV_AUTHWRITE | NV_AUTHREAD,
            },
        );
        Ok(())
    }

    pub fn nv_read(&self, index: u32) -> Result<&[u8]> {
        self.nv
            .get(&index)
            .map(|e| e.data.as_slice())
            .ok_or(TpmError::IndexUndefined)
    }

    pub fn nv_entry(&self, index: u32) -> Option<&NvEntry> {
        self.nv.get(&index)
    }

    /// Recovers a credential secret. Every cryptographic failure, whether
    /// wrong EK, wrong AIK name or a tampered blob, reports `ActivationFailed`.
    pub fn activate_credential(&self, ek_handle: u32, aik_handle: u32, blob: &CredentialBlob) -> Result<Vec<u8>> {
        let ek = self.object(ek_handle)?;
        let aik = self.object(aik_handle)?;
        if !ek.attributes.is_storage_parent() {
            return Err(TpmError::ActivationFailed);
        }
        open_with(&ek.secret, CREDENTIAL_LABEL, &aik.public.name(), &blob.0)
            .map(|s| s.to_vec())
            .ok_or(TpmError::ActivationFailed)
    }

    /// Loads a key wrapped to the public part of `parent_handle`.
    pub fn import_wrapped(&mut self, parent_handle: u32, wrapped: &WrappedKey) -> Result<u32> {
        let parent = self.object(parent_handle)?;
        if !parent.attributes.is_storage_parent() {
            return Err(TpmError::KeyNotDecrypting);
        }
        if !wrapped.attributes.is_storage_parent() {
            return Err(TpmError::ImportFailed);
        }
        let binding = wrap_binding(&parent.public.name(), &wrapped.public.name());
        let scalar =
            open_with(&parent.secret, DUPLICATE_LABEL, &binding, &wrapped.sensitive).ok_or(TpmError::ImportFailed)?;
        let secret = SecretKey::from_slice(&scalar).map_err(|_| TpmError::ImportFailed)?;
        if secret.public_key() != *wrapped.public.point() {
            return Err(TpmError::ImportFailed);
        }
        let mut attributes = wrapped.attributes;
        attributes.sensitive_data_origin = false;
        let object = KeyObject::from_secret(wrapped.public.algorithm(), secret, attributes);
        Ok(self.load(object))
    }

    pub fn unseal(&self, handle: u32, blob: &SealedBlob) -> Result<Vec<u8>> {
        let key = self.object(handle)?;
        if !key.attributes.is_storage_parent() {
            return Err(TpmError::KeyNotDecrypting);
        }
        open_with(&key.secret, SEAL_LABEL, &key.public.name(), &blob.0)
            .map(|s| s.to_vec())
            .ok_or(TpmError::UnsealFailed)
    }

    /// Every secret byte string the instance holds: the three hierarchy
    /// seeds followed by the private scalar of each loaded object.
    #[cfg(feature = "secret-introspection")]
    pub fn secret_material(&self) -> Vec<Vec<u8>> {
        let mut out = vec![
            self.seeds.endorsement.to_vec(),
            self.seeds.storage.to_vec(),
            self.seeds.null.to_vec(),
        ];
        out.extend(self.objects.values().map(|o| o.secret.to_bytes().to_vec()));
        out
    }
}
