// SPDX-License-Identifier: Apache-2.0

use svsm_service::GuestVm;
use tpm_engine::command::{execute, Command, Response};
use tpm_engine::{
    Bank, CredentialBlob, EntropySource, Hierarchy, KeyTemplate, PcrSelection, PublicKey, Quote, SealedBlob, TpmError,
    TpmState, WrappedKey,
};
use vmpl_channel::ChannelError;

use crate::error::AgentError;

/// Carries encoded TPM commands to some engine.
pub trait TpmTransport: Send {
    fn transact(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError>;
}

impl TpmTransport for GuestVm {
    fn transact(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        self.invoke(command)
    }
}

impl<T: TpmTransport + ?Sized> TpmTransport for &mut T {
    fn transact(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        (**self).transact(command)
    }
}

impl<T: TpmTransport + ?Sized> TpmTransport for Box<T> {
    fn transact(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        (**self).transact(command)
    }
}

/// A TPM emulated in guest user space, outside the SVSM's protection.
#[derive(Debug)]
pub struct SoftwareTpm(pub TpmState);

impl SoftwareTpm {
    pub fn manufacture(entropy: &mut dyn EntropySource) -> Result<Self, TpmError> {
        TpmState::manufacture(entropy).map(SoftwareTpm)
    }
}

impl TpmTransport for SoftwareTpm {
    fn transact(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        execute(&mut self.0, command).map_err(|e| ChannelError::Engine(e.code()))
    }
}

/// Typed TPM calls over a transport.
pub struct TpmClient<T> {
    transport: T,
}

impl<T> std::fmt::Debug for TpmClient<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TpmClient").finish_non_exhaustive()
    }
}

fn unexpected() -> AgentError {
    AgentError::Protocol("unexpected TPM response")
}

impl<T: TpmTransport> TpmClient<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    pub fn call(&mut self, command: &Command) -> Result<Response, AgentError> {
        let bytes = self.transport.transact(&command.encode())?;
        Ok(Response::decode(&bytes)?)
    }

    pub fn create_primary(
        &mut self,
        hierarchy: Hierarchy,
        template: KeyTemplate,
    ) -> Result<(u32, PublicKey), AgentError> {
        match self.call(&Command::CreatePrimary { hierarchy, template })? {
            Response::Created { handle, public } => Ok((handle, public)),
            _ => Err(unexpected()),
        }
    }

    pub fn pcr_extend(&mut self, bank: Bank, index: u32, digest: &[u8]) -> Result<Vec<u8>, AgentError> {
        match self.call(&Command::PcrExtend {
            bank,
            index,
            digest: digest.to_vec(),
        })? {
            Response::PcrValue(v) => Ok(v),
            _ => Err(unexpected()),
        }
    }

    pub fn pcr_read(&mut self, selection: &[PcrSelection]) -> Result<Vec<Vec<u8>>, AgentError> {
        match self.call(&Command::PcrRead {
            selection: selection.to_vec(),
        })? {
            Response::PcrValues(v) => Ok(v),
            _ => Err(unexpected()),
        }
    }

    pub fn quote(&mut self, aik: u32, selection: &[PcrSelection], nonce: &[u8]) -> Result<Quote, AgentError> {
        match self.call(&Command::Quote {
            aik,
            selection: selection.to_vec(),
            nonce: nonce.to_vec(),
        })? {
            Response::Quote(q) => Ok(q),
            _ => Err(unexpected()),
        }
    }

    pub fn nv_define_write(&mut self, index: u32, data: &[u8]) -> Result<(), AgentError> {
        match self.call(&Command::NvDefineWrite {
            index,
            data: data.to_vec(),
        })? {
            Response::Empty => Ok(()),
            _ => Err(unexpected()),
        }
    }

    pub fn nv_read(&mut self, index: u32) -> Result<Vec<u8>, AgentError> {
        match self.call(&Command::NvRead { index })? {
            Response::Data(d) => Ok(d),
            _ => Err(unexpected()),
        }
    }

    pub fn activate_credential(&mut self, ek: u32, aik: u32, blob: &CredentialBlob) -> Result<Vec<u8>, AgentError> {
        match self.call(&Command::ActivateCredential {
            ek,
            aik,
            blob: blob.to_bytes(),
        })? {
            Response::Data(d) => Ok(d),
            _ => Err(unexpected()),
        }
    }

    pub fn import(&mut self, parent: u32, wrapped: &WrappedKey) -> Result<u32, AgentError> {
        match self.call(&Command::Import {
            parent,
            wrapped: wrapped.to_bytes(),
        })? {
            Response::Handle(h) => Ok(h),
            _ => Err(unexpected()),
        }
    }

    pub fn unseal(&mut self, handle: u32, blob: &SealedBlob) -> Result<Vec<u8>, AgentError> {
        match self.call(&Command::Unseal {
            handle,
            blob: blob.to_bytes(),
        })? {
            Response::Data(d) => Ok(d),
            _ => Err(unexpected()),
        }
    }
}
