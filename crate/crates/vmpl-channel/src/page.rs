// SPDX-License-Identifier: Apache-2.0

//! The command page.
//!
//! ```text
//! offset  size  field
//! 0x000      4  status (u32 LE): 0 idle, 1 command-ready, 2 response-ready, 3 error
//! 0x004      4  cmd_len (u32 LE)
//! 0x008      4  resp_len (u32 LE)
//! 0x00C      4  reserved, zero
//! 0x010   4080  payload
//! ```
//!
//! An error response carries the engine's 4-byte error code (u32 LE) at the
//! start of the payload.

use crate::error::ChannelError;

pub const PAGE_SIZE: usize = 4096;
pub const HEADER_LEN: usize = 16;
pub const PAYLOAD_LEN: usize = PAGE_SIZE - HEADER_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum PageStatus {
    Idle = 0,
    CommandReady = 1,
    ResponseReady = 2,
    Error = 3,
}

impl PageStatus {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(PageStatus::Idle),
            1 => Some(PageStatus::CommandReady),
            2 => Some(PageStatus::ResponseReady),
            3 => Some(PageStatus::Error),
            _ => None,
        }
    }
}

/// One 4 KiB page of encrypted guest memory shared between VMPL1 and VMPL0.
#[derive(Clone)]
pub struct CommandPage {
    bytes: Box<[u8; PAGE_SIZE]>,
}

impl std::fmt::Debug for CommandPage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommandPage")
            .field("status", &self.status())
            .field("cmd_len", &self.cmd_len())
            .field("resp_len", &self.resp_len())
            .finish_non_exhaustive()
    }
}

impl Default for CommandPage {
    fn default() -> Self {
        Self::new()
    }
}

impl CommandPage {
    pub fn new() -> Self {
        Self {
            bytes: Box::new([0; PAGE_SIZE]),
        }
    }

    pub fn from_bytes(bytes: [u8; PAGE_SIZE]) -> Self {
        Self { bytes: Box::new(bytes) }
    }

    pub fn as_bytes(&self) -> &[u8; PAGE_SIZE] {
        &self.bytes
    }

    fn field(&self, offset: usize) -> u32 {
        u32::from_le_bytes(self.bytes[offset..offset + 4].try_into().unwrap())
    }

    fn set_field(&mut self, offset: usize, v: u32) {
        self.bytes[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
    }

    pub fn status(&self) -> Result<PageStatus, ChannelError> {
        PageStatus::from_u32(self.field(0)).ok_or(ChannelError::ProtocolError("invalid page status"))
    }

    pub fn cmd_len(&self) -> u32 {
        self.field(4)
    }

    pub fn resp_len(&self) -> u32 {
        self.field(8)
    }

    fn set_status(&mut self, s: PageStatus) {
        self.set_field(0, s as u32);
    }

    fn write_payload(&mut self, data: &[u8]) {
        self.bytes[HEADER_LEN..HEADER_LEN + data.len()].copy_from_slice(data);
    }

    fn payload(&self, len: u32) -> Result<&[u8], ChannelError> {
        let len = len as usize;
        if len > PAYLOAD_LEN {
            return Err(ChannelError::ProtocolError("length exceeds payload"));
        }
        Ok(&self.bytes[HEADER_LEN..HEADER_LEN + len])
    }

    /// Guest side: idle → command-ready.
    pub fn post_command(&mut self, command: &[u8]) -> Result<(), ChannelError> {
        if command.len() > PAYLOAD_LEN {
            return Err(ChannelError::ProtocolError("command exceeds payload"));
        }
        if self.status()? != PageStatus::Idle {
            return Err(ChannelError::ProtocolError("page not idle"));
        }
        self.write_payload(command);
        self.set_field(4, command.len() as u32);
        self.set_field(8, 0);
        self.set_status(PageStatus::CommandReady);
        Ok(())
    }

    /// Guest side: response-ready or error → idle. An error page yields
    /// `Err(ChannelError::Engine(code))`.
    pub fn take_response(&mut self) -> Result<Vec<u8>, ChannelError> {
        let result = match self.status()? {
            PageStatus::ResponseReady => Ok(self.payload(self.resp_len())?.to_vec()),
            PageStatus::Error => {
                let p = self.payload(self.resp_len())?;
                let code = p
                    .get(..4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .ok_or(ChannelError::ProtocolError("error page without code"))?;
                Err(ChannelError::Engine(code))
            }
            _ => return Err(ChannelError::ProtocolError("no response on page")),
        };
        self.set_status(PageStatus::Idle);
        result
    }

    pub(crate) fn command(&self) -> Result<&[u8], ChannelError> {
        self.payload(self.cmd_len())
    }

    pub(crate) fn write_response(&mut self, response: &[u8]) -> Result<(), ChannelError> {
        if response.len() > PAYLOAD_LEN {
            return Err(ChannelError::ProtocolError("response exceeds payload"));
        }
        if self.status()? != PageStatus::CommandReady {
            return Err(ChannelError::ProtocolError("no command to answer"));
        }
        self.write_payload(response);
        self.set_field(8, response.len() as u32);
        self.set_status(PageStatus::ResponseReady);
        Ok(())
    }

    pub(crate) fn write_error(&mut self, code: u32) -> Result<(), ChannelError> {
        if self.status()? != PageStatus::CommandReady {
            return Err(ChannelError::ProtocolError("no command to answer"));
        }
        self.write_payload(&code.to_le_bytes());
        self.set_field(8, 4);
        self.set_status(PageStatus::Error);
        Ok(())
    }
}
