// SPDX-License-Identifier: Apache-2.0

//! Tag-length-value command encoding.
//!
//! A command is `code u32 BE` followed by parameters, each encoded as
//! `tag u8 || len u16 BE || value`. A successful response is a bare parameter
//! list; failures are reported out of band as a [`TpmError`] code.
//!
//! | command              | code    | parameters                                   |
//! |----------------------|---------|----------------------------------------------|
//! | Startup              | `0x144` | none                                         |
//! | Shutdown             | `0x145` | none                                         |
//! | CreatePrimary        | `0x131` | hierarchy, template                          |
//! | PCR_Extend           | `0x182` | bank, pcr index, digest                      |
//! | PCR_Read             | `0x17E` | selection                                    |
//! | Quote                | `0x158` | handle, selection, nonce                     |
//! | NV_DefineWrite       | `0x137` | nv index, data                               |
//! | NV_Read              | `0x14E` | nv index                                     |
//! | ActivateCredential   | `0x147` | handle (EK), aux handle (AIK), blob          |
//! | Import               | `0x156` | handle (parent), blob (wrapped key)          |
//! | Unseal               | `0x15E` | handle, blob (sealed data)                   |

use crate::credential::CredentialBlob;
use crate::error::{Result, TpmError};
use crate::keys::{Hierarchy, KeyTemplate, PublicKey};
use crate::offline::{SealedBlob, WrappedKey};
use crate::pcr::{decode_selections, encode_selections, Bank, PcrSelection};
use crate::quote::Quote;
use crate::state::TpmState;

pub const CC_CREATE_PRIMARY: u32 = 0x131;
pub const CC_NV_DEFINE_WRITE: u32 = 0x137;
pub const CC_STARTUP: u32 = 0x144;
pub const CC_SHUTDOWN: u32 = 0x145;
pub const CC_ACTIVATE_CREDENTIAL: u32 = 0x147;
pub const CC_NV_READ: u32 = 0x14E;
pub const CC_IMPORT: u32 = 0x156;
pub const CC_QUOTE: u32 = 0x158;
pub const CC_UNSEAL: u32 = 0x15E;
pub const CC_PCR_READ: u32 = 0x17E;
pub const CC_PCR_EXTEND: u32 = 0x182;

pub const ALL_COMMAND_CODES: [u32; 11] = [
    CC_STARTUP,
    CC_SHUTDOWN,
    CC_CREATE_PRIMARY,
    CC_PCR_EXTEND,
    CC_PCR_READ,
    CC_QUOTE,
    CC_NV_DEFINE_WRITE,
    CC_NV_READ,
    CC_ACTIVATE_CREDENTIAL,
    CC_IMPORT,
    CC_UNSEAL,
];

mod tag {
    pub const HIERARCHY: u8 = 0x01;
    pub const TEMPLATE: u8 = 0x02;
    pub const HANDLE: u8 = 0x03;
    pub const AUX_HANDLE: u8 = 0x04;
    pub const SELECTION: u8 = 0x05;
    pub const BANK: u8 = 0x06;
    pub const PCR_INDEX: u8 = 0x07;
    pub const DIGEST: u8 = 0x08;
    pub const NONCE: u8 = 0x09;
    pub const NV_INDEX: u8 = 0x0A;
    pub const DATA: u8 = 0x0B;
    pub const BLOB: u8 = 0x0C;

    pub const OUT_HANDLE: u8 = 0x20;
    pub const OUT_PUBLIC: u8 = 0x21;
    pub const OUT_PCR_VALUES: u8 = 0x22;
    pub const OUT_QUOTE: u8 = 0x23;
    pub const OUT_DATA: u8 = 0x24;
    pub const OUT_PCR_VALUE: u8 = 0x25;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Startup,
    Shutdown,
    CreatePrimary {
        hierarchy: Hierarchy,
        template: KeyTemplate,
    },
    PcrExtend {
        bank: Bank,
        index: u32,
        digest: Vec<u8>,
    },
    PcrRead {
        selection: Vec<PcrSelection>,
    },
    Quote {
        aik: u32,
        selection: Vec<PcrSelection>,
        nonce: Vec<u8>,
    },
    NvDefineWrite {
        index: u32,
        data: Vec<u8>,
    },
    NvRead {
        index: u32,
    },
    ActivateCredential {
        ek: u32,
        aik: u32,
        blob: Vec<u8>,
    },
    Import {
        parent: u32,
        wrapped: Vec<u8>,
    },
    Unseal {
        handle: u32,
        blob: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Empty,
    Created { handle: u32, public: PublicKey },
    PcrValue(Vec<u8>),
    PcrValues(Vec<Vec<u8>>),
    Quote(Quote),
    Data(Vec<u8>),
    Handle(u32),
}

fn put(out: &mut Vec<u8>, t: u8, value: &[u8]) {
    debug_assert!(value.len() <= u16::MAX as usize);
    out.push(t);
    out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    out.extend_from_slice(value);
}

fn parse_tlvs(mut bytes: &[u8]) -> Result<Vec<(u8, &[u8])>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 3 {
            return Err(TpmError::Decode("truncated parameter header"));
        }
        let t = bytes[0];
        let len = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
        if bytes.len() < 3 + len {
            return Err(TpmError::Decode("truncated parameter value"));
        }
        if out.iter().any(|(seen, _)| *seen == t) {
            return Err(TpmError::Decode("duplicate parameter"));
        }
        out.push((t, &bytes[3..3 + len]));
        bytes = &bytes[3 + len..];
    }
    Ok(out)
}

/// Pulls required parameters out of a parsed list and rejects leftovers.
struct Params<'a>(Vec<(u8, &'a [u8])>);

impl<'a> Params<'a> {
    fn take(&mut self, t: u8) -> Result<&'a [u8]> {
        let pos = self
            .0
            .iter()
            .position(|(seen, _)| *seen == t)
            .ok_or(TpmError::Decode("missing parameter"))?;
        Ok(self.0.remove(pos).1)
    }

    fn take_u32(&mut self, t: u8) -> Result<u32> {
        let v = self.take(t)?;
        Ok(u32::from_be_bytes(
            v.try_into().map_err(|_| TpmError::Decode("u32 parameter"))?,
        ))
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(TpmError::Decode("unexpected parameter"))
        }
    }
}

fn decode_selection_param(bytes: &[u8]) -> Result<Vec<PcrSelection>> {
    let (sel, used) = decode_selections(bytes)?;
    if used != bytes.len() {
        return Err(TpmError::Decode("selection trailing bytes"));
    }
    Ok(sel)
}

fn selection_bytes(selection: &[PcrSelection]) -> Vec<u8> {
    let mut v = Vec::new();
    encode_selections(selection, &mut v);
    v
}

impl Command {
    pub fn code(&self) -> u32 {
        match self {
            Command::Startup => CC_STARTUP,
            Command::Shutdown => CC_SHUTDOWN,
            Command::CreatePrimary { .. } => CC_CREATE_PRIMARY,
            Command::PcrExtend { .. } => CC_PCR_EXTEND,
            Command::PcrRead { .. } => CC_PCR_READ,
            Command::Quote { .. } => CC_QUOTE,
            Command::NvDefineWrite { .. } => CC_NV_DEFINE_WRITE,
            Command::NvRead { .. } => CC_NV_READ,
            Command::ActivateCredential { .. } => CC_ACTIVATE_CREDENTIAL,
            Command::Import { .. } => CC_IMPORT,
            Command::Unseal { .. } => CC_UNSEAL,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.code().to_be_bytes().to_vec();
        match self {
            Command::Startup | Command::Shutdown => {}
            Command::CreatePrimary { hierarchy, template } => {
                put(&mut out, tag::HIERARCHY, &[*hierarchy as u8]);
                put(&mut out, tag::TEMPLATE, &template.to_bytes());
            }
            Command::PcrExtend { bank, index, digest } => {
                put(&mut out, tag::BANK, &bank.tag().to_be_bytes());
                put(&mut out, tag::PCR_INDEX, &index.to_be_bytes());
                put(&mut out, tag::DIGEST, digest);
            }
            Command::PcrRead { selection } => {
                put(&mut out, tag::SELECTION, &selection_bytes(selection));
            }
            Command::Quote { aik, selection, nonce } => {
                put(&mut out, tag::HANDLE, &aik.to_be_bytes());
                put(&mut out, tag::SELECTION, &selection_bytes(selection));
                put(&mut out, tag::NONCE, nonce);
            }
            Command::NvDefineWrite { index, data } => {
                put(&mut out, tag::NV_INDEX, &index.to_be_bytes());
                put(&mut out, tag::DATA, data);
            }
            Command::NvRead { index } => put(&mut out, tag::NV_INDEX, &index.to_be_bytes()),
            Command::ActivateCredential { ek, aik, blob } => {
                put(&mut out, tag::HANDLE, &ek.to_be_bytes());
                put(&mut out, tag::AUX_HANDLE, &aik.to_be_bytes());
                put(&mut out, tag::BLOB, blob);
            }
            Command::Import { parent, wrapped } => {
                put(&mut out, tag::HANDLE, &parent.to_be_bytes());
                put(&mut out, tag::BLOB, wrapped);
            }
            Command::Unseal { handle, blob } => {
                put(&mut out, tag::HANDLE, &handle.to_be_bytes());
                put(&mut out, tag::BLOB, blob);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(TpmError::Decode("missing command code"));
        }
        let code = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let mut p = Params(parse_tlvs(&bytes[4..])?);
        let cmd = match code {
            CC_STARTUP => Command::Startup,
            CC_SHUTDOWN => Command::Shutdown,
            CC_CREATE_PRIMARY => {
                let h = p.take(tag::HIERARCHY)?;
                let hierarchy = match h {
                    [t] => Hierarchy::from_tag(*t).ok_or(TpmError::Decode("unknown hierarchy"))?,
                    _ => return Err(TpmError::Decode("hierarchy")),
                };
                let template = KeyTemplate::from_bytes(p.take(tag::TEMPLATE)?)?;
                Command::CreatePrimary { hierarchy, template }
            }
            CC_PCR_EXTEND => {
                let b = p.take(tag::BANK)?;
                let bank = <[u8; 2]>::try_from(b)
                    .ok()
                    .and_then(|t| Bank::from_tag(u16::from_be_bytes(t)))
                    .ok_or(TpmError::Decode("unknown bank"))?;
                let index = p.take_u32(tag::PCR_INDEX)?;
                let digest = p.take(tag::DIGEST)?.to_vec();
                Command::PcrExtend { bank, index, digest }
            }
            CC_PCR_READ => Command::PcrRead {
                selection: decode_selection_param(p.take(tag::SELECTION)?)?,
            },
            CC_QUOTE => Command::Quote {
                aik: p.take_u32(tag::HANDLE)?,
                selection: decode_selection_param(p.take(tag::SELECTION)?)?,
                nonce: p.take(tag::NONCE)?.to_vec(),
            },
            CC_NV_DEFINE_WRITE => Command::NvDefineWrite {
                index: p.take_u32(tag::NV_INDEX)?,
                data: p.take(tag::DATA)?.to_vec(),
            },
            CC_NV_READ => Command::NvRead {
                index: p.take_u32(tag::NV_INDEX)?,
            },
            CC_ACTIVATE_CREDENTIAL => Command::ActivateCredential {
                ek: p.take_u32(tag::HANDLE)?,
                aik: p.take_u32(tag::AUX_HANDLE)?,
                blob: p.take(tag::BLOB)?.to_vec(),
            },
            CC_IMPORT => Command::Import {
                parent: p.take_u32(tag::HANDLE)?,
                wrapped: p.take(tag::BLOB)?.to_vec(),
            },
            CC_UNSEAL => Command::Unseal {
                handle: p.take_u32(tag::HANDLE)?,
                blob: p.take(tag::BLOB)?.to_vec(),
            },
            other => return Err(TpmError::UnknownCommand(other)),
        };
        p.finish()?;
        Ok(cmd)
    }

    /// Runs the command against `state`.
    pub fn execute(&self, state: &mut TpmState) -> Result<Response> {
        Ok(match self {
            Command::Startup => {
                state.startup();
                Response::Empty
            }
            Command::Shutdown => {
                state.shutdown();
                Response::Empty
            }
            Command::CreatePrimary { hierarchy, template } => {
                let (handle, public) = state.create_primary(*hierarchy, template)?;
                Response::Created { handle, public }
            }
            Command::PcrExtend { bank, index, digest } => Response::PcrValue(state.pcr_extend(*bank, *index, digest)?),
            Command::PcrRead { selection } => Response::PcrValues(state.pcr_read(selection)),
            Command::Quote { aik, selection, nonce } => Response::Quote(state.quote(*aik, selection, nonce)?),
            Command::NvDefineWrite { index, data } => {
                state.nv_define_write(*index, data)?;
                Response::Empty
            }
            Command::NvRead { index } => Response::Data(state.nv_read(*index)?.to_vec()),
            Command::ActivateCredential { ek, aik, blob } => {
                // A blob that does not even parse is indistinguishable from a
                // wrong-key blob to the caller.
                let blob = CredentialBlob::from_bytes(blob).map_err(|_| TpmError::ActivationFailed)?;
                Response::Data(state.activate_credential(*ek, *aik, &blob)?)
            }
            Command::Import { parent, wrapped } => {
                let wrapped = WrappedKey::from_bytes(wrapped).map_err(|_| TpmError::ImportFailed)?;
                Response::Handle(state.import_wrapped(*parent, &wrapped)?)
            }
            Command::Unseal { handle, blob } => {
                let blob = SealedBlob::from_bytes(blob).map_err(|_| TpmError::UnsealFailed)?;
                Response::Data(state.unseal(*handle, &blob)?)
            }
        })
    }
}

impl Response {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Response::Empty => {}
            Response::Created { handle, public } => {
                put(&mut out, tag::OUT_HANDLE, &handle.to_be_bytes());
                put(&mut out, tag::OUT_PUBLIC, &public.to_bytes());
            }
            Response::PcrValue(v) => put(&mut out, tag::OUT_PCR_VALUE, v),
            Response::PcrValues(values) => {
                let mut body = Vec::new();
                for v in values {
                    body.push(v.len() as u8);
                    body.extend_from_slice(v);
                }
                put(&mut out, tag::OUT_PCR_VALUES, &body);
            }
            Response::Quote(q) => put(&mut out, tag::OUT_QUOTE, &q.to_bytes()),
            Response::Data(d) => put(&mut out, tag::OUT_DATA, d),
            Response::Handle(h) => put(&mut out, tag::OUT_HANDLE, &h.to_be_bytes()),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let tlvs = parse_tlvs(bytes)?;
        let tags: Vec<u8> = tlvs.iter().map(|(t, _)| *t).collect();
        let mut p = Params(tlvs);
        let resp = match tags.as_slice() {
            [] => Response::Empty,
            [tag::OUT_HANDLE, tag::OUT_PUBLIC] => Response::Created {
                handle: p.take_u32(tag::OUT_HANDLE)?,
                public: PublicKey::from_bytes(p.take(tag::OUT_PUBLIC)?)?,
            },
            [tag::OUT_HANDLE] => Response::Handle(p.take_u32(tag::OUT_HANDLE)?),
            [tag::OUT_PCR_VALUE] => Response::PcrValue(p.take(tag::OUT_PCR_VALUE)?.to_vec()),
            [tag::OUT_PCR_VALUES] => {
                let mut body = p.take(tag::OUT_PCR_VALUES)?;
                let mut values = Vec::new();
                while let Some((&len, rest)) = body.split_first() {
                    if rest.len() < len as usize {
                        return Err(TpmError::Decode("pcr value truncated"));
                    }
                    values.push(rest[..len as usize].to_vec());
                    body = &rest[len as usize..];
                }
                Response::PcrValues(values)
            }
            [tag::OUT_QUOTE] => Response::Quote(Quote::from_bytes(p.take(tag::OUT_QUOTE)?)?),
            [tag::OUT_DATA] => Response::Data(p.take(tag::OUT_DATA)?.to_vec()),
            _ => return Err(TpmError::Decode("unrecognized response")),
        };
        p.finish()?;
        Ok(resp)
    }
}

/// Decodes, executes and encodes one command.
pub fn execute(state: &mut TpmState, command: &[u8]) -> Result<Vec<u8>> {
    Ok(Command::decode(command)?.execute(state)?.encode())
}
