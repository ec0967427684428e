// SPDX-License-Identifier: Apache-2.0

//! PCR banks and selections.

use sha1::Sha1;
use sha2::{Digest, Sha256, Sha384};

use crate::error::{Result, TpmError};

/// Number of PCRs in every bank.
pub const PCR_COUNT: usize = 24;

/// Hash algorithm of a PCR bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bank {
    Sha1,
    Sha256,
    Sha384,
}

impl Bank {
    pub const ALL: [Bank; 3] = [Bank::Sha1, Bank::Sha256, Bank::Sha384];

    pub fn digest_size(self) -> usize {
        match self {
            Bank::Sha1 => 20,
            Bank::Sha256 => 32,
            Bank::Sha384 => 48,
        }
    }

    pub fn hash(self, data: &[u8]) -> Vec<u8> {
        match self {
            Bank::Sha1 => Sha1::digest(data).to_vec(),
            Bank::Sha256 => Sha256::digest(data).to_vec(),
            Bank::Sha384 => Sha384::digest(data).to_vec(),
        }
    }

    /// `H(old || data)`, the extend fold.
    pub fn extend(self, old: &[u8], data: &[u8]) -> Vec<u8> {
        match self {
            Bank::Sha1 => Sha1::new().chain_update(old).chain_update(data).finalize().to_vec(),
            Bank::Sha256 => Sha256::new().chain_update(old).chain_update(data).finalize().to_vec(),
            Bank::Sha384 => Sha384::new().chain_update(old).chain_update(data).finalize().to_vec(),
        }
    }

    pub fn zero_digest(self) -> Vec<u8> {
        vec![0; self.digest_size()]
    }

    /// Wire tag. Values follow the TPM algorithm identifiers.
    pub fn tag(self) -> u16 {
        match self {
            Bank::Sha1 => 0x0004,
            Bank::Sha256 => 0x000B,
            Bank::Sha384 => 0x000C,
        }
    }

    pub fn from_tag(tag: u16) -> Option<Bank> {
        match tag {
            0x0004 => Some(Bank::Sha1),
            0x000B => Some(Bank::Sha256),
            0x000C => Some(Bank::Sha384),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bank::Sha1 => "sha1",
            Bank::Sha256 => "sha256",
            Bank::Sha384 => "sha384",
        }
    }

    pub fn from_name(name: &str) -> Option<Bank> {
        match name {
            "sha1" => Some(Bank::Sha1),
            "sha256" => Some(Bank::Sha256),
            "sha384" => Some(Bank::Sha384),
            _ => None,
        }
    }
}

impl std::fmt::Display for Bank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of PCR indices within one bank, stored as a 24-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PcrSelection {
    pub bank: Bank,
    mask: u32,
}

const VALID_MASK: u32 = (1 << PCR_COUNT) - 1;

impl PcrSelection {
    pub fn from_mask(bank: Bank, mask: u32) -> Result<Self> {
        if mask & !VALID_MASK != 0 {
            return Err(TpmError::BadIndex);
        }
        Ok(Self { bank, mask })
    }

    pub fn from_indices(bank: Bank, indices: &[u32]) -> Result<Self> {
        let mut mask = 0u32;
        for &i in indices {
            if i as usize >= PCR_COUNT {
                return Err(TpmError::BadIndex);
            }
            mask |= 1 << i;
        }
        Ok(Self { bank, mask })
    }

    pub fn all(bank: Bank) -> Self {
        Self { bank, mask: VALID_MASK }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Selected indices in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..PCR_COUNT).filter(move |i| self.mask & (1 << i) != 0)
    }

    pub fn contains(&self, index: usize) -> bool {
        index < PCR_COUNT && self.mask & (1 << index) != 0
    }
}

/// Encodes a selection list as `count u8 || (bank u16 BE || mask u32 BE)*`.
pub fn encode_selections(selections: &[PcrSelection], out: &mut Vec<u8>) {
    out.push(selections.len() as u8);
    for s in selections {
        out.extend_from_slice(&s.bank.tag().to_be_bytes());
        out.extend_from_slice(&s.mask.to_be_bytes());
    }
}

pub fn decode_selections(bytes: &[u8]) -> Result<(Vec<PcrSelection>, usize)> {
    let count = *bytes.first().ok_or(TpmError::Decode("selection count"))? as usize;
    let needed = 1 + count * 6;
    if bytes.len() < needed {
        return Err(TpmError::Decode("selection truncated"));
    }
    let mut out = Vec::with_capacity(count);
    for chunk in bytes[1..needed].chunks_exact(6) {
        let bank = Bank::from_tag(u16::from_be_bytes([chunk[0], chunk[1]])).ok_or(TpmError::Decode("unknown bank"))?;
        let mask = u32::from_be_bytes([chunk[2], chunk[3], chunk[4], chunk[5]]);
        out.push(PcrSelection::from_mask(bank, mask)?);
    }
    Ok((out, needed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_sizes() {
        for bank in Bank::ALL {
            assert_eq!(bank.hash(b"x").len(), bank.digest_size());
            assert_eq!(bank.zero_digest().len(), bank.digest_size());
        }
    }

    #[test]
    fn selection_bounds() {
        assert_eq!(PcrSelection::from_indices(Bank::Sha256, &[24]), Err(TpmError::BadIndex));
        assert_eq!(PcrSelection::from_mask(Bank::Sha1, 1 << 24), Err(TpmError::BadIndex));
        let sel = PcrSelection::from_indices(Bank::Sha1, &[18, 16, 17]).unwrap();
        assert_eq!(sel.indices().collect::<Vec<_>>(), vec![16, 17, 18]);
    }

    #[test]
    fn selection_encoding_round_trip() {
        let sels = vec![
            PcrSelection::from_indices(Bank::Sha1, &[16, 17, 18]).unwrap(),
            PcrSelection::all(Bank::Sha384),
        ];
        let mut buf = Vec::new();
        encode_selections(&sels, &mut buf);
        let (decoded, used) = decode_selections(&buf).unwrap();
        assert_eq!(used, buf.len());
        assert_eq!(decoded, sels);
    }
}
