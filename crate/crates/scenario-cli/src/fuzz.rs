// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use svsm_service::EK_REPORT_NV_INDEX;
use tpm_engine::command::Command;
use tpm_engine::{Bank, Hierarchy, KeyTemplate, PcrSelection, TRANSIENT_HANDLE_BASE};

/// A random command buffer. Mostly well-formed commands with random operands,
/// some raw garbage.
pub fn random_command<R: Rng + ?Sized>(rng: &mut R) -> Vec<u8> {
    let handle = TRANSIENT_HANDLE_BASE + rng.gen_range(0..4);
    let bank = [Bank::Sha1, Bank::Sha256, Bank::Sha384][rng.gen_range(0..3)];
    let blob: Vec<u8> = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect();
    let cmd = match rng.gen_range(0..12) {
        0 => Command::Startup,
        1 => Command::CreatePrimary {
            hierarchy: [Hierarchy::Endorsement, Hierarchy::Storage, Hierarchy::Null][rng.gen_range(0..3)],
            template: [
                KeyTemplate::endorsement(),
                KeyTemplate::storage_root(),
                KeyTemplate::attestation(),
            ][rng.gen_range(0..3)]
            .clone(),
        },
        2 => Command::PcrExtend {
            bank,
            index: rng.gen_range(0..26),
            digest: (0..bank.digest_size()).map(|_| rng.gen()).collect(),
        },
        3 => Command::PcrRead {
            selection: vec![PcrSelection::from_mask(bank, rng.gen::<u32>() & 0xFF_FFFF).unwrap()],
        },
        4 => Command::Quote {
            aik: handle,
            selection: vec![PcrSelection::from_mask(bank, rng.gen::<u32>() & 0xFF_FFFF).unwrap()],
            nonce: blob[..blob.len().min(64)].to_vec(),
        },
        5 => Command::NvDefineWrite {
            index: 0x0150_0000 + rng.gen_range(0..4),
            data: blob,
        },
        6 => Command::NvRead {
            index: [EK_REPORT_NV_INDEX, 0x0150_0000][rng.gen_range(0..2)],
        },
        7 => Command::ActivateCredential {
            ek: handle,
            aik: handle + 1,
            blob,
        },
        8 => Command::Import {
            parent: handle,
            wrapped: blob,
        },
        9 => Command::Unseal { handle, blob },
        10 => Command::Shutdown,
        _ => return blob,
    };
    cmd.encode()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generator_covers_valid_and_invalid() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let (mut ok, mut bad) = (0, 0);
        for _ in 0..500 {
            match Command::decode(&random_command(&mut rng)) {
                Ok(_) => ok += 1,
                Err(_) => bad += 1,
            }
        }
        assert!(ok > 100 && bad > 10, "ok {ok} bad {bad}");
    }
}
