// SPDX-License-Identifier: Apache-2.0

use p256::elliptic_curve::ops::Reduce;
use p256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use p256::elliptic_curve::{Field, PrimeField};
use p256::{AffinePoint, EncodedPoint, ProjectivePoint, Scalar, U256};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use tpm_engine::command::{execute, Command, Response};
use tpm_engine::*;

fn seeded(seed: u8) -> RngEntropy<ChaCha20Rng> {
    RngEntropy(ChaCha20Rng::from_seed([seed; 32]))
}

fn fresh(seed: u8) -> TpmState {
    TpmState::manufacture(&mut seeded(seed)).unwrap()
}

/// Textbook ECDSA verification over raw curve arithmetic, independent of
/// the `ecdsa` crate the engine signs with.
fn ecdsa_p256_verify_oracle(public: &PublicKey, msg: &[u8], sig: &[u8; 64]) -> bool {
    let point_bytes = &public.to_bytes()[1..];
    let q = AffinePoint::from_encoded_point(&EncodedPoint::from_bytes(point_bytes).unwrap()).unwrap();
    let r = Option::<Scalar>::from(Scalar::from_repr((*<&[u8; 32]>::try_from(&sig[..32]).unwrap()).into()));
    let s = Option::<Scalar>::from(Scalar::from_repr((*<&[u8; 32]>::try_from(&sig[32..]).unwrap()).into()));
    let (Some(r), Some(s)) = (r, s) else { return false };
    if bool::from(r.is_zero()) || bool::from(s.is_zero()) {
        return false;
    }
    let e = <Scalar as Reduce<U256>>::reduce_bytes(&Sha256::digest(msg));
    let w = s.invert().unwrap();
    let point = (ProjectivePoint::GENERATOR * (e * w) + ProjectivePoint::from(q) * (r * w)).to_affine();
    let encoded = point.to_encoded_point(false);
    let Some(x) = encoded.x() else { return false };
    <Scalar as Reduce<U256>>::reduce_bytes(x) == r
}

fn oracle_fold(bank: Bank, events: &[Vec<u8>]) -> Vec<u8> {
    // H(...H(H(0 || e1) || e2)... || en) with a freshly constructed hasher
    // per step, independent of the engine's extend helper.
    let mut acc = vec![0u8; bank.digest_size()];
    for e in events {
        let mut buf = acc.clone();
        buf.extend_from_slice(e);
        acc = match bank {
            Bank::Sha1 => sha1::Sha1::digest(&buf).to_vec(),
            Bank::Sha256 => Sha256::digest(&buf).to_vec(),
            Bank::Sha384 => sha2::Sha384::digest(&buf).to_vec(),
        };
    }
    acc
}

#[test]
fn same_entropy_same_endorsement_key() {
    let mut a = fresh(1);
    let mut b = fresh(1);
    let (_, ek_a) = a
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let (_, ek_b) = b
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    assert_eq!(ek_a, ek_b);
}

#[test]
fn os_entropy_instances_differ() {
    let mut a = TpmState::manufacture(&mut OsEntropy).unwrap();
    let mut b = TpmState::manufacture(&mut OsEntropy).unwrap();
    let (_, ek_a) = a
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let (_, ek_b) = b
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    assert_ne!(ek_a, ek_b);
    let (_, srk_a) = a
        .create_primary(Hierarchy::Storage, &KeyTemplate::storage_root())
        .unwrap();
    let (_, srk_b) = b
        .create_primary(Hierarchy::Storage, &KeyTemplate::storage_root())
        .unwrap();
    assert_ne!(srk_a, srk_b);
}

#[test]
fn failing_entropy_is_reported() {
    struct Dead;
    impl EntropySource for Dead {
        fn fill(&mut self, _: &mut [u8]) -> Result<()> {
            Err(TpmError::EntropyUnavailable)
        }
    }
    assert_eq!(
        TpmState::manufacture(&mut Dead).unwrap_err(),
        TpmError::EntropyUnavailable
    );
}

#[test]
fn fresh_state_is_zeroed_and_empty() {
    let tpm = fresh(2);
    let sel: Vec<_> = Bank::ALL.iter().map(|&b| PcrSelection::all(b)).collect();
    let values = tpm.pcr_read(&sel);
    assert_eq!(values.len(), 3 * PCR_COUNT);
    for (i, v) in values.iter().enumerate() {
        let bank = Bank::ALL[i / PCR_COUNT];
        assert_eq!(v, &bank.zero_digest());
    }
    assert_eq!(tpm.nv_read(0x01C0_000A), Err(TpmError::IndexUndefined));
    assert_eq!(tpm.boot_counter(), 0);
}

#[test]
fn reboot_increments_counter_and_clears_state() {
    let mut tpm = fresh(3);
    tpm.nv_define_write(0x01C0_000A, b"report").unwrap();
    tpm.pcr_extend(Bank::Sha256, 16, &[1; 32]).unwrap();
    let (_, ek0) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let mut tpm = tpm.reboot(&mut OsEntropy).unwrap();
    assert_eq!(tpm.boot_counter(), 1);
    assert_eq!(tpm.nv_read(0x01C0_000A), Err(TpmError::IndexUndefined));
    let sel = [PcrSelection::from_indices(Bank::Sha256, &[16]).unwrap()];
    assert_eq!(tpm.pcr_read(&sel), vec![vec![0; 32]]);
    let (_, ek1) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    assert_ne!(ek0, ek1);
}

#[test]
fn create_primary_is_deterministic_per_state() {
    let mut tpm = fresh(4);
    let (h1, p1) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let (h2, p2) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    assert_ne!(h1, h2);
    assert_eq!(p1, p2);
    // Different hierarchies use different seeds.
    let (_, srk) = tpm
        .create_primary(Hierarchy::Storage, &KeyTemplate::storage_root())
        .unwrap();
    assert_ne!(srk, p1);
}

#[test]
fn name_is_sha256_of_canonical_public() {
    let mut tpm = fresh(5);
    let (_, ek) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let bytes = ek.to_bytes();
    assert_eq!(bytes.len(), 66);
    assert_eq!(bytes[0], 0x02);
    assert_eq!(bytes[1], 0x04);
    let expected: [u8; 32] = Sha256::digest(bytes).into();
    assert_eq!(ek.name(), expected);
    assert_eq!(PublicKey::from_bytes(&bytes).unwrap(), ek);
}

#[test]
fn unsupported_template_rejected() {
    let mut tpm = fresh(6);
    let mut t = KeyTemplate::attestation();
    t.attributes.decrypt = true;
    assert_eq!(
        tpm.create_primary(Hierarchy::Null, &t).unwrap_err(),
        TpmError::UnsupportedTemplate
    );
}

#[test]
fn pcr_extend_matches_frozen_fixture() {
    let mut tpm = fresh(7);
    let d = Sha256::digest(b"event-a");
    let v = tpm.pcr_extend(Bank::Sha256, 16, &d).unwrap();
    // Computed with Python hashlib: sha256(b"\0"*32 + sha256(b"event-a")).
    assert_eq!(
        hex::encode(v),
        "9fc86702ca34f0a1ebc3c0d3f423c0158f4aebbf150c0fdad3b15c833bdb8f48"
    );
}

#[test]
fn three_event_fold_matches_frozen_fixtures() {
    // Computed with Python hashlib over events e1, e2, e3 (each pre-hashed
    // with the bank algorithm).
    let expected = [
        (Bank::Sha1, "568070edb4aad6abcb0484ac6a28c75d6cd602c1"),
        (
            Bank::Sha256,
            "2c5249b0b291683fb737593c4b19dccf541411eae05026f833fe8a297ca7c21c",
        ),
        (
            Bank::Sha384,
            "50d65bfc0762b8ae7c28cbeef42f8c9da72555c2ba6e8dc28b90f3c70efd3d5d78816913b05e1a64936e5ee3bf7a3a03",
        ),
    ];
    for (bank, hex_value) in expected {
        let mut tpm = fresh(8);
        let mut last = Vec::new();
        for e in [b"e1", b"e2", b"e3"] {
            last = tpm.pcr_extend(bank, 16, &bank.hash(e)).unwrap();
        }
        assert_eq!(hex::encode(&last), hex_value, "{bank}");
        // Folding is not the same as extending once with H(d1 || d2 || d3).
        let mut shortcut = fresh(8);
        let joined: Vec<u8> = [b"e1", b"e2", b"e3"].iter().flat_map(|e| bank.hash(*e)).collect();
        let once = shortcut.pcr_extend(bank, 16, &bank.hash(&joined)).unwrap();
        assert_ne!(once, last);
    }
}

#[test]
fn pcr_extend_preconditions() {
    let mut tpm = fresh(9);
    assert_eq!(
        tpm.pcr_extend(Bank::Sha256, 16, &[0; 31]),
        Err(TpmError::BadDigestLength)
    );
    assert_eq!(tpm.pcr_extend(Bank::Sha256, 24, &[0; 32]), Err(TpmError::BadIndex));
}

#[test]
fn extend_touches_only_one_slot() {
    let mut tpm = fresh(10);
    tpm.pcr_extend(Bank::Sha256, 16, &[0xAB; 32]).unwrap();
    let sel: Vec<_> = Bank::ALL.iter().map(|&b| PcrSelection::all(b)).collect();
    let values = tpm.pcr_read(&sel);
    for (i, v) in values.iter().enumerate() {
        let bank = Bank::ALL[i / PCR_COUNT];
        let idx = i % PCR_COUNT;
        assert_eq!(v == &bank.zero_digest(), !(bank == Bank::Sha256 && idx == 16));
    }
}

fn quote_selection() -> Vec<PcrSelection> {
    vec![
        PcrSelection::from_indices(Bank::Sha1, &[16, 17, 18]).unwrap(),
        PcrSelection::from_indices(Bank::Sha256, &[16, 17, 18]).unwrap(),
    ]
}

#[test]
fn quote_verifies_under_independent_ecdsa() {
    let mut tpm = fresh(11);
    let (aik, aik_pub) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation())
        .unwrap();
    tpm.pcr_extend(Bank::Sha1, 17, &[3; 20]).unwrap();
    let q = tpm.quote(aik, &quote_selection(), b"nonce-123").unwrap();
    assert_eq!(q.nonce, b"nonce-123");
    assert_eq!(q.signer, aik_pub.name());
    assert_eq!(q.pcr_digest, pcr_digest(&tpm.pcr_read(&quote_selection())));
    assert!(q.verify(&aik_pub));
    assert!(ecdsa_p256_verify_oracle(&aik_pub, &q.body(), &q.signature));

    let mut flipped = q.clone();
    flipped.nonce[0] ^= 1;
    assert!(!flipped.verify(&aik_pub));
    assert!(!ecdsa_p256_verify_oracle(&aik_pub, &flipped.body(), &flipped.signature));

    assert_eq!(Quote::from_bytes(&q.to_bytes()).unwrap(), q);
}

#[test]
fn quote_binds_pcr_state() {
    let mut tpm = fresh(12);
    let (aik, _) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation())
        .unwrap();
    let q1 = tpm.quote(aik, &quote_selection(), b"n").unwrap();
    tpm.pcr_extend(Bank::Sha256, 18, &[9; 32]).unwrap();
    let q2 = tpm.quote(aik, &quote_selection(), b"n").unwrap();
    assert_ne!(q1.pcr_digest, q2.pcr_digest);
}

#[test]
fn quote_errors() {
    let mut tpm = fresh(13);
    let (ek, _) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let (aik, _) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation())
        .unwrap();
    assert_eq!(tpm.quote(ek, &quote_selection(), b"n"), Err(TpmError::KeyNotSigning));
    assert_eq!(
        tpm.quote(0x8100_0000, &quote_selection(), b"n"),
        Err(TpmError::BadHandle)
    );
    assert_eq!(tpm.quote(aik, &[], b"n"), Err(TpmError::EmptySelection));
    assert_eq!(
        tpm.quote(aik, &quote_selection(), &[0; 65]),
        Err(TpmError::NonceTooLarge)
    );
}

#[test]
fn nv_last_writer_wins() {
    let mut tpm = fresh(14);
    tpm.nv_define_write(0x01C0_000A, b"genuine report").unwrap();
    assert_eq!(tpm.nv_read(0x01C0_000A).unwrap(), b"genuine report");
    tpm.nv_define_write(0x01C0_000A, b"other report").unwrap();
    assert_eq!(tpm.nv_read(0x01C0_000A).unwrap(), b"other report");
    assert_eq!(
        tpm.nv_define_write(1, &[0; NV_MAX_DATA + 1]),
        Err(TpmError::DataTooLarge)
    );
    assert!(tpm.nv_define_write(1, &[0; NV_MAX_DATA]).is_ok());
}

struct Credentialed {
    tpm: TpmState,
    ek: u32,
    ek_pub: PublicKey,
    aik: u32,
    aik_pub: PublicKey,
}

fn credentialed(seed: u8) -> Credentialed {
    let mut tpm = fresh(seed);
    let (ek, ek_pub) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::endorsement())
        .unwrap();
    let (aik, aik_pub) = tpm
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation())
        .unwrap();
    Credentialed {
        tpm,
        ek,
        ek_pub,
        aik,
        aik_pub,
    }
}

#[test]
fn credential_round_trip_and_binding() {
    let mut rng = ChaCha20Rng::from_seed([0x42; 32]);
    let a = credentialed(15);
    let b = credentialed(16);
    let secret = b"thirty-two byte credential secr!";
    let blob = make_credential(&a.ek_pub, &a.aik_pub.name(), secret, &mut rng).unwrap();
    assert_eq!(a.tpm.activate_credential(a.ek, a.aik, &blob).unwrap(), secret);

    let mut wrong_name = a.aik_pub.name();
    wrong_name[0] ^= 1;
    let blob2 = make_credential(&a.ek_pub, &wrong_name, secret, &mut rng).unwrap();
    assert_eq!(
        a.tpm.activate_credential(a.ek, a.aik, &blob2),
        Err(TpmError::ActivationFailed)
    );

    // Another instance's EK cannot open it even with the right AIK name.
    let blob3 = make_credential(&a.ek_pub, &b.aik_pub.name(), secret, &mut rng).unwrap();
    assert_eq!(
        b.tpm.activate_credential(b.ek, b.aik, &blob3),
        Err(TpmError::ActivationFailed)
    );

    let mut tampered = blob.to_bytes();
    *tampered.last_mut().unwrap() ^= 0x80;
    let tampered = CredentialBlob::from_bytes(&tampered).unwrap();
    assert_eq!(
        a.tpm.activate_credential(a.ek, a.aik, &tampered),
        Err(TpmError::ActivationFailed)
    );

    assert_eq!(
        make_credential(&a.aik_pub, &a.aik_pub.name(), secret, &mut rng),
        Err(TpmError::BadPublicKey)
    );
    assert_eq!(
        make_credential(&a.ek_pub, &a.aik_pub.name(), &[0; 33], &mut rng),
        Err(TpmError::SecretTooLarge)
    );
}

#[test]
fn fde_chain_under_storage_root_and_endorsement_key() {
    let mut rng = ChaCha20Rng::from_seed([0x17; 32]);
    let disk_key = [0x5Au8; 32];
    let intermediate = OfflineKey::generate_storage_key(&mut rng);
    let sealed = seal(intermediate.public(), &disk_key, &mut rng).unwrap();

    for hierarchy in [Hierarchy::Storage, Hierarchy::Endorsement] {
        let mut tpm = TpmState::manufacture(&mut OsEntropy).unwrap();
        let (parent, parent_pub) = tpm.create_primary(hierarchy, &KeyTemplate::storage_root()).unwrap();
        let wrapped = wrap_key(&intermediate, &parent_pub, &mut rng).unwrap();
        let wrapped = WrappedKey::from_bytes(&wrapped.to_bytes()).unwrap();
        let k = tpm.import_wrapped(parent, &wrapped).unwrap();
        assert_eq!(tpm.unseal(k, &sealed).unwrap(), disk_key);

        // Same materials on the next boot: the parent no longer exists.
        let mut next = tpm.reboot(&mut OsEntropy).unwrap();
        let (new_parent, _) = next.create_primary(hierarchy, &KeyTemplate::storage_root()).unwrap();
        assert_eq!(next.import_wrapped(new_parent, &wrapped), Err(TpmError::ImportFailed));
    }
}

#[test]
fn unseal_rejects_foreign_parent() {
    let mut rng = ChaCha20Rng::from_seed([0x18; 32]);
    let k1 = OfflineKey::generate_storage_key(&mut rng);
    let k2 = OfflineKey::generate_storage_key(&mut rng);
    let sealed = seal(k1.public(), b"secret", &mut rng).unwrap();
    let mut tpm = fresh(19);
    let (srk, srk_pub) = tpm
        .create_primary(Hierarchy::Storage, &KeyTemplate::storage_root())
        .unwrap();
    let h2 = tpm
        .import_wrapped(srk, &wrap_key(&k2, &srk_pub, &mut rng).unwrap())
        .unwrap();
    assert_eq!(tpm.unseal(h2, &sealed), Err(TpmError::UnsealFailed));
}

#[test]
fn command_path_matches_direct_calls() {
    let mut direct = fresh(20);
    let mut wired = fresh(20);
    let cmd = Command::CreatePrimary {
        hierarchy: Hierarchy::Endorsement,
        template: KeyTemplate::attestation(),
    };
    let (aik, aik_pub) = direct
        .create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation())
        .unwrap();
    let resp = Response::decode(&execute(&mut wired, &cmd.encode()).unwrap()).unwrap();
    assert_eq!(
        resp,
        Response::Created {
            handle: aik,
            public: aik_pub
        }
    );

    let sel = quote_selection();
    let q = direct.quote(aik, &sel, b"abc").unwrap();
    let cmd = Command::Quote {
        aik,
        selection: sel,
        nonce: b"abc".to_vec(),
    };
    let resp = Response::decode(&execute(&mut wired, &cmd.encode()).unwrap()).unwrap();
    assert_eq!(resp, Response::Quote(q));
}

#[test]
fn malformed_commands_are_decode_errors() {
    let mut tpm = fresh(21);
    assert!(matches!(execute(&mut tpm, &[0, 0]), Err(TpmError::Decode(_))));
    assert!(matches!(
        execute(&mut tpm, &[0, 0, 0, 1]),
        Err(TpmError::UnknownCommand(1))
    ));
    let mut truncated = Command::NvRead { index: 5 }.encode();
    truncated.pop();
    assert!(matches!(execute(&mut tpm, &truncated), Err(TpmError::Decode(_))));
    let mut extra = Command::Startup.encode();
    extra.extend_from_slice(&[0x0B, 0, 1, 0xFF]);
    assert!(matches!(execute(&mut tpm, &extra), Err(TpmError::Decode(_))));
}

#[test]
fn error_codes_round_trip() {
    for e in [
        TpmError::BadIndex,
        TpmError::ActivationFailed,
        TpmError::ImportFailed,
        TpmError::ResponseTooLarge,
    ] {
        assert_eq!(TpmError::from_code(e.code()), Some(e));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pcr_replay_equals_oracle_fold(
        raw in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..40), 0..=64),
        index in 0u32..24,
    ) {
        for bank in Bank::ALL {
            let mut tpm = fresh(22);
            let events: Vec<Vec<u8>> = raw.iter().map(|r| bank.hash(r)).collect();
            for e in &events {
                tpm.pcr_extend(bank, index, e).unwrap();
            }
            let sel = [PcrSelection::from_indices(bank, &[index]).unwrap()];
            prop_assert_eq!(&tpm.pcr_read(&sel)[0], &oracle_fold(bank, &events));
        }
    }

    #[test]
    fn quote_rejects_single_bit_mutation(bit in 0usize..(64 * 8), field in 0u8..3, nonce in proptest::collection::vec(any::<u8>(), 1..=64)) {
        let mut tpm = fresh(23);
        let (aik, aik_pub) = tpm.create_primary(Hierarchy::Endorsement, &KeyTemplate::attestation()).unwrap();
        let q = tpm.quote(aik, &quote_selection(), &nonce).unwrap();
        prop_assert!(q.verify(&aik_pub));
        let mut m = q.clone();
        match field {
            0 => { let i = bit % (m.nonce.len() * 8); m.nonce[i / 8] ^= 1 << (i % 8); }
            1 => { let i = bit % 256; m.pcr_digest[i / 8] ^= 1 << (i % 8); }
            _ => { m.signature[bit / 8] ^= 1 << (bit % 8); }
        }
        prop_assert!(!m.verify(&aik_pub));
    }
}
