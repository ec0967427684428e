// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use attest_wire::{EventLog, Failure, FailureCode, Uuid, Verdict};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256, Sha512};
use snp_platform::{verify_report, AttestationReport, VerifyError};
use tpm_engine::{pcr_digest, Bank, PcrSelection, PublicKey, Quote};

use crate::policy::AttestationPolicy;
use crate::store::RegistrationRecord;

/// Validates an EK public key against the report found at its NV index.
///
/// Checks run in order: the signature chains to the pinned root, the launch
/// measurement is the golden one, the report came from VMPL0, and the
/// report binds `SHA-512(ek_pub)`. Every failing check is reported.
pub fn check_ek_report(
    ek_pub: &[u8],
    report_bytes: &[u8],
    vcek_chain: &[u8],
    policy: &AttestationPolicy,
) -> Vec<Failure> {
    let report = match AttestationReport::from_bytes(report_bytes) {
        Ok(r) => r,
        Err(e) => {
            return vec![Failure::new(
                FailureCode::SigInvalid,
                format!("unparseable report: {e}"),
            )]
        }
    };
    let mut failures = Vec::new();
    match verify_report(&report, vcek_chain, &policy.pinned_amd_root) {
        Ok(()) => {}
        Err(VerifyError::ChainIncomplete) => failures.push(Failure::new(
            FailureCode::ChainIncomplete,
            "certificate chain incomplete",
        )),
        Err(e) => failures.push(Failure::new(FailureCode::SigInvalid, e.to_string())),
    }
    if report.measurement != policy.golden_measurement {
        failures.push(Failure::new(
            FailureCode::MeasurementMismatch,
            format!("launch measurement {}", hex::encode(report.measurement)),
        ));
    }
    if report.vmpl != 0 {
        failures.push(Failure::new(
            FailureCode::VmplNonZero,
            format!("report issued at VMPL{}", report.vmpl),
        ));
    }
    if report.report_data[..] != Sha512::digest(ek_pub)[..] {
        failures.push(Failure::new(
            FailureCode::EkDigestMismatch,
            "report data is not SHA-512(EK public)",
        ));
    }
    failures
}

/// `HMAC-SHA256(secret, uuid)`, the agent's answer to a credential challenge.
pub fn activation_proof(secret: &[u8], uuid: &Uuid) -> Vec<u8> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(secret).expect("any key length");
    mac.update(uuid);
    mac.finalize().into_bytes().to_vec()
}

/// Checks a quote response against the registered AIK, the challenge nonce
/// and the policy. Pure; the verdict depends only on the arguments.
pub fn evaluate_quote(
    policy: &AttestationPolicy,
    record: &RegistrationRecord,
    nonce: &[u8],
    quote_bytes: &[u8],
    pcr_values: &[Vec<u8>],
    event_log: &str,
) -> Verdict {
    let mut failures = Vec::new();
    let quote = match Quote::from_bytes(quote_bytes) {
        Ok(q) => q,
        Err(e) => {
            return Verdict::from_failures(vec![Failure::new(
                FailureCode::SigInvalid,
                format!("unparseable quote: {e}"),
            )])
        }
    };
    if !quote.verify(&record.aik_pub) {
        failures.push(Failure::new(
            FailureCode::SigInvalid,
            "quote not signed by the registered AIK",
        ));
    }
    if quote.nonce != nonce {
        failures.push(Failure::new(
            FailureCode::NonceMismatch,
            "quote nonce differs from challenge",
        ));
    }

    let required = match PcrSelection::from_mask(Bank::Sha256, policy.required_pcr_mask) {
        Ok(s) => s,
        Err(_) => {
            failures.push(Failure::new(
                FailureCode::PolicyViolation,
                "policy PCR mask out of range",
            ));
            return Verdict::from_failures(failures);
        }
    };
    if quote.selection != [required] {
        failures.push(Failure::new(
            FailureCode::PolicyViolation,
            "quote does not cover the required PCRs",
        ));
        return Verdict::from_failures(failures);
    }
    let indices: Vec<usize> = required.indices().collect();
    if pcr_values.len() != indices.len() || pcr_digest(pcr_values) != quote.pcr_digest {
        failures.push(Failure::new(
            FailureCode::SigInvalid,
            "PCR values do not match the quoted digest",
        ));
        return Verdict::from_failures(failures);
    }

    let log = match EventLog::parse(event_log) {
        Ok(l) => l,
        Err(e) => {
            failures.push(Failure::new(
                FailureCode::PcrLogDivergence,
                format!("unparseable event log: {e}"),
            ));
            return Verdict::from_failures(failures);
        }
    };
    let replay = log.replay();
    let zero = Bank::Sha256.zero_digest();
    for (&idx, value) in indices.iter().zip(pcr_values) {
        let expected = replay.get(&(Bank::Sha256, idx as u32)).unwrap_or(&zero);
        if expected != value {
            failures.push(Failure::new(
                FailureCode::PcrLogDivergence,
                format!("PCR {idx} does not match event log replay"),
            ));
        }
    }
    let quoted: BTreeSet<u32> = indices.iter().map(|&i| i as u32).collect();
    for e in log.entries() {
        if e.bank != Bank::Sha256 || !quoted.contains(&e.pcr_index) {
            failures.push(Failure::new(
                FailureCode::PcrLogDivergence,
                format!("log entry for unquoted PCR {} ({})", e.pcr_index, e.bank),
            ));
        } else if !policy.allows(e.pcr_index, e.event_type, &e.digest) {
            failures.push(Failure::new(
                FailureCode::PolicyViolation,
                format!(
                    "{} event {} on PCR {} not allowed: {}",
                    e.event_type.name(),
                    hex::encode(&e.digest),
                    e.pcr_index,
                    e.description
                ),
            ));
        }
    }
    Verdict::from_failures(failures)
}

/// Accepts only keys whose algorithm tag matches.
pub(crate) fn parse_key(bytes: &[u8], algorithm: tpm_engine::KeyAlgorithm) -> Option<PublicKey> {
    PublicKey::from_bytes(bytes).ok().filter(|k| k.algorithm() == algorithm)
}
