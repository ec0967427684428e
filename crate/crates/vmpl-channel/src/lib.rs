// SPDX-License-Identifier: Apache-2.0

//! Guest (VMPL1) to SVSM (VMPL0) command channel over a shared page.
//!
//! The guest writes a command, sets the page status and exits. The
//! hypervisor observes only the exit and can resume, delay or halt the VM.
//! Resumption after a guest exit always lands at VMPL0, and after an SVSM
//! return at VMPL1.

mod context;
mod error;
mod page;

pub use context::{
    guest_collect, guest_post, svsm_poll, svsm_respond, svsm_respond_error, Channel, ExitReason, HaltingHypervisor,
    HonestHypervisor, HookAction, HypervisorHook, VmExit, Vmpl0Handler, Vmpl0Port, VmplContext, GUEST_VMPL, SVSM_VMPL,
};
pub use error::ChannelError;
pub use page::{CommandPage, PageStatus, HEADER_LEN, PAGE_SIZE, PAYLOAD_LEN};
