// SPDX-License-Identifier: Apache-2.0

use std::time::Duration;

use crate::error::ChannelError;
use crate::page::{CommandPage, PageStatus};

pub const SVSM_VMPL: u32 = 0;
pub const GUEST_VMPL: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    /// The guest wrote the command page and requested service.
    GuestRequest,
    /// The SVSM finished and asked to return to the guest.
    SvsmReturn,
}

/// What the hypervisor sees at a world switch. Carries no page contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VmExit {
    pub reason: ExitReason,
    pub from_vmpl: u32,
    pub sequence: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Resume,
    /// Resume after a delay.
    Delay(Duration),
    Halt,
}

/// The hypervisor's view of VMPL transitions. It decides whether and when to
/// resume, never at which level.
pub trait HypervisorHook: Send {
    fn on_exit(&mut self, exit: &VmExit) -> HookAction;
}

impl<F: FnMut(&VmExit) -> HookAction + Send> HypervisorHook for F {
    fn on_exit(&mut self, exit: &VmExit) -> HookAction {
        self(exit)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct HonestHypervisor;

impl HypervisorHook for HonestHypervisor {
    fn on_exit(&mut self, _: &VmExit) -> HookAction {
        HookAction::Resume
    }
}

/// Halts the VM at the first exit.
#[derive(Debug, Default, Clone, Copy)]
pub struct HaltingHypervisor;

impl HypervisorHook for HaltingHypervisor {
    fn on_exit(&mut self, _: &VmExit) -> HookAction {
        HookAction::Halt
    }
}

pub struct VmplContext {
    current_vmpl: u32,
    exit_pending: bool,
    halted: bool,
    command_taken: bool,
    exits: u64,
    hook: Box<dyn HypervisorHook>,
}

impl std::fmt::Debug for VmplContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VmplContext")
            .field("current_vmpl", &self.current_vmpl)
            .field("exit_pending", &self.exit_pending)
            .field("halted", &self.halted)
            .field("exits", &self.exits)
            .finish_non_exhaustive()
    }
}

impl VmplContext {
    /// A context with the guest running at VMPL1.
    pub fn new(hook: Box<dyn HypervisorHook>) -> Self {
        Self {
            current_vmpl: GUEST_VMPL,
            exit_pending: false,
            halted: false,
            command_taken: false,
            exits: 0,
            hook,
        }
    }

    pub fn current_vmpl(&self) -> u32 {
        self.current_vmpl
    }

    pub fn exit_pending(&self) -> bool {
        self.exit_pending
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn exits(&self) -> u64 {
        self.exits
    }

    pub fn set_hook(&mut self, hook: Box<dyn HypervisorHook>) {
        self.hook = hook;
    }

    fn world_switch(&mut self, reason: ExitReason, target: u32) -> Result<(), ChannelError> {
        if self.halted {
            return Err(ChannelError::ChannelHalted);
        }
        self.exit_pending = true;
        let exit = VmExit {
            reason,
            from_vmpl: self.current_vmpl,
            sequence: self.exits,
        };
        self.exits += 1;
        match self.hook.on_exit(&exit) {
            HookAction::Resume => {}
            HookAction::Delay(d) => std::thread::sleep(d),
            HookAction::Halt => {
                self.halted = true;
                return Err(ChannelError::ChannelHalted);
            }
        }
        self.exit_pending = false;
        self.current_vmpl = target;
        Ok(())
    }

    /// Guest-triggered exit; resumes at VMPL0.
    pub fn guest_exit(&mut self) -> Result<(), ChannelError> {
        if self.halted {
            return Err(ChannelError::ChannelHalted);
        }
        if self.current_vmpl != GUEST_VMPL {
            return Err(ChannelError::ProtocolError("guest exit from wrong level"));
        }
        self.world_switch(ExitReason::GuestRequest, SVSM_VMPL)
    }

    fn svsm_exit(&mut self) -> Result<(), ChannelError> {
        self.world_switch(ExitReason::SvsmReturn, GUEST_VMPL)
    }
}

/// Guest side: post the command and exit to the hypervisor.
pub fn guest_post(ctx: &mut VmplContext, page: &mut CommandPage, command: &[u8]) -> Result<(), ChannelError> {
    if ctx.halted {
        return Err(ChannelError::ChannelHalted);
    }
    if ctx.current_vmpl != GUEST_VMPL {
        return Err(ChannelError::ProtocolError("guest not running"));
    }
    page.post_command(command)?;
    ctx.command_taken = false;
    ctx.guest_exit()
}

/// Guest side: collect the response after re-entry.
pub fn guest_collect(ctx: &mut VmplContext, page: &mut CommandPage) -> Result<Vec<u8>, ChannelError> {
    if ctx.halted {
        return Err(ChannelError::ChannelHalted);
    }
    if ctx.current_vmpl != GUEST_VMPL {
        return Err(ChannelError::ProtocolError("guest not running"));
    }
    page.take_response()
}

fn require_vmpl0(ctx: &VmplContext) -> Result<(), ChannelError> {
    if ctx.halted {
        return Err(ChannelError::ChannelHalted);
    }
    if ctx.current_vmpl != SVSM_VMPL {
        return Err(ChannelError::ProtocolError("not running at VMPL0"));
    }
    Ok(())
}

/// VMPL0 side: fetch the pending command, at most once per command.
pub fn svsm_poll(ctx: &mut VmplContext, page: &CommandPage) -> Result<Vec<u8>, ChannelError> {
    require_vmpl0(ctx)?;
    if ctx.command_taken || page.status()? != PageStatus::CommandReady {
        return Err(ChannelError::NothingPending);
    }
    ctx.command_taken = true;
    Ok(page.command()?.to_vec())
}

/// VMPL0 side: answer the pending command and return to the guest.
pub fn svsm_respond(ctx: &mut VmplContext, page: &mut CommandPage, response: &[u8]) -> Result<(), ChannelError> {
    require_vmpl0(ctx)?;
    page.write_response(response)?;
    ctx.command_taken = false;
    ctx.svsm_exit()
}

/// VMPL0 side: answer the pending command with an error code.
pub fn svsm_respond_error(ctx: &mut VmplContext, page: &mut CommandPage, code: u32) -> Result<(), ChannelError> {
    require_vmpl0(ctx)?;
    page.write_error(code)?;
    ctx.command_taken = false;
    ctx.svsm_exit()
}

/// The VMPL0 side's handle on the channel during one entry.
pub struct Vmpl0Port<'a> {
    ctx: &'a mut VmplContext,
    page: &'a mut CommandPage,
}

impl Vmpl0Port<'_> {
    pub fn poll(&mut self) -> Result<Vec<u8>, ChannelError> {
        svsm_poll(self.ctx, self.page)
    }

    pub fn respond(&mut self, response: &[u8]) -> Result<(), ChannelError> {
        svsm_respond(self.ctx, self.page, response)
    }

    pub fn respond_error(&mut self, code: u32) -> Result<(), ChannelError> {
        svsm_respond_error(self.ctx, self.page, code)
    }
}

/// Code resident at VMPL0, entered after each guest exit.
pub trait Vmpl0Handler {
    fn on_entry(&mut self, port: &mut Vmpl0Port<'_>);
}

/// A guest/SVSM pair sharing one command page.
pub struct Channel<H> {
    ctx: VmplContext,
    page: CommandPage,
    svsm: H,
}

impl<H: std::fmt::Debug> std::fmt::Debug for Channel<H> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("ctx", &self.ctx)
            .field("page", &self.page)
            .field("svsm", &self.svsm)
            .finish()
    }
}

impl<H: Vmpl0Handler> Channel<H> {
    pub fn new(svsm: H, hook: Box<dyn HypervisorHook>) -> Self {
        Self {
            ctx: VmplContext::new(hook),
            page: CommandPage::new(),
            svsm,
        }
    }

    pub fn honest(svsm: H) -> Self {
        Self::new(svsm, Box::new(HonestHypervisor))
    }

    /// Sends one command from VMPL1 and waits for the response.
    pub fn guest_invoke(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        guest_post(&mut self.ctx, &mut self.page, command)?;
        let mut port = Vmpl0Port {
            ctx: &mut self.ctx,
            page: &mut self.page,
        };
        self.svsm.on_entry(&mut port);
        if self.ctx.halted {
            return Err(ChannelError::ChannelHalted);
        }
        if self.ctx.current_vmpl != GUEST_VMPL {
            return Err(ChannelError::ProtocolError("SVSM returned without responding"));
        }
        guest_collect(&mut self.ctx, &mut self.page)
    }

    pub fn context(&self) -> &VmplContext {
        &self.ctx
    }

    pub fn set_hook(&mut self, hook: Box<dyn HypervisorHook>) {
        self.ctx.set_hook(hook);
    }

    pub fn page(&self) -> &CommandPage {
        &self.page
    }

    pub fn handler(&self) -> &H {
        &self.svsm
    }

    pub fn handler_mut(&mut self) -> &mut H {
        &mut self.svsm
    }

    pub fn into_handler(self) -> H {
        self.svsm
    }
}
