// SPDX-License-Identifier: Apache-2.0

use std::sync::{Arc, Mutex};

use snp_platform::{
    AttestationReport, ContextRole, GuestMessenger, LaunchConfig, LaunchImage, PlatformError, PlatformHandle,
    SecureProcessor,
};
use vmpl_channel::{Channel, ChannelError, HonestHypervisor, HypervisorHook};

use crate::instance::{ProvisionOptions, SvsmError, SvsmInstance};

pub type SharedPlatform = Arc<Mutex<PlatformHandle>>;

/// A launched confidential VM: the SVSM at VMPL0 behind a command channel,
/// and the guest's own VMPCK for direct report requests.
pub struct GuestVm {
    platform: SharedPlatform,
    channel: Channel<SvsmInstance>,
    guest: GuestMessenger,
}

impl std::fmt::Debug for GuestVm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GuestVm")
            .field("channel", &self.channel)
            .finish_non_exhaustive()
    }
}

impl GuestVm {
    pub fn launch(
        processor: &mut SecureProcessor,
        image: &LaunchImage,
        config: LaunchConfig,
        options: ProvisionOptions,
    ) -> Result<Self, SvsmError> {
        let platform = Arc::new(Mutex::new(processor.launch(image, config)?));
        Self::start(platform, options, Box::new(HonestHypervisor))
    }

    pub fn start(
        platform: SharedPlatform,
        options: ProvisionOptions,
        hook: Box<dyn HypervisorHook>,
    ) -> Result<Self, SvsmError> {
        let svsm = SvsmInstance::provision(Arc::clone(&platform), options)?;
        let guest = platform
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .messenger(ContextRole::Guest)?;
        Ok(Self {
            platform,
            channel: Channel::new(svsm, hook),
            guest,
        })
    }

    /// Sends a TPM command from the guest through the command page.
    pub fn invoke(&mut self, command: &[u8]) -> Result<Vec<u8>, ChannelError> {
        self.channel.guest_invoke(command)
    }

    /// A report requested by guest code over its own VMPCK.
    pub fn guest_report(
        &mut self,
        report_data: &[u8; 64],
        claimed_vmpl: u32,
    ) -> Result<AttestationReport, PlatformError> {
        let request = self.guest.report_request(report_data, claimed_vmpl);
        let (response, _) = self
            .platform
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .report_request(self.guest.vmpl(), &request)?;
        self.guest.open_report(&response)
    }

    pub fn guest_vmpl(&self) -> u32 {
        self.guest.vmpl()
    }

    pub fn set_hook(&mut self, hook: Box<dyn HypervisorHook>) {
        self.channel.set_hook(hook);
    }

    pub fn channel(&self) -> &Channel<SvsmInstance> {
        &self.channel
    }

    pub fn svsm(&self) -> &SvsmInstance {
        self.channel.handler()
    }

    pub fn platform(&self) -> &SharedPlatform {
        &self.platform
    }

    pub fn measurement(&self) -> [u8; 48] {
        self.platform.lock().unwrap_or_else(|e| e.into_inner()).measurement()
    }

    pub fn vcek_chain(&self) -> Vec<u8> {
        self.platform.lock().unwrap_or_else(|e| e.into_inner()).vcek_chain()
    }

    /// Reboots the VM: the vTPM is manufactured anew and the channel starts
    /// over with an honest hypervisor.
    pub fn reboot(self) -> Result<Self, SvsmError> {
        let svsm = self.channel.into_handler().reboot()?;
        Ok(Self {
            platform: self.platform,
            channel: Channel::honest(svsm),
            guest: self.guest,
        })
    }
}
