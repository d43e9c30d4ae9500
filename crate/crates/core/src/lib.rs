//! Joint spectral/energy efficiency design for pinching-antenna systems.
//!
//! Dielectric waveguides carry the signal from a base station; pinching
//! antennas (PAs) placed along each waveguide radiate it to ground users.
//! The PA x-coordinates act as an analog beamformer alongside the digital
//! precoder, and the designs here pick both to trade spectral efficiency
//! against energy efficiency with a weight `beta`.

pub mod channel;
pub mod convex;
pub mod error;
pub mod layout;
pub mod metrics;
pub mod multi_user;
pub mod oracle;
pub mod params;
pub mod single_user;

pub use channel::{build_channels, ChannelState};
pub use error::{Error, Result};
pub use layout::{PinchLayout, Point3, UserSet};
pub use metrics::{se_ee_multi, se_ee_single, Efficiency, PowerAllocation};
pub use params::SystemParams;
