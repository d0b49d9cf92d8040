//! Synthetic frequency-hopping emitters seen through a narrowband receiver.
//!
//! Each device is an [`EmitterProfile`] of hardware impairments. The receiver
//! is tuned to one 2 MHz channel, so a device's GFSK bursts only show up
//! when its pseudorandom hop sequence lands on that channel.

mod channel;
mod dataset;
mod emission;
mod profile;

pub use channel::apply_channel;
pub use dataset::{
    make_dataset, make_datasets, split_for, ChannelPlan, Dataset, DatasetConfig, Example, Manifest,
    ManifestExample, Scenario, Split, Variant,
};
pub use emission::{gen_emission, gfsk_baseband, occupancy};
pub use profile::{desk_channel_plan, desk_profiles, ChannelModel, EmitterProfile, HopConfig};
