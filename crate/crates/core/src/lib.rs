pub mod classifier;
pub mod crypto;
pub mod fingerprint;
pub mod netsim;
pub mod overhead;
pub mod phy;
pub mod protocol;
pub mod rng;
