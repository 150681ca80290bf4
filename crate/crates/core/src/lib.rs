#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod cocommit;
pub mod group;
pub mod identity;
pub mod pedersen;
pub mod protocols;
pub mod record;
pub mod wire;
