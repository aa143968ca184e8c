//! Virtual Guide Dog core.
//!
//! A simulated visually-impaired pedestrian client that detects when it is
//! near an intersection, announces crossing options, places a pedestrian
//! call on a virtual actuated signal controller over an SNMPv1-subset
//! (NTCIP-style) UDP protocol, and guides the crossing while WALK is shown.
//!
//! Module map:
//!
//! - [`geo`]: haversine distance, bearing, heading error, proximity zones.
//! - [`intersection_db`]: intersection geometry corpus.
//! - [`controller`]: single-ring actuated controller with latched ped calls.
//! - [`ntcip`]: BER codec, object registry, UDP agent and manager.
//! - [`client`]: the guidance state machine.
//! - [`sim`]: deterministic co-simulation, GPS error models and reports.

pub mod client;
pub mod controller;
pub mod geo;
pub mod intersection_db;
pub mod ntcip;
pub mod sim;

mod toml_util;
