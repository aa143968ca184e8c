#![allow(dead_code)]

pub mod golden;
pub mod messages;
pub mod safety;
