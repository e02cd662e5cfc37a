//! EcoTIM: implement-side ground-speed optimisation for tractor-implement
//! systems, with the tractor powertrain, traction, draft and bus models needed
//! to simulate it.

pub mod codec;
pub mod config;
pub mod draft;
pub mod engine;
pub mod implement;
pub mod report;
pub mod sim;
pub mod track;
pub mod traction;
pub mod tractor;
pub mod transmission;
