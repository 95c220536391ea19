//! Simulation and experiment harness for a hierarchical humanoid agent: a
//! planar office world, a skill library, a grounding layer with composite
//! navigation behaviours, a prompt-driven planning loop and an ablation runner.

pub mod agent;
pub mod call;
pub mod connector;
pub mod gateway;
pub mod geom;
pub mod harness;
pub mod sim;
pub mod skills;
pub mod trace;
pub mod world;

/// Planar point in metres.
pub type Point = geom::Vec2<f64>;
pub type Point32 = geom::Vec2<f32>;
pub type Segment = geom::Segment<f64>;
pub type Segment32 = geom::Segment<f32>;
