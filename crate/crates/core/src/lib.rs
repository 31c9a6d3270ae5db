//! Agentic text-to-3D prototype generation.
//!
//! A query such as `"Chair"` is turned into a part-labeled primitive scene by
//! three cooperating agents (designer, coder, visual inspector) talking to a
//! multimodal language model. The crate also carries everything needed to
//! look at and measure the result: the ProtoScene language, a sphere-tracing
//! renderer, point-cloud registration and distance metrics, and dataset tools.

pub mod agents;
pub mod dataset;
pub mod geomeval;
pub mod math;
pub mod mllm;
pub mod render;
pub mod scene;

pub use math::Vec3;
