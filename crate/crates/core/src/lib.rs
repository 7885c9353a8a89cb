//! Runtime for a low-cost assistive humanoid.
//!
//! The crate is split the same way the robot's software is: an
//! [`intent`] engine (bag-of-words MLP chatbot), a [`gait`] engine that
//! produces and executes timed joint keyframes, a [`servo`] hardware
//! abstraction with a simulated bus, offline [`assistant`] providers, the
//! [`overseer`] that routes transcripts and supervises segments, and the
//! [`gateway`] that serves the operator console.

pub mod assistant;
pub mod gait;
pub mod gateway;
pub mod intent;
pub mod overseer;
pub mod par;
pub mod servo;

pub use par::Parallelism;
