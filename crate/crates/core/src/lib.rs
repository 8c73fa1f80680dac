//! Flight control stack and simulation environment for a compound VTOL
//! aircraft (four lift rotors, one pusher propeller, ailerons and an
//! inverted V-tail).
//!
//! The library is organized as a cascade that mirrors the controller
//! structure plus the simulation plant that closes the loop:
//!
//! * [`geom`] - frame/vector primitives shared by everything else.
//! * [`plant`] - 6-DOF rigid-body dynamics, actuator lags, PWM mapping.
//! * [`outer`] - position and speed-vector loops producing a desired
//!   acceleration.
//! * [`solver`] - analytic inversion of gravity + aerodynamics + thrust
//!   into an attitude frame and thrust setpoints.
//! * [`inner`] - attitude/rate loops and blended torque allocation.
//! * [`fsm`] - transition / back-transition phase machine.
//! * [`airdata`] - kinematic air-velocity estimation from pitot + attitude.
//! * [`controller`] - the assembled flight controller.
//! * [`scenario`], [`sim`], [`linearize`] - config loading, closed-loop
//!   runner with logging/metrics, and local stability analysis.

pub mod airdata;
pub mod controller;
pub mod fsm;
pub mod geom;
pub mod inner;
pub mod linearize;
pub mod outer;
pub mod plant;
pub mod scenario;
pub mod selftest;
pub mod sim;
pub mod solver;

pub use geom::{BodyFrame, Vec3};
