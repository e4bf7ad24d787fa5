//! Estimation of an observed vehicle's GPS position from a moving vehicle's
//! forward camera and GPS trace.
//!
//! Two routes produce a range and view angle per detection: size-ratio
//! ranging from the bounding box ([`ranging`]) and ground-plane
//! back-projection through the pitched pinhole camera ([`groundplane`]).
//! Either combines with the ego heading and a spherical destination-point
//! solve ([`geodesy`]) into a target geolocation. Camera pitch and height
//! can self-calibrate from lane lines ([`vision`], [`extrinsics`]). A
//! synthetic-scene generator ([`simulator`]) provides exact ground truth,
//! and [`evaluation`] reports deviation statistics against it.

pub mod camera;
pub mod evaluation;
pub mod extrinsics;
pub mod geodesy;
pub mod groundplane;
pub mod io;
pub mod pipeline;
pub mod ranging;
pub mod simulator;
pub mod vision;
