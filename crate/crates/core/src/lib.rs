//! Negotiated strategic deconfliction for urban air mobility.
//!
//! A provider of services sets per-flight choices at vertiports and the
//! sectors around them ([`step1`]), operators plan their own trajectories
//! inside those choices ([`step2`]), and the provider resolves remaining
//! en-route conflicts with a fairness-aware joint model ([`step3`]). A
//! fixed-route traffic flow management model ([`baseline`]) serves as the
//! comparator, and [`sim`] runs rolling-horizon campaigns over all of them.

pub mod airspace;
pub mod baseline;
pub mod config;
pub mod flight;
pub mod milp;
pub mod oracle;
pub mod routing;
pub mod sim;
pub mod step1;
pub mod step2;
pub mod step3;
pub mod trajectory;

pub use airspace::{AirspaceGrid, GridConfig, Horizon, OccupancyLedger, OccupancySnapshot, ResourceId, Timestep};
pub use flight::{DelayCostParams, FlightId, FlightPlan, FlightRequest};
