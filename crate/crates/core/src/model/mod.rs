//! CVRP instances, solutions, file formats and a synthetic instance generator.
//!
//! Internally the depot is always node index 0 and customers occupy indices
//! `1..=n` in the order they appear in [`Instance::customers`]. Routes store
//! these internal indices and never include the depot.

pub(crate) mod generator;
mod instance;
mod io;
mod solution;

pub use generator::{CustomerLayout, DemandLaw, DepotPosition, GeneratorConfig};
pub use instance::{Customer, Instance, Point};
pub use io::{parse_instance, parse_solution, write_instance, write_solution, ParseError};
pub use solution::{objective, route_length, Solution, SolutionSource};

use thiserror::Error;

/// Generates the synthetic instance described by `cfg`.
pub fn generate_instance(cfg: &GeneratorConfig) -> Instance {
    cfg.generate()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("customer {id}: demand {demand} must be positive")]
    ZeroDemand { id: u32, demand: u32 },
    #[error("customer {id}: demand exceeds capacity ({demand} > {capacity})")]
    DemandExceedsCapacity { id: u32, demand: u32, capacity: u32 },
    #[error("duplicate node id {0}")]
    DuplicateId(u32),
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("fleet of {fleet} vehicles cannot carry total demand {demand} at capacity {capacity}")]
    FleetTooSmall { fleet: u32, demand: u64, capacity: u32 },
    #[error("unknown customer index {0}")]
    UnknownCustomer(usize),
    #[error("customer index {0} visited more than once")]
    RepeatedCustomer(usize),
    #[error("customer index {0} is not visited")]
    MissingCustomer(usize),
    #[error("route {route} carries {load} > capacity {capacity}")]
    Overloaded { route: usize, load: u64, capacity: u32 },
    #[error("{routes} routes exceed the fleet size {fleet}")]
    TooManyRoutes { routes: usize, fleet: u32 },
    #[error("route {0} is empty")]
    EmptyRoute(usize),
    #[error("stored objective {stored} differs from recomputed {recomputed}")]
    ObjectiveMismatch { stored: f64, recomputed: f64 },
    #[error("solution belongs to instance {found}, expected {expected}")]
    InstanceMismatch { expected: String, found: String },
}
