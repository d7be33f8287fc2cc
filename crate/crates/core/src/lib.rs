pub mod geometry;
pub mod detect;
pub mod schema;
pub mod fidelity;
pub mod genpipe;
pub mod corpus;
pub mod cli;
