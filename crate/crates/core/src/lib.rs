pub mod craftworld;
pub mod evaluator;
pub mod explorer;
pub mod feedback;
pub mod orchestrator;
pub mod policy;
pub mod seeds;
pub mod skillgen;
pub mod store;
pub mod trainer;
