//! Crafter-style survival gridworld with text observations.

pub mod effects;
mod init;
mod observe;
mod types;
mod world;
pub mod worldgen;

pub use init::{
    randomized_init, randomized_init_with, sample_tier, InitError, InitSpec, ProgressionTier,
    DEFAULT_TIER_WEIGHTS,
};
pub use observe::{
    observe, render_text, step_distance, Compass, Facing, LocalView, Observation, Seen, Sighting,
    ViewEntity, VIEW_H, VIEW_W,
};
pub use types::{
    AchievementId, Action, AgentStatus, Direction, EntityKind, Inventory, ItemKind, TaskType,
    TileKind, ITEM_MAX, METER_MAX,
};
pub use world::{
    new_world, new_world_with, step, tile_char, tile_from_char, Agent, Entity, Pos, Sapling,
    StepError, StepOutcome, WorldConfig, WorldState, STATE_SCHEMA,
};
