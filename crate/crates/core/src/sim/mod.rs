//! Multi-robot simulator for the aggregation and foraging tasks.

pub mod arena;
pub mod config;
pub mod fitness;
pub mod log;
pub mod sensing;
pub mod world;

pub use arena::{generate_multi_room_arena, Arena, ArenaKind, Vec2, Wall};
pub use config::{BodyParams, TaskConfig, TaskParams, TURN_RATES};
pub use fitness::{cluster_count, fitness_aggregation};
pub use log::{Cause, RunLog, RunMeta, TransitionEvent};
pub use sensing::{sense_nest_difference, sense_neighbors_count, sense_sectors};
pub use world::{run_simulation, World};
