//! Built-in worlds, tasks and skill curricula.

mod curriculum;
mod golden;
mod household;
mod tasks;
pub(crate) mod worlds;

pub use curriculum::{primitive_inventory, record, Curriculum, CurriculumError};
pub use golden::{
    build_golden_database, golden_critic_rules, golden_curriculum, golden_goals,
    golden_planner_rules, run_golden, GOLDEN_INSTRUCTION, GOLDEN_STEP_BUDGET, GOLDEN_TRACE,
};
pub use household::{
    build_household_database, household_curriculum, household_database, FOODS, FRUITS,
};
pub use tasks::{household_task, household_tasks, InstructionType, TaskFixture, STEP_BUDGET};
pub use worlds::{apartment, house, kitchen, toy, world, WORLD_NAMES};
