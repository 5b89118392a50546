//! End-to-end flows: standalone model-based design, simulation-based and
//! hybrid evolution, online learning, and evaluation.

pub mod evaluate;
pub mod evolution;
pub mod online;
pub mod report;
pub mod standalone;

pub use evaluate::{evaluate, evaluate_logs, EvalSettings, EvaluationSummary, PolicySource, Quartiles};
pub use standalone::{run_standalone, StandaloneConfig, StandaloneResult, StandaloneSummary};
pub use evolution::{
    run_baseline_evolution, run_hybrid_evolution, EvolutionConfig, EvolutionOutcome, HybridConfig, HybridOutcome,
    InjectionRecord,
};
pub use report::{collect as collect_report, Report, ReportFormat};
pub use online::{run_frozen, run_online, run_online_single, OnlineConfig, OnlineMode, OnlineOutcome, OnlineRun};
