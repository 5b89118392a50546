use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Action, ActionSpace, LocalStateSpace, TaskId};

/// Turn rates (rad/s) available to the sector-sensing tasks.
pub const TURN_RATES: [f64; 8] = [-1.0, -0.7, -0.3, -0.1, 0.1, 0.3, 0.7, 1.0];

/// Parameters shared by every robot body regardless of task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    /// Inverse-distance repulsion gain.
    pub k_rep: f64,
    /// Distance below which repulsion acts (m).
    pub d_safe: f64,
    /// Cap on the repulsion speed contribution (m/s).
    pub max_repulsion: f64,
    /// Physical radius, used for door sizing in generated arenas (m).
    pub radius: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            k_rep: 1.0,
            d_safe: 0.5,
            max_repulsion: 2.0,
            radius: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskParams {
    /// Task A: accelerated particles choosing move/stay.
    Aggregation {
        /// Neighbor count saturation `m_max`.
        m_max: usize,
        /// Speed of a moving robot (m/s).
        move_speed: f64,
        /// Velocity lag time constant (s).
        tau: f64,
    },
    /// Task B1: constant forward speed, policy picks the turn rate.
    Directional {
        sectors: usize,
        v_cmd: f64,
        turn_rates: Vec<f64>,
    },
    /// Task B2: speed scales with |turn rate|; turn for `t_turn`, then straight.
    DirectionalPulsed {
        sectors: usize,
        v_mean: f64,
        t_turn: f64,
        t_straight: f64,
        turn_rates: Vec<f64>,
    },
    /// Task C: foraging from a central nest.
    Foraging {
        /// Nest food at t = 0, `f(0)`.
        initial_food: f64,
        /// Food eaten by a searching robot every `t_c` seconds.
        e_f: f64,
        t_c: f64,
        /// Food consumed per second by each robot at the nest.
        e_n: f64,
        /// Number of local states (food-difference bins).
        n_bins: usize,
        /// Saturation of the sensed food difference.
        f_max: f64,
        /// Food items present in the arena at all times.
        food_items: usize,
        nest_radius: f64,
        speed: f64,
        /// How long an exploring robot holds a random heading (s).
        heading_hold: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: TaskId,
    pub n_robots: usize,
    /// Task horizon T (s).
    pub horizon: f64,
    /// Physics timestep (s).
    pub dt: f64,
    /// Sensing range (m).
    pub r_max: f64,
    /// Policy re-selection frequency `f_c` / `f_n` (Hz).
    pub control_rate: f64,
    /// Logging frequency (Hz).
    pub log_rate: f64,
    pub body: BodyParams,
    pub params: TaskParams,
}

impl TaskConfig {
    /// Published parameter values for each task.
    pub fn default_for(task: TaskId) -> Self {
        let (horizon, control_rate, n_robots, params) = match task {
            TaskId::A => (
                200.0,
                0.5,
                30,
                TaskParams::Aggregation {
                    m_max: 7,
                    move_speed: 0.5,
                    tau: 0.5,
                },
            ),
            TaskId::B1 => (
                200.0,
                0.5,
                30,
                TaskParams::Directional {
                    sectors: 4,
                    v_cmd: 0.5,
                    turn_rates: TURN_RATES.to_vec(),
                },
            ),
            TaskId::B2 => (
                200.0,
                0.5,
                30,
                TaskParams::DirectionalPulsed {
                    sectors: 4,
                    v_mean: 0.5,
                    t_turn: 1.0,
                    t_straight: 1.0,
                    turn_rates: TURN_RATES.to_vec(),
                },
            ),
            TaskId::C => (
                500.0,
                0.1,
                20,
                TaskParams::Foraging {
                    initial_food: 15.0,
                    e_f: 0.1,
                    t_c: 10.0,
                    e_n: 0.02,
                    n_bins: 30,
                    f_max: 5.0,
                    food_items: 10,
                    nest_radius: 3.0,
                    speed: 0.5,
                    heading_hold: 2.0,
                },
            ),
        };
        Self {
            task,
            n_robots,
            horizon,
            dt: 0.02,
            r_max: 2.0,
            control_rate,
            log_rate: 2.0,
            body: BodyParams::default(),
            params,
        }
    }

    pub fn with_robots(mut self, n: usize) -> Self {
        self.n_robots = n;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("r_max", self.r_max),
            ("control_rate", self.control_rate),
            ("log_rate", self.log_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_robots == 0 {
            return Err(Error::Config("n_robots must be at least 1".into()));
        }
        let matches_task = matches!(
            (self.task, &self.params),
            (TaskId::A, TaskParams::Aggregation { .. })
                | (TaskId::B1, TaskParams::Directional { .. })
                | (TaskId::B2, TaskParams::DirectionalPulsed { .. })
                | (TaskId::C, TaskParams::Foraging { .. })
        );
        if !matches_task {
            return Err(Error::Config(format!("task parameters do not belong to task {}", self.task)));
        }
        match &self.params {
            TaskParams::Aggregation { m_max, tau, .. } => {
                if *m_max == 0 || *tau <= 0.0 {
                    return Err(Error::Config("m_max and tau must be positive".into()));
                }
            }
            TaskParams::Directional { sectors, turn_rates, .. } => {
                if *sectors == 0 || *sectors > 16 || turn_rates.is_empty() {
                    return Err(Error::Config("need 1..=16 sectors and at least one turn rate".into()));
                }
            }
            TaskParams::DirectionalPulsed {
                sectors,
                turn_rates,
                t_turn,
                t_straight,
                ..
            } => {
                if *sectors == 0 || *sectors > 16 || turn_rates.is_empty() || *t_turn < 0.0 || *t_straight < 0.0 {
                    return Err(Error::Config("invalid pulsed-turn parameters".into()));
                }
            }
            TaskParams::Foraging {
                n_bins, f_max, t_c, nest_radius, ..
            } => {
                if *n_bins == 0 || n_bins % 2 != 0 || *f_max <= 0.0 || *t_c <= 0.0 || *nest_radius <= 0.0 {
                    return Err(Error::Config("foraging needs an even bin count and positive f_max, t_c, nest radius".into()));
                }
            }
        }
        let control_steps = self.steps_for(1.0 / self.control_rate);
        let log_steps = self.steps_for(1.0 / self.log_rate);
        if control_steps == 0 || log_steps == 0 {
            return Err(Error::Config("dt must be smaller than the control and logging periods".into()));
        }
        Ok(())
    }

    /// Number of physics steps spanning `seconds`.
    pub fn steps_for(&self, seconds: f64) -> usize {
        (seconds / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.steps_for(self.horizon)
    }

    pub fn n_states(&self) -> usize {
        match &self.params {
            TaskParams::Aggregation { m_max, .. } => m_max + 1,
            TaskParams::Directional { sectors, .. } | TaskParams::DirectionalPulsed { sectors, .. } => 1 << sectors,
            TaskParams::Foraging { n_bins, .. } => *n_bins,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.action_space().size()
    }

    pub fn state_space(&self) -> LocalStateSpace {
        let labels = match &self.params {
            TaskParams::Aggregation { m_max, .. } => (0..=*m_max).map(|m| format!("{m} neighbors")).collect(),
            TaskParams::Directional { sectors, .. } | TaskParams::DirectionalPulsed { sectors, .. } => (0..1usize << sectors)
                .map(|s| format!("sectors {:0width$b}", s, width = *sectors))
                .collect(),
            TaskParams::Foraging { n_bins, f_max, .. } => (0..*n_bins)
                .map(|k| {
                    let lo = -f_max + 2.0 * f_max * k as f64 / *n_bins as f64;
                    format!("f_g >= {lo:.3}")
                })
                .collect(),
        };
        LocalStateSpace::new(self.task, labels).expect("validated task has states")
    }

    pub fn action_space(&self) -> ActionSpace {
        let values = match &self.params {
            TaskParams::Aggregation { .. } => vec![Action::Move, Action::Stay],
            TaskParams::Directional { turn_rates, .. } | TaskParams::DirectionalPulsed { turn_rates, .. } => {
                turn_rates.iter().map(|&w| Action::Turn(w)).collect()
            }
            TaskParams::Foraging { .. } => vec![Action::Explore, Action::Stay],
        };
        ActionSpace::new(self.task, values).expect("validated task has actions")
    }
}
