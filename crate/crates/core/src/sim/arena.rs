//! Square and multi-room arenas with axis-aligned walls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::types::rng_from_seed;

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub from: Vec2,
    pub to: Vec2,
}

impl Wall {
    /// Axis the wall is perpendicular to: 0 for a vertical wall (constant x).
    fn normal_axis(&self) -> usize {
        if self.from[0] == self.to[0] {
            0
        } else {
            1
        }
    }

    fn position(&self) -> f64 {
        self.from[self.normal_axis()]
    }

    fn span(&self) -> (f64, f64) {
        let axis = 1 - self.normal_axis();
        let (a, b) = (self.from[axis], self.to[axis]);
        (a.min(b), a.max(b))
    }

    /// Whether the straight move `p -> q` crosses this wall.
    pub fn crossed_by(&self, p: Vec2, q: Vec2) -> bool {
        let n = self.normal_axis();
        let t = 1 - n;
        let w = self.position();
        let dp = p[n] - w;
        let dq = q[n] - w;
        if dp == 0.0 && dq == 0.0 {
            return false;
        }
        if dp * dq > 0.0 {
            return false;
        }
        let frac = if dp == dq { 0.0 } else { dp / (dp - dq) };
        let at = p[t] + frac * (q[t] - p[t]);
        let (lo, hi) = self.span();
        at >= lo && at <= hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArenaKind {
    Square,
    MultiRoom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub kind: ArenaKind,
    pub side: f64,
    /// Interior walls; the outer boundary is implicit.
    pub walls: Vec<Wall>,
    pub seed: Option<u64>,
}

/// Outcome of moving a point against the arena geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounce {
    pub position: Vec2,
    /// Per-axis sign flips applied to the velocity (+1 or -1).
    pub flip: [f64; 2],
}

impl Arena {
    pub fn square(side: f64) -> Self {
        Self {
            kind: ArenaKind::Square,
            side,
            walls: Vec::new(),
            seed: None,
        }
    }

    pub fn center(&self) -> Vec2 {
        [self.side / 2.0, self.side / 2.0]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.side).contains(&p[0]) && (0.0..=self.side).contains(&p[1])
    }

    /// Moves from `p` toward `q`, mirroring off interior walls and the
    /// boundary. The result always lies inside the arena and on the same side
    /// of every interior wall as `p`.
    pub fn reflect_move(&self, p: Vec2, q: Vec2) -> Bounce {
        let mut q = q;
        let mut flip = [1.0, 1.0];
        for _ in 0..4 {
            let Some(wall) = self.walls.iter().find(|w| w.crossed_by(p, q)) else {
                break;
            };
            let n = wall.normal_axis();
            let w = wall.position();
            q[n] = 2.0 * w - q[n];
            if (q[n] - w) * (p[n] - w) <= 0.0 {
                // degenerate: keep strictly on p's side
                q[n] = w + (p[n] - w).signum() * 1e-6;
            }
            flip[n] = -flip[n];
        }
        for axis in 0..2 {
            if q[axis] < 0.0 {
                q[axis] = -q[axis];
                flip[axis] = -flip[axis];
            } else if q[axis] > self.side {
                q[axis] = 2.0 * self.side - q[axis];
                flip[axis] = -flip[axis];
            }
            q[axis] = q[axis].clamp(0.0, self.side);
        }
        // a bounce off the boundary can push back through a wall; stay put then
        if self.walls.iter().any(|w| w.crossed_by(p, q)) {
            q = p;
        }
        Bounce { position: q, flip }
    }

    /// Whether the straight segment between two points is unobstructed.
    pub fn line_of_sight(&self, p: Vec2, q: Vec2) -> bool {
        !self.walls.iter().any(|w| w.crossed_by(p, q))
    }

    /// Grid flood fill: every free cell reachable from every other.
    pub fn is_connected(&self, cell: f64) -> bool {
        let n = (self.side / cell).ceil().max(1.0) as usize;
        let centre = |i: usize, j: usize| -> Vec2 {
            [
                ((i as f64 + 0.5) * cell).min(self.side),
                ((j as f64 + 0.5) * cell).min(self.side),
            ]
        };
        let mut seen = vec![false; n * n];
        let mut stack = vec![(0usize, 0usize)];
        seen[0] = true;
        let mut count = 1;
        while let Some((i, j)) = stack.pop() {
            let here = centre(i, j);
            let neighbors = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in neighbors {
                if a >= n || b >= n || seen[a * n + b] {
                    continue;
                }
                if self.line_of_sight(here, centre(a, b)) {
                    seen[a * n + b] = true;
                    count += 1;
                    stack.push((a, b));
                }
            }
        }
        count == n * n
    }
}

/// Wall-count range and door sizing for generated arenas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiRoomSpec {
    pub min_walls: usize,
    pub max_walls: usize,
    pub min_door: f64,
    pub max_door: f64,
}

impl MultiRoomSpec {
    pub fn for_robot_radius(radius: f64) -> Self {
        let min_door = (4.0 * radius).max(1.5);
        Self {
            min_walls: 1,
            max_walls: 3,
            min_door,
            max_door: min_door.max(2.5),
        }
    }
}

impl Default for MultiRoomSpec {
    fn default() -> Self {
        Self::for_robot_radius(super::config::BodyParams::default().radius)
    }
}

/// Random rooms-and-corridors arena: full-span interior walls, each with one
/// door gap. Regenerates until the free space is connected.
pub fn generate_multi_room_arena(side: f64, seed: u64) -> Arena {
    generate_multi_room_arena_with(side, seed, &MultiRoomSpec::default())
}

pub fn generate_multi_room_arena_with(side: f64, seed: u64, spec: &MultiRoomSpec) -> Arena {
    const MAX_ATTEMPTS: usize = 100;
    let mut rng = rng_from_seed(seed);
    for attempt in 0..MAX_ATTEMPTS {
        let max_walls = if attempt + 1 == MAX_ATTEMPTS {
            spec.min_walls.min(1)
        } else {
            spec.max_walls
        };
        let count = if max_walls <= spec.min_walls {
            max_walls
        } else {
            rng.random_range(spec.min_walls..=max_walls)
        };
        let mut walls = Vec::new();
        for _ in 0..count {
            let vertical = rng.random_bool(0.5);
            let at = rng.random_range(0.25 * side..=0.75 * side);
            let door = rng.random_range(spec.min_door..=spec.max_door).min(0.5 * side);
            let door_start = rng.random_range(0.0..=(side - door));
            let segments = [(0.0, door_start), (door_start + door, side)];
            for (a, b) in segments {
                if b - a <= 1e-9 {
                    continue;
                }
                let wall = if vertical {
                    Wall { from: [at, a], to: [at, b] }
                } else {
                    Wall { from: [a, at], to: [b, at] }
                };
                walls.push(wall);
            }
        }
        let arena = Arena {
            kind: if walls.is_empty() {
                ArenaKind::Square
            } else {
                ArenaKind::MultiRoom
            },
            side,
            walls,
            seed: Some(seed),
        };
        if arena.is_connected(0.25) {
            return arena;
        }
    }
    unreachable!("a single wall with a door always leaves the arena connected")
}
