//! Global fitness functions.

use super::arena::Vec2;

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Connected components of the proximity graph (edge iff distance <= `r_max`).
pub fn cluster_count(positions: &[Vec2], r_max: f64) -> usize {
    let r2 = r_max * r_max;
    let mut uf = UnionFind::new(positions.len());
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx * dx + dy * dy <= r2 {
                uf.union(i, j);
            }
        }
    }
    uf.components()
}

/// Aggregation fitness `n / c`, in `[1, n]`.
pub fn fitness_aggregation(positions: &[Vec2], r_max: f64) -> f64 {
    let n = positions.len();
    if n == 0 {
        return 0.0;
    }
    n as f64 / cluster_count(positions, r_max) as f64
}
