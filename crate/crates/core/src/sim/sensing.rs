//! Onboard sensor models mapping the world to a local state index.

use std::f64::consts::TAU;

use super::arena::Vec2;

fn dist2(a: Vec2, b: Vec2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Task A: number of other robots within `r_max`, saturated at `m_max`.
pub fn sense_neighbors_count(robot: usize, positions: &[Vec2], r_max: f64, m_max: usize) -> usize {
    let r2 = r_max * r_max;
    let me = positions[robot];
    let count = positions
        .iter()
        .enumerate()
        .filter(|&(j, &p)| j != robot && dist2(me, p) <= r2)
        .count();
    count.min(m_max)
}

/// Body-frame sector (0 is centred on the heading, counter-clockwise) of a bearing.
pub fn sector_of(bearing: f64, heading: f64, sectors: usize) -> usize {
    let width = TAU / sectors as f64;
    let rel = (bearing - heading + width / 2.0).rem_euclid(TAU);
    ((rel / width) as usize).min(sectors - 1)
}

/// Tasks B1/B2: bit `j` set iff some neighbor within `r_max` lies in sector `j`.
pub fn sense_sectors(robot: usize, positions: &[Vec2], headings: &[f64], r_max: f64, sectors: usize) -> usize {
    let r2 = r_max * r_max;
    let me = positions[robot];
    let mut state = 0usize;
    for (j, &p) in positions.iter().enumerate() {
        if j == robot || dist2(me, p) > r2 {
            continue;
        }
        let bearing = (p[1] - me[1]).atan2(p[0] - me[0]);
        state |= 1 << sector_of(bearing, headings[robot], sectors);
    }
    state
}

/// Task C: food-difference bin of `arrival - departure`, saturated at `f_max`.
pub fn sense_nest_difference(food_at_arrival: f64, food_at_departure: f64, f_max: f64, n_bins: usize) -> usize {
    let diff = (food_at_arrival - food_at_departure).clamp(-f_max, f_max);
    let k = ((diff + f_max) * n_bins as f64 / (2.0 * f_max)).floor() as usize;
    k.min(n_bins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_robot_has_zero_neighbors() {
        let pos = [[0.0, 0.0], [5.0, 5.0]];
        assert_eq!(sense_neighbors_count(0, &pos, 2.0, 7), 0);
    }

    #[test]
    fn neighbor_count_saturates() {
        let mut pos = vec![[0.0, 0.0]];
        for k in 0..9 {
            let a = k as f64 * TAU / 9.0;
            pos.push([a.cos(), a.sin()]);
        }
        assert_eq!(sense_neighbors_count(0, &pos, 2.0, 7), 7);
    }

    #[test]
    fn sector_states() {
        let heading = [0.0; 5];
        let none = [[0.0, 0.0], [9.0, 9.0]];
        assert_eq!(sense_sectors(0, &none, &heading, 2.0, 4), 0);
        let all = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        assert_eq!(sense_sectors(0, &all, &heading, 2.0, 4), 15);
        // a neighbor straight ahead of a robot facing +y is in sector 0
        let rotated = [std::f64::consts::FRAC_PI_2, 0.0];
        assert_eq!(sense_sectors(0, &[[0.0, 0.0], [0.0, 1.0]], &rotated, 2.0, 4), 1);
    }

    #[test]
    fn food_difference_bins() {
        assert_eq!(sense_nest_difference(0.0, 5.0, 5.0, 30), 0);
        assert_eq!(sense_nest_difference(5.0, 0.0, 5.0, 30), 29);
        assert_eq!(sense_nest_difference(100.0, 0.0, 5.0, 30), 29);
        // zero difference: first bin whose lower edge is non-negative
        assert_eq!(sense_nest_difference(3.0, 3.0, 5.0, 30), 15);
    }
}
