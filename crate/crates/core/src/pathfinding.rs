//! Grid A* under the octile metric, follow placements and motion along paths.
//!
//! Costs are kept as exact `straight + diagonal·√2` pairs so that optimality
//! comparisons never depend on floating-point summation order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::fmt;

use thiserror::Error;

use crate::persona::PlacementSpec;
use crate::scene::{Cell, Pose, Vec3, WalkGrid};

/// Distance within which a waypoint counts as reached.
pub const ARRIVAL_EPSILON: f64 = 1e-6;

/// Path length as `straight + diagonal * √2` cells, ordered exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub const ZERO: OctileCost = OctileCost { straight: 0, diagonal: 0 };
    pub const STRAIGHT: OctileCost = OctileCost { straight: 1, diagonal: 0 };
    pub const DIAGONAL: OctileCost = OctileCost { straight: 0, diagonal: 1 };

    /// Octile distance between two cells on an open grid.
    pub fn between(a: Cell, b: Cell) -> Self {
        let dx = a.col.abs_diff(b.col);
        let dy = a.row.abs_diff(b.row);
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        OctileCost { straight: hi - lo, diagonal: lo }
    }

    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

impl std::ops::Add for OctileCost {
    type Output = OctileCost;
    fn add(self, o: OctileCost) -> OctileCost {
        OctileCost { straight: self.straight + o.straight, diagonal: self.diagonal + o.diagonal }
    }
}

impl Ord for OctileCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of (a1 - a2) + (b1 - b2)·√2, decided in integers
        let x = self.straight as i64 - other.straight as i64;
        let y = self.diagonal as i64 - other.diagonal as i64;
        match (x.signum(), y.signum()) {
            (0, 0) => Ordering::Equal,
            (sx, sy) if sx >= 0 && sy >= 0 => Ordering::Greater,
            (sx, sy) if sx <= 0 && sy <= 0 => Ordering::Less,
            // opposite signs: compare x² against 2y²
            (1, _) => (x * x).cmp(&(2 * y * y)),
            _ => (2 * y * y).cmp(&(x * x)),
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for OctileCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.value())
    }
}

/// Cell-center waypoints from (exclusive) start to (inclusive) goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub start: Cell,
    pub cells: Vec<Cell>,
    pub waypoints: Vec<Vec3>,
    pub cost: OctileCost,
}

impl Path {
    /// Length in meters.
    pub fn length(&self, cell_size: f64) -> f64 {
        self.cost.value() * cell_size
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn goal(&self) -> Cell {
        self.cells.last().copied().unwrap_or(self.start)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("no walkable path from {from} to {to}")]
    Unreachable { from: Cell, to: Cell },
    #[error("endpoint {0} is blocked or outside the grid")]
    InvalidEndpoint(Cell),
}

const DIRECTIONS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Walkable 8-neighbours of `c`. A diagonal step needs both orthogonal
/// cells it passes between to be free.
pub fn neighbors(grid: &WalkGrid, c: Cell) -> impl Iterator<Item = (Cell, OctileCost)> + '_ {
    DIRECTIONS.iter().filter_map(move |&(dc, dr)| {
        let n = Cell::new(c.col + dc, c.row + dr);
        if !grid.is_walkable(n) {
            return None;
        }
        if dc != 0 && dr != 0 {
            let side_a = Cell::new(c.col + dc, c.row);
            let side_b = Cell::new(c.col, c.row + dr);
            if !grid.is_walkable(side_a) || !grid.is_walkable(side_b) {
                return None;
            }
            Some((n, OctileCost::DIAGONAL))
        } else {
            Some((n, OctileCost::STRAIGHT))
        }
    })
}

/// Cost-optimal path between the cells containing `start` and `goal`.
///
/// Among frontier nodes with equal f-cost the one with the lower
/// `(row, col)` is expanded first, which makes the returned path unique.
pub fn plan_path(grid: &WalkGrid, start: Vec3, goal: Vec3) -> Result<Path, PathError> {
    plan_cells(grid, grid.cell_of(start), grid.cell_of(goal))
}

pub fn plan_cells(grid: &WalkGrid, start: Cell, goal: Cell) -> Result<Path, PathError> {
    for c in [start, goal] {
        if !grid.is_walkable(c) {
            return Err(PathError::InvalidEndpoint(c));
        }
    }
    let width = grid.width as usize;
    let index = |c: Cell| c.row as usize * width + c.col as usize;
    let n = width * grid.height as usize;
    let mut best: Vec<Option<OctileCost>> = vec![None; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    best[index(start)] = Some(OctileCost::ZERO);
    open.push(Reverse((OctileCost::between(start, goal), start.row, start.col)));

    while let Some(Reverse((_, row, col))) = open.pop() {
        let cur = Cell::new(col, row);
        let ci = index(cur);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        let g = best[ci].expect("queued nodes have a cost");
        if cur == goal {
            return Ok(reconstruct(grid, &parent, index, start, goal, g));
        }
        for (next, step) in neighbors(grid, cur) {
            let ni = index(next);
            if closed[ni] {
                continue;
            }
            let tentative = g + step;
            if best[ni].is_none_or(|old| tentative < old) {
                best[ni] = Some(tentative);
                parent[ni] = Some(cur);
                let f = tentative + OctileCost::between(next, goal);
                open.push(Reverse((f, next.row, next.col)));
            }
        }
    }
    Err(PathError::Unreachable { from: start, to: goal })
}

fn reconstruct(
    grid: &WalkGrid,
    parent: &[Option<Cell>],
    index: impl Fn(Cell) -> usize,
    start: Cell,
    goal: Cell,
    cost: OctileCost,
) -> Path {
    let mut cells = Vec::new();
    let mut cur = goal;
    while cur != start {
        cells.push(cur);
        cur = parent[index(cur)].expect("every reached node but the start has a parent");
    }
    cells.reverse();
    let waypoints = cells.iter().map(|&c| grid.cell_center(c)).collect();
    Path { start, cells, waypoints, cost }
}

/// Checks the structural invariants of a path: 8-neighbour steps, no blocked
/// cells, no corner cutting and a cost equal to the summed steps.
pub fn validate_path(grid: &WalkGrid, path: &Path) -> Result<(), String> {
    let mut prev = path.start;
    let mut total = OctileCost::ZERO;
    for (i, &c) in path.cells.iter().enumerate() {
        if !grid.is_walkable(c) {
            return Err(format!("waypoint {i} at {c} is not walkable"));
        }
        match neighbors(grid, prev).find(|(n, _)| *n == c) {
            Some((_, step)) => total = total + step,
            None => return Err(format!("step {prev} -> {c} is not a legal move")),
        }
        if path.waypoints.get(i) != Some(&grid.cell_center(c)) {
            return Err(format!("waypoint {i} is not the center of {c}"));
        }
        prev = c;
    }
    if path.waypoints.len() != path.cells.len() {
        return Err("waypoint and cell counts differ".into());
    }
    if total != path.cost {
        return Err(format!("cost {} does not match summed steps {}", path.cost, total));
    }
    Ok(())
}

/// World position where a companion with `placement` should stand.
pub fn follow_anchor(user: &Pose, placement: &PlacementSpec) -> Vec3 {
    user.local_to_world(placement.offset.right, placement.offset.forward)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub pose: Pose,
    pub arrived: bool,
    pub distance_moved: f64,
}

/// Cursor over a waypoint chain, consumed as an avatar walks it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFollower {
    waypoints: Vec<Vec3>,
    next: usize,
}

impl PathFollower {
    pub fn new(path: &Path) -> Self {
        Self { waypoints: path.waypoints.clone(), next: 0 }
    }

    /// Walks to `lead_in` before the path proper. Used to first step onto the
    /// start cell's center so every segment stays on walkable cells.
    pub fn with_lead_in(lead_in: Vec3, path: &Path) -> Self {
        let mut waypoints = Vec::with_capacity(path.waypoints.len() + 1);
        waypoints.push(lead_in);
        waypoints.extend_from_slice(&path.waypoints);
        Self { waypoints, next: 0 }
    }

    pub fn is_finished(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    pub fn remaining_waypoints(&self) -> &[Vec3] {
        &self.waypoints[self.next.min(self.waypoints.len())..]
    }

    pub fn destination(&self) -> Option<Vec3> {
        self.waypoints.last().copied()
    }

    /// Distance left to walk from `from` through the remaining waypoints.
    pub fn remaining_distance(&self, from: Vec3) -> f64 {
        let mut total = 0.0;
        let mut at = from;
        for &w in self.remaining_waypoints() {
            total += at.distance(w);
            at = w;
        }
        total
    }

    /// Moves at most `speed * dt` along the remaining chain, facing the
    /// direction of travel.
    pub fn advance(&mut self, pose: Pose, speed: f64, dt: f64) -> Advance {
        let mut budget = speed * dt;
        let mut pos = pose.position;
        let mut yaw = pose.yaw;
        let mut moved = 0.0;
        while let Some(&target) = self.waypoints.get(self.next) {
            let d = pos.distance(target);
            if let Some(y) = Pose::yaw_towards(pos, target) {
                yaw = y;
            }
            if d <= budget + ARRIVAL_EPSILON {
                moved += d;
                budget = (budget - d).max(0.0);
                pos = target;
                self.next += 1;
                continue;
            }
            let dir = target.sub(pos).scale(1.0 / d);
            pos = pos.add(dir.scale(budget));
            moved += budget;
            break;
        }
        Advance { pose: Pose::new(pos, yaw), arrived: self.is_finished(), distance_moved: moved }
    }
}

/// One motion step along `path` from `pose`, without keeping a cursor.
pub fn advance(pose: Pose, path: &Path, speed: f64, dt: f64) -> Advance {
    PathFollower::new(path).advance(pose, speed, dt)
}

/// Moves straight toward `target` by at most `speed * dt`.
pub fn step_towards(pose: Pose, target: Vec3, speed: f64, dt: f64) -> Advance {
    let d = pose.position.distance(target);
    let budget = speed * dt;
    if d <= ARRIVAL_EPSILON {
        return Advance { pose, arrived: true, distance_moved: 0.0 };
    }
    let yaw = Pose::yaw_towards(pose.position, target).unwrap_or(pose.yaw);
    if d <= budget {
        return Advance { pose: Pose::new(target, yaw), arrived: true, distance_moved: d };
    }
    let dir = target.sub(pose.position).scale(1.0 / d);
    Advance {
        pose: Pose::new(pose.position.add(dir.scale(budget)), yaw),
        arrived: false,
        distance_moved: budget,
    }
}
