//! Workload generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use guide_core::scene::{Cell, Vec3, WalkGrid};

/// Square grid with roughly `density` of its cells blocked, start and goal corners kept open.
pub fn random_grid(side: u32, density: f64, seed: u64) -> WalkGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = side as i32 - 1;
    let blocked: Vec<Cell> = (0..side as i32)
        .flat_map(|row| (0..side as i32).map(move |col| Cell::new(col, row)))
        .filter(|c| *c != Cell::new(0, 0) && *c != Cell::new(last, last))
        .filter(|_| rng.random_bool(density))
        .collect();
    WalkGrid::new(Vec3::new(0.0, 0.0, 0.0), 1.0, side, side, blocked).expect("valid grid")
}

/// World-space centers of the two opposite corner cells.
pub fn corners(grid: &WalkGrid) -> (Vec3, Vec3) {
    let far = grid.width as f64 - 0.5;
    (Vec3::new(0.5, 0.0, 0.5), Vec3::new(far, 0.0, far))
}
