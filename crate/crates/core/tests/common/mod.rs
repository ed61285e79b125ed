#![allow(dead_code)]

use std::sync::OnceLock;

use flatgen::feasibility::{min_feasible_scale, solve_scaled, ScanConfig, ScaleSearch};
use flatgen::maneuvers::{recipe, AEROBATIC};
use flatgen::{PiecewisePolynomialTrajectory, VehicleParams};

pub struct AtScale {
    pub name: String,
    pub search: ScaleSearch,
    pub traj: PiecewisePolynomialTrajectory,
}

pub fn nominal() -> VehicleParams {
    VehicleParams::nominal()
}

/// Every built-in aerobatic recipe at its smallest feasible time scale.
pub fn recipes_at_min_scale() -> &'static [AtScale] {
    static CACHE: OnceLock<Vec<AtScale>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let p = nominal();
        AEROBATIC
            .iter()
            .map(|&n| {
                let r = recipe(n).expect("built-in recipe");
                let search = min_feasible_scale(&r, &p, &ScanConfig::default())
                    .unwrap_or_else(|e| panic!("{}: {e}", r.name));
                let traj = solve_scaled(&r, &search.base, search.c_star).expect("solvable");
                AtScale { name: r.name, search, traj }
            })
            .collect()
    })
}

/// Relative error with an absolute floor of `floor`.
pub fn rel(err: f64, scale: f64, floor: f64) -> f64 {
    err / scale.abs().max(floor)
}
