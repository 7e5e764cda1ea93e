#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routelens::model::{Customer, CustomerLayout, DemandLaw, DepotPosition, GeneratorConfig, Instance, Point};

pub const LAYOUTS: [CustomerLayout; 3] = [CustomerLayout::Uniform, CustomerLayout::Clustered, CustomerLayout::Mixed];
pub const DEPOTS: [DepotPosition; 3] = [DepotPosition::Central, DepotPosition::Corner, DepotPosition::Random];
pub const DEMANDS: [DemandLaw; 3] = [DemandLaw::Unit, DemandLaw::UniformSmall, DemandLaw::QuadrantSkewed];

/// Generator config whose axes and size are drawn from `seed`.
pub fn random_config(seed: u64, n_lo: usize, n_hi: usize) -> GeneratorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    GeneratorConfig {
        n_customers: rng.gen_range(n_lo..=n_hi),
        depot_position: DEPOTS[rng.gen_range(0..3)],
        customer_layout: LAYOUTS[rng.gen_range(0..3)],
        demand_law: DEMANDS[rng.gen_range(0..3)],
        target_route_size: rng.gen_range(2..=6),
        seed,
    }
}

/// Uniform random instance with demands in 1..=9 and a roomy fleet.
pub fn random_instance(seed: u64, n: usize, capacity: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let customers = (0..n)
        .map(|i| Customer {
            id: i as u32 + 2,
            point: Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)),
            demand: rng.gen_range(1..=9),
        })
        .collect();
    Instance::new(format!("rand-{seed}"), 1, Point::new(50.0, 50.0), customers, capacity, Some(n as u32), false)
        .expect("valid instance")
}
