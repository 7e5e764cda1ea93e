//! Fixtures shared by the benchmarks.

use routelens::learn::{fit, ModelKind, ModelSpec, TrainedModel};
use routelens::model::{CustomerLayout, DemandLaw, DepotPosition};
use routelens::{GeneratorConfig, Instance};

/// A clustered instance with `n` customers and routes of about six.
pub fn instance(n: usize, seed: u64) -> Instance {
    GeneratorConfig {
        n_customers: n,
        depot_position: DepotPosition::Central,
        customer_layout: CustomerLayout::Mixed,
        demand_law: DemandLaw::UniformSmall,
        target_route_size: 6,
        seed,
    }
    .generate()
}

/// `n` rows of `d` features on a grid-like pseudo-random pattern, labelled
/// by a fixed linear rule.
pub fn dataset(n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let x: Vec<Vec<f64>> =
        (0..n).map(|i| (0..d).map(|j| ((i * 37 + j * 101) % 97) as f64 / 97.0).collect()).collect();
    let y = x.iter().map(|r| u8::from(r.iter().enumerate().map(|(j, v)| v * (j as f64 - d as f64 / 2.0)).sum::<f64>() > 0.0)).collect();
    (x, y)
}

pub fn model(kind: ModelKind, x: &[Vec<f64>], y: &[u8]) -> TrainedModel {
    fit(&ModelSpec::default_for(kind).with_seed(1), x, y).expect("bench model trains")
}
