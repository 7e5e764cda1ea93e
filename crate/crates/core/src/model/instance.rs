use std::collections::HashSet;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    /// Node id as written in the instance file.
    pub id: u32,
    pub point: Point,
    pub demand: u32,
}

/// A validated CVRP instance. Immutable once built; the distance matrix is
/// computed at construction under the instance's metric.
#[derive(Debug, Clone)]
pub struct Instance {
    id: String,
    depot_id: u32,
    depot: Point,
    customers: Vec<Customer>,
    capacity: u32,
    fleet_size: u32,
    fleet_declared: bool,
    rounded: bool,
    dist: Vec<f64>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        // the matrix is a pure function of the remaining fields
        self.id == other.id
            && self.depot_id == other.depot_id
            && self.depot == other.depot
            && self.customers == other.customers
            && self.capacity == other.capacity
            && self.fleet_size == other.fleet_size
            && self.rounded == other.rounded
    }
}

impl Instance {
    /// Builds and validates an instance. `fleet_size: None` falls back to
    /// `ceil(total demand / capacity)`.
    pub fn new(
        id: impl Into<String>,
        depot_id: u32,
        depot: Point,
        customers: Vec<Customer>,
        capacity: u32,
        fleet_size: Option<u32>,
        rounded: bool,
    ) -> Result<Self, ModelError> {
        if capacity == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        let mut seen = HashSet::with_capacity(customers.len() + 1);
        seen.insert(depot_id);
        for c in &customers {
            if !seen.insert(c.id) {
                return Err(ModelError::DuplicateId(c.id));
            }
            if c.demand == 0 {
                return Err(ModelError::ZeroDemand { id: c.id, demand: c.demand });
            }
            if c.demand > capacity {
                return Err(ModelError::DemandExceedsCapacity {
                    id: c.id,
                    demand: c.demand,
                    capacity,
                });
            }
        }
        let total: u64 = customers.iter().map(|c| c.demand as u64).sum();
        let min_fleet = total.div_ceil(capacity as u64).max(1) as u32;
        let fleet_declared = fleet_size.is_some();
        let fleet = fleet_size.unwrap_or(min_fleet);
        if (fleet as u64) * (capacity as u64) < total || fleet == 0 {
            return Err(ModelError::FleetTooSmall { fleet, demand: total, capacity });
        }

        let pts: Vec<Point> = std::iter::once(depot).chain(customers.iter().map(|c| c.point)).collect();
        let m = pts.len();
        let mut dist = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let mut d = pts[i].dist(pts[j]);
                if rounded {
                    d = (d + 0.5).floor();
                }
                dist[i * m + j] = d;
                dist[j * m + i] = d;
            }
        }
        Ok(Self {
            id: id.into(),
            depot_id,
            depot,
            customers,
            capacity,
            fleet_size: fleet,
            fleet_declared,
            rounded,
            dist,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn depot_id(&self) -> u32 {
        self.depot_id
    }

    pub fn depot(&self) -> Point {
        self.depot
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn fleet_size(&self) -> u32 {
        self.fleet_size
    }

    /// Whether the fleet size came from instance metadata.
    pub fn fleet_declared(&self) -> bool {
        self.fleet_declared
    }

    pub fn rounded(&self) -> bool {
        self.rounded
    }

    /// Point of internal node `i` (0 = depot).
    pub fn point(&self, i: usize) -> Point {
        if i == 0 {
            self.depot
        } else {
            self.customers[i - 1].point
        }
    }

    /// Demand of internal node `i`; the depot has demand 0.
    pub fn demand(&self, i: usize) -> u32 {
        if i == 0 {
            0
        } else {
            self.customers[i - 1].demand
        }
    }

    pub fn total_demand(&self) -> u64 {
        self.customers.iter().map(|c| c.demand as u64).sum()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * (self.customers.len() + 1) + j]
    }

    /// Same instance with every coordinate mapped through `f`.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Self, ModelError> {
        let customers = self
            .customers
            .iter()
            .map(|c| Customer { point: f(c.point), ..c.clone() })
            .collect();
        Self::new(
            self.id.clone(),
            self.depot_id,
            f(self.depot),
            customers,
            self.capacity,
            Some(self.fleet_size),
            self.rounded,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cust(id: u32, x: f64, y: f64, demand: u32) -> Customer {
        Customer { id, point: Point::new(x, y), demand }
    }

    #[test]
    fn three_four_five() {
        let inst = Instance::new(
            "t",
            1,
            Point::new(0.0, 0.0),
            vec![cust(2, 3.0, 4.0, 1), cust(3, 6.0, 8.0, 1), cust(4, 0.0, 5.0, 1)],
            10,
            None,
            false,
        )
        .unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.dist(0, 1), 5.0);
        assert_eq!(inst.dist(1, 0), 5.0);
        assert_eq!(inst.fleet_size(), 1);
    }

    #[test]
    fn rejects_invariant_violations() {
        let depot = Point::default();
        let e = Instance::new("t", 1, depot, vec![cust(2, 1.0, 1.0, 15)], 10, None, false).unwrap_err();
        assert!(e.to_string().contains("demand exceeds capacity"));
        let e = Instance::new("t", 1, depot, vec![cust(1, 1.0, 1.0, 1)], 10, None, false).unwrap_err();
        assert_eq!(e, ModelError::DuplicateId(1));
        let e = Instance::new("t", 1, depot, vec![cust(2, 1.0, 1.0, 8), cust(3, 0.0, 1.0, 8)], 10, Some(1), false)
            .unwrap_err();
        assert!(matches!(e, ModelError::FleetTooSmall { .. }));
    }

    #[test]
    fn rounded_metric() {
        let inst = Instance::new("t", 1, Point::default(), vec![cust(2, 1.0, 1.0, 1)], 10, None, true).unwrap();
        assert_eq!(inst.dist(0, 1), 1.0);
    }
}
