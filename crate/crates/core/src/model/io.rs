//! TSPLIB-style CVRP instance files and CVRPLIB-style `.sol` files.
//!
//! Instance files use `EUC_2D` for the rounded Euclidean metric (the XML100
//! convention) and `EXACT_2D` for unrounded distances. A `VEHICLES` header,
//! or a `-k<N>` suffix in `NAME`, declares the fleet size.
//!
//! Solution files list one route per line as `Route #k: i j ...` where the
//! ids are 1-based customer positions (the depot is excluded), followed by
//! `Cost <value>`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{objective, Customer, Instance, Point, Solution, SolutionSource};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, {field}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, field: &str, message: impl Into<String>) -> Self {
        Self { line, field: field.to_string(), message: message.into() }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Demands,
    Depots,
    Done,
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, field: &str) -> Result<T, ParseError> {
    tok.parse::<T>()
        .map_err(|_| ParseError::new(line, field, format!("cannot parse '{tok}'")))
}

fn fleet_from_name(name: &str) -> Option<u32> {
    let idx = name.rfind("-k")?;
    let digits: String = name[idx + 2..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Parses a TSPLIB-style CVRP file into a validated [`Instance`].
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut name: Option<String> = None;
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<u32> = None;
    let mut vehicles: Option<u32> = None;
    let mut rounded = true;
    let mut coords: Vec<(u32, Point, usize)> = Vec::new();
    let mut coord_ids: HashMap<u32, usize> = HashMap::new();
    let mut demands: HashMap<u32, (u32, usize)> = HashMap::new();
    let mut depots: Vec<(u32, usize)> = Vec::new();
    let mut section = Section::Header;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let keyword = trimmed.split(|c: char| c == ':' || c.is_whitespace()).next().unwrap_or("");
        match keyword {
            "NODE_COORD_SECTION" => {
                section = Section::Coords;
                continue;
            }
            "DEMAND_SECTION" => {
                section = Section::Demands;
                continue;
            }
            "DEPOT_SECTION" => {
                section = Section::Depots;
                continue;
            }
            "EOF" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        if let Some((key, value)) = trimmed.split_once(':') {
            let key = key.trim();
            if key.chars().all(|c| c.is_ascii_uppercase() || c == '_') && !key.is_empty() {
                let value = value.trim();
                match key {
                    "NAME" => name = Some(value.to_string()),
                    "DIMENSION" => dimension = Some(parse_num(value, line, "DIMENSION")?),
                    "CAPACITY" => capacity = Some(parse_num(value, line, "CAPACITY")?),
                    "VEHICLES" => vehicles = Some(parse_num(value, line, "VEHICLES")?),
                    "TYPE" => {
                        if value != "CVRP" {
                            return Err(ParseError::new(line, "TYPE", format!("unsupported type '{value}'")));
                        }
                    }
                    "EDGE_WEIGHT_TYPE" => {
                        rounded = match value {
                            "EUC_2D" => true,
                            "EXACT_2D" => false,
                            other => {
                                return Err(ParseError::new(
                                    line,
                                    "EDGE_WEIGHT_TYPE",
                                    format!("unsupported metric '{other}'"),
                                ))
                            }
                        }
                    }
                    _ => {}
                }
                section = Section::Header;
                continue;
            }
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match section {
            Section::Header | Section::Done => {
                return Err(ParseError::new(line, "header", format!("unexpected line '{trimmed}'")));
            }
            Section::Coords => {
                if toks.len() != 3 {
                    return Err(ParseError::new(line, "NODE_COORD_SECTION", "expected 'id x y'"));
                }
                let id: u32 = parse_num(toks[0], line, "NODE_COORD_SECTION")?;
                let x: f64 = parse_num(toks[1], line, "NODE_COORD_SECTION")?;
                let y: f64 = parse_num(toks[2], line, "NODE_COORD_SECTION")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(ParseError::new(line, "NODE_COORD_SECTION", "non-finite coordinate"));
                }
                if coord_ids.insert(id, coords.len()).is_some() {
                    return Err(ParseError::new(line, "NODE_COORD_SECTION", format!("duplicate node id {id}")));
                }
                coords.push((id, Point::new(x, y), line));
            }
            Section::Demands => {
                if toks.len() != 2 {
                    return Err(ParseError::new(line, "DEMAND_SECTION", "expected 'id demand'"));
                }
                let id: u32 = parse_num(toks[0], line, "DEMAND_SECTION")?;
                let d: u32 = parse_num(toks[1], line, "DEMAND_SECTION")?;
                if let Some(q) = capacity {
                    if d > q {
                        return Err(ParseError::new(
                            line,
                            "DEMAND_SECTION",
                            format!("node {id}: demand exceeds capacity ({d} > {q})"),
                        ));
                    }
                }
                if demands.insert(id, (d, line)).is_some() {
                    return Err(ParseError::new(line, "DEMAND_SECTION", format!("duplicate node id {id}")));
                }
            }
            Section::Depots => {
                for tok in toks {
                    let id: i64 = parse_num(tok, line, "DEPOT_SECTION")?;
                    if id == -1 {
                        section = Section::Done;
                        break;
                    }
                    let id = u32::try_from(id)
                        .map_err(|_| ParseError::new(line, "DEPOT_SECTION", format!("invalid depot id {id}")))?;
                    depots.push((id, line));
                }
            }
        }
    }

    let end = last_line.max(1);
    let name = name.ok_or_else(|| ParseError::new(end, "NAME", "missing"))?;
    let capacity = capacity.ok_or_else(|| ParseError::new(end, "CAPACITY", "missing"))?;
    if capacity == 0 {
        return Err(ParseError::new(end, "CAPACITY", "must be positive"));
    }
    let (depot_id, depot_line) = match depots.as_slice() {
        [] => return Err(ParseError::new(end, "DEPOT_SECTION", "missing depot")),
        [one] => *one,
        [_, (_, l), ..] => return Err(ParseError::new(*l, "DEPOT_SECTION", "multiple depots are not supported")),
    };
    if let Some(dim) = dimension {
        if dim != coords.len() {
            return Err(ParseError::new(
                end,
                "DIMENSION",
                format!("declared {dim} nodes but found {}", coords.len()),
            ));
        }
    }
    let depot_idx = *coord_ids
        .get(&depot_id)
        .ok_or_else(|| ParseError::new(depot_line, "DEPOT_SECTION", format!("depot {depot_id} has no coordinates")))?;
    if let Some(&(d, l)) = demands.get(&depot_id) {
        if d != 0 {
            return Err(ParseError::new(l, "DEMAND_SECTION", "depot demand must be 0"));
        }
    }
    for (&id, &(_, l)) in &demands {
        if !coord_ids.contains_key(&id) {
            return Err(ParseError::new(l, "DEMAND_SECTION", format!("node {id} has no coordinates")));
        }
    }
    let mut customers = Vec::with_capacity(coords.len().saturating_sub(1));
    for &(id, point, line) in &coords {
        if id == depot_id {
            continue;
        }
        let (demand, dline) = *demands
            .get(&id)
            .ok_or_else(|| ParseError::new(line, "DEMAND_SECTION", format!("node {id} has no demand")))?;
        if demand == 0 {
            return Err(ParseError::new(dline, "DEMAND_SECTION", format!("node {id}: demand must be positive")));
        }
        customers.push(Customer { id, point, demand });
    }
    let fleet = vehicles.or_else(|| fleet_from_name(&name));
    Instance::new(name, depot_id, coords[depot_idx].1, customers, capacity, fleet, rounded)
        .map_err(|e| ParseError::new(end, "instance", e.to_string()))
}

/// Canonical TSPLIB text for `instance`; depot first, then customers in
/// internal order.
pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME : {}", instance.id());
    let _ = writeln!(out, "TYPE : CVRP");
    let _ = writeln!(out, "DIMENSION : {}", instance.n() + 1);
    let metric = if instance.rounded() { "EUC_2D" } else { "EXACT_2D" };
    let _ = writeln!(out, "EDGE_WEIGHT_TYPE : {metric}");
    let _ = writeln!(out, "CAPACITY : {}", instance.capacity());
    if instance.fleet_declared() {
        let _ = writeln!(out, "VEHICLES : {}", instance.fleet_size());
    }
    out.push_str("NODE_COORD_SECTION\n");
    let d = instance.depot();
    let _ = writeln!(out, "{} {} {}", instance.depot_id(), d.x, d.y);
    for c in instance.customers() {
        let _ = writeln!(out, "{} {} {}", c.id, c.point.x, c.point.y);
    }
    out.push_str("DEMAND_SECTION\n");
    let _ = writeln!(out, "{} 0", instance.depot_id());
    for c in instance.customers() {
        let _ = writeln!(out, "{} {}", c.id, c.demand);
    }
    out.push_str("DEPOT_SECTION\n");
    let _ = writeln!(out, " {}", instance.depot_id());
    out.push_str(" -1\nEOF\n");
    out
}

pub fn write_solution(solution: &Solution) -> String {
    let mut out = String::new();
    for (k, route) in solution.routes.iter().enumerate() {
        let _ = write!(out, "Route #{}:", k + 1);
        for c in route {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Cost {}", solution.objective);
    out
}

/// Parses a `.sol` file for `instance`. The objective is recomputed from the
/// routes; a stated `Cost` must agree with it to 1e-6 relative.
pub fn parse_solution(text: &str, instance: &Instance, source: SolutionSource) -> Result<Solution, ParseError> {
    let mut routes = Vec::new();
    let mut cost: Option<(f64, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Route") {
            let (_, ids) = rest
                .split_once(':')
                .ok_or_else(|| ParseError::new(line, "Route", "expected 'Route #k: ids'"))?;
            let route = ids
                .split_whitespace()
                .map(|t| parse_num::<usize>(t, line, "Route"))
                .collect::<Result<Vec<_>, _>>()?;
            if route.is_empty() {
                return Err(ParseError::new(line, "Route", "empty route"));
            }
            routes.push(route);
        } else if let Some(rest) = trimmed.strip_prefix("Cost") {
            cost = Some((parse_num(rest.trim(), line, "Cost")?, line));
        } else {
            return Err(ParseError::new(line, "solution", format!("unexpected line '{trimmed}'")));
        }
    }
    let recomputed = objective(instance, &routes).map_err(|e| ParseError::new(0, "Route", e.to_string()))?;
    if let Some((stated, line)) = cost {
        if (stated - recomputed).abs() > 1e-6 * recomputed.abs().max(1.0) {
            return Err(ParseError::new(
                line,
                "Cost",
                format!("stated cost {stated} differs from recomputed {recomputed}"),
            ));
        }
    }
    let sol = Solution {
        instance_id: instance.id().to_string(),
        routes,
        objective: recomputed,
        source,
        gap_percent: None,
    };
    sol.validate(instance).map_err(|e| ParseError::new(0, "solution", e.to_string()))?;
    Ok(sol)
}
