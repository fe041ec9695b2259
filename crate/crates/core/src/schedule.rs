//! Light-cone ordering of a brickwork circuit.
//!
//! Sites are grouped into cells of two (`{0,1}, {2,3}, …`, with a trailing
//! single-site cell for odd chains). Cone `k` holds every gate in the causal
//! past of cell `k`'s final-time legs that no earlier cone already claimed.
//! Executing cones in order brings each cell to the final time just before
//! the next cone starts, which is what lets finished cells be measured and
//! disentangled while the rest of the chain is still being evolved.

use std::collections::BTreeSet;

use crate::{
    circuit::{BrickworkCircuit, GateId},
    error::{Error, Result},
    operators::Gate2,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledGate {
    pub id: GateId,
    pub gate: Gate2,
}

impl ScheduledGate {
    pub fn bond(&self) -> usize {
        self.id.bond
    }
}

/// Gates that finalize one cell, in layer-major then bond order.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    /// Sites of the cell, in measurement order.
    pub cell: Vec<usize>,
    pub gates: Vec<ScheduledGate>,
}

impl Cone {
    /// Number of distinct sites touched by this cone's gates.
    pub fn width(&self) -> usize {
        self.gates.iter().flat_map(|g| [g.id.bond, g.id.bond + 1]).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightConeSchedule {
    n_sites: usize,
    direction: Direction,
    cones: Vec<Cone>,
}

impl LightConeSchedule {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn cell_count(&self) -> usize {
        self.cones.len()
    }

    pub fn gate_count(&self) -> usize {
        self.cones.iter().map(|c| c.gates.len()).sum()
    }

    /// Width of cone `k` (0-based).
    pub fn cone_width(&self, k: usize) -> Result<usize> {
        self.cones
            .get(k)
            .map(Cone::width)
            .ok_or_else(|| Error::Contract(format!("cone {k} out of range ({} cones)", self.cones.len())))
    }

    /// Index of the cone whose cell contains `site`.
    pub fn cell_of(&self, site: usize) -> Option<usize> {
        self.cones.iter().position(|c| c.cell.contains(&site))
    }

    /// `[[ [layer, bond], … ], …]` with 1-based layers and bonds.
    pub fn to_json(&self) -> String {
        let cones: Vec<Vec<[usize; 2]>> = self
            .cones
            .iter()
            .map(|c| c.gates.iter().map(|g| [g.id.layer + 1, g.id.bond + 1]).collect())
            .collect();
        serde_json::to_string(&cones).expect("plain integer arrays always serialize")
    }
}

/// Cells `{0,1}, {2,3}, …` scanned left to right.
pub fn left_cells(n_sites: usize) -> Vec<Vec<usize>> {
    (0..n_sites).step_by(2).map(|s| (s..(s + 2).min(n_sites)).collect()).collect()
}

/// Cells `{n-2,n-1}, {n-4,n-3}, …` scanned right to left. Each cell lists
/// its sites right to left so the outermost site is measured first.
pub fn right_cells(n_sites: usize) -> Vec<Vec<usize>> {
    left_cells(n_sites)
        .into_iter()
        .map(|c| c.into_iter().map(|s| n_sites - 1 - s).collect())
        .collect()
}

/// Left-to-right schedule over two-site cells.
pub fn assign_cones(circuit: &BrickworkCircuit) -> LightConeSchedule {
    assign_cones_for_cells(circuit, left_cells(circuit.n_sites()), Direction::LeftToRight)
        .expect("left cells partition the chain")
}

/// Right-to-left mirror of [`assign_cones`].
pub fn assign_cones_mirrored(circuit: &BrickworkCircuit) -> LightConeSchedule {
    assign_cones_for_cells(circuit, right_cells(circuit.n_sites()), Direction::RightToLeft)
        .expect("right cells partition the chain")
}

/// Cones for an arbitrary sequence of cells that together partition the chain.
pub fn assign_cones_for_cells(circuit: &BrickworkCircuit, cells: Vec<Vec<usize>>, direction: Direction) -> Result<LightConeSchedule> {
    let n = circuit.n_sites();
    let mut seen = vec![false; n];
    for &s in cells.iter().flatten() {
        if s >= n || seen[s] {
            return Err(Error::Contract(format!("cells do not partition {n} sites (site {s})")));
        }
        seen[s] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::Contract(format!("cells do not cover all {n} sites")));
    }
    let mut claimed: BTreeSet<GateId> = BTreeSet::new();
    let mut cones = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut active = vec![false; n];
        cell.iter().for_each(|&s| active[s] = true);
        let mut past: BTreeSet<GateId> = BTreeSet::new();
        for (layer, l) in circuit.layers().iter().enumerate().rev() {
            for (bond, _) in &l.gates {
                if active[*bond] || active[bond + 1] {
                    past.insert(GateId { layer, bond: *bond });
                    active[*bond] = true;
                    active[bond + 1] = true;
                }
            }
        }
        let gates = past
            .difference(&claimed)
            .map(|&id| ScheduledGate { id, gate: *circuit.gate(id).expect("id taken from the circuit") })
            .collect();
        claimed.extend(past);
        cones.push(Cone { cell, gates });
    }
    Ok(LightConeSchedule { n_sites: n, direction, cones })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build, ModelParams};

    #[test]
    fn four_site_single_step() {
        let c = build(&ModelParams::heisenberg(4, 0.1, 0.1)).unwrap();
        let s = assign_cones(&c);
        let ids: Vec<(usize, usize)> = s.cones()[0].gates.iter().map(|g| (g.id.layer, g.id.bond)).collect();
        assert_eq!(ids, vec![(0, 0), (0, 2), (1, 1)]);
        assert!(s.cones()[1].gates.is_empty());
        assert_eq!(s.to_json(), "[[[1,1],[1,3],[2,2]],[]]");
    }

    #[test]
    fn depth_zero_has_empty_cones() {
        let c = build(&ModelParams::kicked_ising(6, 0.3, 0.2, 0.0)).unwrap();
        let s = assign_cones(&c);
        assert_eq!(s.cell_count(), 3);
        assert!(s.cones().iter().all(|c| c.gates.is_empty()));
        assert_eq!(s.cone_width(0).unwrap(), 0);
    }

    #[test]
    fn first_cone_width_matches_light_cone() {
        let c = build(&ModelParams::kicked_ising(12, 0.3, 0.2, 3.0)).unwrap();
        assert_eq!(assign_cones(&c).cone_width(0).unwrap(), 8);
    }

    #[test]
    fn odd_chain_has_single_site_tail() {
        let c = build(&ModelParams::heisenberg(5, 0.1, 0.2)).unwrap();
        let s = assign_cones(&c);
        assert_eq!(s.cones().last().unwrap().cell, vec![4]);
        let m = assign_cones_mirrored(&c);
        assert_eq!(m.cones()[0].cell, vec![4, 3]);
        assert_eq!(m.cones().last().unwrap().cell, vec![0]);
        assert_eq!(m.gate_count(), c.gate_count());
    }

    #[test]
    fn cells_must_partition() {
        let c = build(&ModelParams::heisenberg(4, 0.1, 0.1)).unwrap();
        assert!(assign_cones_for_cells(&c, vec![vec![0, 1], vec![1, 2, 3]], Direction::LeftToRight).is_err());
        assert!(assign_cones_for_cells(&c, vec![vec![0, 1]], Direction::LeftToRight).is_err());
        assert!(assign_cones(&c).cone_width(7).is_err());
    }
}
