//! Brickwork Trotter circuits for the kicked Ising and Heisenberg chains.
//!
//! Bonds are 0-based: bond `b` couples sites `b` and `b + 1`. Each Trotter
//! step is an odd layer (bonds 0, 2, 4, …) followed by an even layer
//! (bonds 1, 3, 5, …), so one step applies `U_even · U_odd`.
//!
//! For the kicked Ising chain one step is one Floquet period,
//! `U_F = exp(-iπ/4 Σ σˣ) · exp(-i(J Σ σᶻσᶻ + h Σ σᶻ))`. The diagonal part is
//! distributed over the gates of the period: each bond gate carries its
//! `J σᶻσᶻ` term and every site's `h σᶻ` term is split evenly among the gates
//! touching that site (full weight for a site touched once). Each site's kick
//! rides on the last gate touching it within the period, applied after that
//! gate's diagonal part. All diagonal factors commute, so the product of the
//! two layers is exactly `U_F`.

use num_complex::Complex64 as C64;

use crate::{
    error::{Error, Result},
    operators::{Axis, Gate2, Op1},
};

/// Which Hamiltonian the circuit Trotterizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// `H(τ) = J Σ σᶻσᶻ + h Σ σᶻ + (π/4) Σ_n δ(τ - n) Σ σˣ`.
    KickedIsing { j: f64, h: f64 },
    /// `H = Σ S_ℓ · S_{ℓ+1}`.
    Heisenberg,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub model: Model,
    pub n_sites: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl ModelParams {
    pub fn kicked_ising(n_sites: usize, j: f64, h: f64, t_final: f64) -> Self {
        Self { model: Model::KickedIsing { j, h }, n_sites, dt: 1.0, t_final }
    }

    pub fn heisenberg(n_sites: usize, dt: f64, t_final: f64) -> Self {
        Self { model: Model::Heisenberg, n_sites, dt, t_final }
    }

    /// Validates the parameters and returns the number of Trotter steps.
    pub fn steps(&self) -> Result<usize> {
        if self.n_sites < 2 {
            return Err(Error::Contract(format!("a circuit needs at least 2 sites, got {}", self.n_sites)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Contract(format!("time step must be positive, got {}", self.dt)));
        }
        if matches!(self.model, Model::KickedIsing { .. }) && self.dt != 1.0 {
            return Err(Error::Contract(format!("kicked Ising uses one period per step (dt = 1), got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Contract(format!("final time must be non-negative, got {}", self.t_final)));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-12 * self.t_final.max(1.0) {
            return Err(Error::Contract(format!(
                "final time {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    /// First bond of a layer with this parity.
    pub fn first_bond(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }

    /// Bonds of a layer of this parity on an `n`-site chain.
    pub fn bonds(self, n_sites: usize) -> impl Iterator<Item = usize> {
        (self.first_bond()..n_sites.saturating_sub(1)).step_by(2)
    }
}

/// Position of a gate in the space-time lattice (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateId {
    pub layer: usize,
    pub bond: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub parity: Parity,
    /// `(bond, gate)` sorted by bond.
    pub gates: Vec<(usize, Gate2)>,
}

/// The full gate lattice realizing evolution to the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkCircuit {
    n_sites: usize,
    dt: f64,
    steps: usize,
    layers: Vec<Layer>,
}

impl BrickworkCircuit {
    /// Assembles a circuit from explicit layers, checking the brickwork
    /// layout and gate unitarity.
    pub fn from_layers(n_sites: usize, dt: f64, layers: Vec<Layer>) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Contract("a circuit needs at least 2 sites".into()));
        }
        if !layers.len().is_multiple_of(2) {
            return Err(Error::Contract("a circuit has two layers per step".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            let expected = if k % 2 == 0 { Parity::Odd } else { Parity::Even };
            if layer.parity != expected {
                return Err(Error::Contract(format!("layer {k} has parity {:?}, expected {expected:?}", layer.parity)));
            }
            let bonds: Vec<usize> = layer.gates.iter().map(|g| g.0).collect();
            let allowed: Vec<usize> = expected.bonds(n_sites).collect();
            if bonds.windows(2).any(|w| w[0] >= w[1]) || bonds.iter().any(|b| !allowed.contains(b)) {
                return Err(Error::Contract(format!("layer {k} has bonds {bonds:?}, allowed {allowed:?}")));
            }
            for (b, g) in &layer.gates {
                let defect = g.unitarity_defect();
                if defect > 1e-12 {
                    return Err(Error::Contract(format!("gate ({k}, {b}) is not unitary (defect {defect:e})")));
                }
            }
        }
        Ok(Self { n_sites, dt, steps: layers.len() / 2, layers })
    }

    /// Same gate on every bond of every layer.
    pub fn uniform(n_sites: usize, dt: f64, steps: usize, gate: Gate2) -> Result<Self> {
        let layers = (0..2 * steps)
            .map(|k| {
                let parity = if k % 2 == 0 { Parity::Odd } else { Parity::Even };
                Layer { parity, gates: parity.bonds(n_sites).map(|b| (b, gate)).collect() }
            })
            .collect();
        Self::from_layers(n_sites, dt, layers)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }

    /// All gate identifiers in layer-major, bond-minor order.
    pub fn gate_ids(&self) -> Vec<GateId> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(layer, l)| l.gates.iter().map(move |(bond, _)| GateId { layer, bond: *bond }))
            .collect()
    }

    pub fn gate(&self, id: GateId) -> Option<&Gate2> {
        let layer = self.layers.get(id.layer)?;
        layer.gates.iter().find(|(b, _)| *b == id.bond).map(|(_, g)| g)
    }

    /// The first `steps` Trotter steps of this circuit.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps > self.steps {
            return Err(Error::Contract(format!("circuit has {} steps, asked for {steps}", self.steps)));
        }
        Ok(Self { n_sites: self.n_sites, dt: self.dt, steps, layers: self.layers[..2 * steps].to_vec() })
    }

    /// Copy with one gate swapped out, for fault-injection checks.
    pub fn with_gate_replaced(&self, id: GateId, gate: Gate2) -> Result<Self> {
        let mut layers = self.layers.clone();
        let slot = layers
            .get_mut(id.layer)
            .and_then(|l| l.gates.iter_mut().find(|(b, _)| *b == id.bond))
            .ok_or_else(|| Error::Contract(format!("no gate at {id:?}")))?;
        slot.1 = gate;
        Self::from_layers(self.n_sites, self.dt, layers)
    }
}

/// Heisenberg brickwork with gates `exp(-iΔτ S·S)`.
pub fn build_heisenberg(params: &ModelParams) -> Result<BrickworkCircuit> {
    if params.model != Model::Heisenberg {
        return Err(Error::Contract("build_heisenberg needs the Heisenberg model".into()));
    }
    let steps = params.steps()?;
    let gate = Gate2::exp_hermitian(&Gate2::heisenberg_bond(), params.dt)?;
    BrickworkCircuit::uniform(params.n_sites, params.dt, steps, gate)
}

/// The two layers of one kicked Ising period, indexed by parity.
pub fn kicked_ising_period(n_sites: usize, j: f64, h: f64) -> [Layer; 2] {
    let parities = [Parity::Odd, Parity::Even];
    let mut touches = vec![0usize; n_sites];
    let mut last_layer = vec![0usize; n_sites];
    for (k, p) in parities.iter().enumerate() {
        for b in p.bonds(n_sites) {
            for s in [b, b + 1] {
                touches[s] += 1;
                last_layer[s] = k;
            }
        }
    }
    let kick = Op1::pauli_rotation(Axis::X, std::f64::consts::FRAC_PI_4);
    parities.map(|parity| {
        let k = if parity == Parity::Odd { 0 } else { 1 };
        let gates = parity
            .bonds(n_sites)
            .map(|b| {
                let hl = h / touches[b] as f64;
                let hr = h / touches[b + 1] as f64;
                // σᶻ eigenvalues: index 0 ↦ +1, index 1 ↦ -1.
                let sign = |s: usize| if s == 0 { 1.0 } else { -1.0 };
                let phases = [0usize, 1, 2, 3].map(|idx| {
                    let (zl, zr) = (sign(idx >> 1), sign(idx & 1));
                    let angle = j * zl * zr + hl * zl + hr * zr;
                    C64::from_polar(1.0, -angle)
                });
                let kl = if last_layer[b] == k { kick } else { Op1::identity() };
                let kr = if last_layer[b + 1] == k { kick } else { Op1::identity() };
                (b, Gate2::kron(&kl, &kr) * Gate2::diagonal(phases))
            })
            .collect();
        Layer { parity, gates }
    })
}

/// Kicked Ising brickwork, one Floquet period per step.
pub fn build_kicked_ising(params: &ModelParams) -> Result<BrickworkCircuit> {
    let Model::KickedIsing { j, h } = params.model else {
        return Err(Error::Contract("build_kicked_ising needs the kicked Ising model".into()));
    };
    let steps = params.steps()?;
    let period = kicked_ising_period(params.n_sites, j, h);
    let layers = (0..steps).flat_map(|_| period.iter().cloned()).collect();
    BrickworkCircuit::from_layers(params.n_sites, params.dt, layers)
}

pub fn build(params: &ModelParams) -> Result<BrickworkCircuit> {
    match params.model {
        Model::Heisenberg => build_heisenberg(params),
        Model::KickedIsing { .. } => build_kicked_ising(params),
    }
}
