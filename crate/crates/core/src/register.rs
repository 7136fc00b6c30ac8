//! Atom register and operator construction.
//!
//! A register is an ordered list of atoms: three-level qubit atoms
//! (|0>, |1>, |r> = levels 0, 1, 2) and two-level ancilla atoms
//! (|g>, |e> = levels 0, 1). Basis states are indexed with the leftmost atom
//! most significant. The distant-gate layout is C, A_1 .. A_nA, T; the chain
//! layout used by the nearest-neighbour baseline is all qubit atoms.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::operator::SpMat;
use crate::protocol::{Pulse, Transition};
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Qubit,
    Ancilla,
}

impl AtomKind {
    pub fn local_dim(self) -> usize {
        match self {
            AtomKind::Qubit => 3,
            AtomKind::Ancilla => 2,
        }
    }

    /// Level index that counts as a Rydberg excitation.
    pub fn rydberg_level(self) -> usize {
        match self {
            AtomKind::Qubit => 2,
            AtomKind::Ancilla => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Two qubit atoms bridged by a chain of ancillas.
    DistantGate { n_ancillas: usize },
    /// A chain of qubit atoms only (baseline circuits).
    QubitChain { length: usize },
}

impl Topology {
    pub fn atom_count(self) -> usize {
        match self {
            Topology::DistantGate { n_ancillas } => n_ancillas + 2,
            Topology::QubitChain { length } => length,
        }
    }
}

/// Symmetric pairwise blockade shifts, stored once per unordered pair.
#[derive(Debug, Clone, Default)]
pub struct CouplingMap {
    entries: Vec<(usize, usize, f64)>,
}

impl CouplingMap {
    pub fn empty() -> Self {
        CouplingMap::default()
    }

    pub fn new(entries: Vec<(usize, usize, f64)>) -> Self {
        CouplingMap { entries }
    }

    /// Nearest-neighbour chain couplings at a single strength.
    pub fn chain(topology: Topology, u: f64) -> Self {
        let n = topology.atom_count();
        CouplingMap {
            entries: (1..n).map(|i| (i - 1, i, u)).collect(),
        }
    }

    /// Chain couplings plus next-nearest-neighbour shifts.
    pub fn chain_with_next_nearest(topology: Topology, u: f64, u_nnn: f64) -> Self {
        let n = topology.atom_count();
        let mut entries: Vec<_> = (1..n).map(|i| (i - 1, i, u)).collect();
        entries.extend((2..n).map(|i| (i - 2, i, u_nnn)));
        CouplingMap { entries }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_strength(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, &(_, _, u)| m.max(u))
    }
}

/// Spontaneous decay rates in units of the Rabi frequency. Qubit atoms decay
/// from |r> into |0> and |1> at gamma0 and gamma1; ancillas decay from |e>
/// into |g> at gamma_a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma_a: f64,
}

impl DecayRates {
    pub fn zero() -> Self {
        DecayRates {
            gamma0: 0.0,
            gamma1: 0.0,
            gamma_a: 0.0,
        }
    }

    /// Equal split of a total qubit rate, with the same total on ancillas.
    pub fn uniform(gamma: f64) -> Self {
        DecayRates {
            gamma0: 0.5 * gamma,
            gamma1: 0.5 * gamma,
            gamma_a: gamma,
        }
    }

    pub fn gamma_q(&self) -> f64 {
        self.gamma0 + self.gamma1
    }

    pub fn is_zero(&self) -> bool {
        self.gamma0 == 0.0 && self.gamma1 == 0.0 && self.gamma_a == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma0 < 0.0 || self.gamma1 < 0.0 || self.gamma_a < 0.0 {
            return Err(Error::InvalidArgument("decay rates must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Register {
    topology: Topology,
    kinds: Vec<AtomKind>,
    couplings: CouplingMap,
}

/// Validates the layout and couplings and assembles a register.
pub fn build_register(topology: Topology, couplings: CouplingMap) -> Result<Register> {
    let kinds: Vec<AtomKind> = match topology {
        Topology::DistantGate { n_ancillas } => {
            if n_ancillas > 9 {
                return Err(Error::InvalidRegister(format!(
                    "ancilla chains longer than 9 are not supported (got {n_ancillas})"
                )));
            }
            let mut k = vec![AtomKind::Qubit];
            k.extend(std::iter::repeat(AtomKind::Ancilla).take(n_ancillas));
            k.push(AtomKind::Qubit);
            k
        }
        Topology::QubitChain { length } => {
            if length < 2 {
                return Err(Error::InvalidRegister(format!(
                    "qubit chain needs at least 2 atoms (got {length})"
                )));
            }
            vec![AtomKind::Qubit; length]
        }
    };
    let n = kinds.len();
    let mut seen = std::collections::HashSet::new();
    for &(i, j, u) in couplings.entries() {
        if i >= n || j >= n {
            return Err(Error::InvalidRegister(format!(
                "coupling ({i},{j}) references an atom outside the register of {n}"
            )));
        }
        if i == j {
            return Err(Error::InvalidRegister(format!("self-coupling on atom {i}")));
        }
        if u < 0.0 {
            return Err(Error::InvalidRegister(format!(
                "blockade shift for ({i},{j}) must be >= 0, got {u}"
            )));
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::InvalidRegister(format!(
                "duplicate coupling for pair ({},{})",
                key.0, key.1
            )));
        }
    }
    Ok(Register {
        topology,
        kinds,
        couplings,
    })
}

impl Register {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn atom_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, atom: usize) -> AtomKind {
        self.kinds[atom]
    }

    pub fn couplings(&self) -> &CouplingMap {
        &self.couplings
    }

    pub fn label(&self, atom: usize) -> String {
        match self.topology {
            Topology::DistantGate { n_ancillas } => {
                if atom == 0 {
                    "C".into()
                } else if atom == n_ancillas + 1 {
                    "T".into()
                } else {
                    format!("A{atom}")
                }
            }
            Topology::QubitChain { .. } => format!("q{atom}"),
        }
    }

    /// Total Hilbert-space dimension: 9 * 2^nA for the distant gate,
    /// 3^m for a chain of m qubits.
    pub fn dim(&self) -> usize {
        self.kinds.iter().map(|k| k.local_dim()).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let n = self.kinds.len();
        let mut s = vec![1usize; n];
        for i in (0..n - 1).rev() {
            s[i] = s[i + 1] * self.kinds[i + 1].local_dim();
        }
        s
    }

    /// Index of the atom playing the control role.
    pub fn control_atom(&self) -> usize {
        0
    }

    /// Index of the atom playing the target role.
    pub fn target_atom(&self) -> usize {
        self.atom_count() - 1
    }

    /// Full-space index of the coding state |c, t> with every other atom in
    /// its ground level.
    pub fn coding_index(&self, c: usize, t: usize) -> usize {
        let s = self.strides();
        c * s[self.control_atom()] + t * s[self.target_atom()]
    }

    /// Enumerated basis, optionally truncated to at most `max_excitation`
    /// simultaneous Rydberg excitations.
    pub fn space(&self, max_excitation: Option<u32>) -> StateSpace {
        StateSpace::build(self, max_excitation)
    }
}

/// Concrete basis for building operators: the full product basis or a
/// truncation of it by total Rydberg excitation number. Truncation keeps the
/// generator exactly trace preserving while shrinking the dimension for the
/// dense solver.
#[derive(Debug, Clone)]
pub struct StateSpace {
    atom_dims: Vec<usize>,
    ryd_levels: Vec<usize>,
    strides: Vec<usize>,
    full_dim: usize,
    kept: Vec<u32>,
    pos: Vec<i32>,
    excitation: Vec<u8>,
    v_diag: Vec<f64>,
    max_excitation: Option<u32>,
}

impl StateSpace {
    fn build(reg: &Register, max_excitation: Option<u32>) -> StateSpace {
        let n = reg.atom_count();
        let atom_dims: Vec<usize> = (0..n).map(|i| reg.kind(i).local_dim()).collect();
        let ryd_levels: Vec<usize> = (0..n).map(|i| reg.kind(i).rydberg_level()).collect();
        let strides = reg.strides();
        let full_dim = reg.dim();
        let mut kept = Vec::new();
        let mut pos = vec![-1i32; full_dim];
        let mut excitation = Vec::new();
        let mut v_diag = Vec::new();
        let entries = reg.couplings().entries();
        for f in 0..full_dim {
            let mut exc = 0u32;
            for a in 0..n {
                let lvl = (f / strides[a]) % atom_dims[a];
                if lvl == ryd_levels[a] {
                    exc += 1;
                }
            }
            if let Some(cap) = max_excitation {
                if exc > cap {
                    continue;
                }
            }
            let mut v = 0.0;
            for &(i, j, u) in entries {
                let li = (f / strides[i]) % atom_dims[i];
                let lj = (f / strides[j]) % atom_dims[j];
                if li == ryd_levels[i] && lj == ryd_levels[j] {
                    v += u;
                }
            }
            pos[f] = kept.len() as i32;
            kept.push(f as u32);
            excitation.push(exc as u8);
            v_diag.push(v);
        }
        StateSpace {
            atom_dims,
            ryd_levels,
            strides,
            full_dim,
            kept,
            pos,
            excitation,
            v_diag,
            max_excitation,
        }
    }

    pub fn dim(&self) -> usize {
        self.kept.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn atom_count(&self) -> usize {
        self.atom_dims.len()
    }

    pub fn atom_dim(&self, atom: usize) -> usize {
        self.atom_dims[atom]
    }

    pub fn rydberg_level(&self, atom: usize) -> usize {
        self.ryd_levels[atom]
    }

    pub fn max_excitation(&self) -> Option<u32> {
        self.max_excitation
    }

    /// Full-space index of a kept basis state.
    pub fn full_index(&self, k: usize) -> usize {
        self.kept[k] as usize
    }

    /// Kept position of a full-space index, if inside the truncation.
    pub fn position(&self, full: usize) -> Option<usize> {
        let p = self.pos[full];
        (p >= 0).then_some(p as usize)
    }

    pub fn level_of(&self, k: usize, atom: usize) -> usize {
        (self.kept[k] as usize / self.strides[atom]) % self.atom_dims[atom]
    }

    pub fn excitation(&self, k: usize) -> u32 {
        self.excitation[k] as u32
    }

    pub fn blockade_shift(&self, k: usize) -> f64 {
        self.v_diag[k]
    }

    pub fn max_blockade_shift(&self) -> f64 {
        self.v_diag.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Rydberg population weight of a state vector, restricted to basis
    /// states with at least `min_excitation` excitations.
    pub fn excited_weight(&self, psi: &[C64], min_excitation: u32) -> f64 {
        psi.iter()
            .enumerate()
            .filter(|(k, _)| self.excitation[*k] as u32 >= min_excitation)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    /// Embeds a single-atom operator, acting as identity on every other atom.
    pub fn embed(&self, local: &Array2<C64>, atom: usize) -> Result<SpMat> {
        let d = self.atom_dims[atom];
        if local.nrows() != d || local.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "local operator is {}x{}, atom {atom} has dimension {d}",
                local.nrows(),
                local.ncols()
            )));
        }
        let stride = self.strides[atom];
        let mut t = Vec::new();
        for (k, &f) in self.kept.iter().enumerate() {
            let f = f as usize;
            let l = (f / stride) % d;
            for l2 in 0..d {
                let v = local[[l2, l]];
                if v == crate::linalg::ZERO {
                    continue;
                }
                let f2 = (f as isize + (l2 as isize - l as isize) * stride as isize) as usize;
                if let Some(k2) = self.position(f2) {
                    t.push((k2, k, v));
                }
            }
        }
        Ok(SpMat::from_triplets(self.dim(), t))
    }

    /// Diagonal blockade interaction: sum over coupled pairs of
    /// U_ij P_i^ryd P_j^ryd.
    pub fn interaction(&self) -> SpMat {
        SpMat::diagonal(
            &self
                .v_diag
                .iter()
                .map(|&v| C64::new(v, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    /// Drive coupling (rabi/2)(|k><r| + h.c.) on one atom.
    pub fn drive(&self, pulse: &Pulse) -> Result<SpMat> {
        let (lo, hi) = self.transition_levels(pulse.atom, pulse.transition)?;
        let d = self.atom_dims[pulse.atom];
        let mut local = Array2::zeros((d, d));
        let half = C64::new(0.5 * pulse.rabi, 0.0);
        local[[lo, hi]] = half;
        local[[hi, lo]] = half;
        self.embed(&local, pulse.atom)
    }

    /// (ground, excited) level pair addressed by a transition on an atom.
    pub fn transition_levels(&self, atom: usize, tr: Transition) -> Result<(usize, usize)> {
        if atom >= self.atom_count() {
            return Err(Error::InvalidArgument(format!(
                "atom {atom} outside register of {}",
                self.atom_count()
            )));
        }
        let qubit = self.atom_dims[atom] == 3;
        match (tr, qubit) {
            (Transition::Q0R, true) => Ok((0, 2)),
            (Transition::Q1R, true) => Ok((1, 2)),
            (Transition::GE, false) => Ok((0, 1)),
            (t, _) => Err(Error::InvalidArgument(format!(
                "transition {t:?} does not address atom {atom}"
            ))),
        }
    }
}

/// Embeds a single-atom operator on the full (untruncated) register space.
pub fn embed_operator(local: &Array2<C64>, atom: usize, reg: &Register) -> Result<SpMat> {
    reg.space(None).embed(local, atom)
}

/// Blockade Hamiltonian on the full register space.
pub fn interaction_hamiltonian(reg: &Register) -> SpMat {
    reg.space(None).interaction()
}

/// Drive Hamiltonian of one pulse on the full register space.
pub fn drive_hamiltonian(pulse: &Pulse, reg: &Register) -> Result<SpMat> {
    reg.space(None).drive(pulse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, max_abs_diff, ONE, ZERO};
    use ndarray::array;

    fn distant(n_a: usize, u: f64) -> Register {
        let topo = Topology::DistantGate { n_ancillas: n_a };
        build_register(topo, CouplingMap::chain(topo, u)).unwrap()
    }

    #[test]
    fn dimension_bookkeeping() {
        for n_a in 0..=9 {
            assert_eq!(distant(n_a, 1.0).dim(), 9 * (1 << n_a));
        }
        for m in 2..=6 {
            let topo = Topology::QubitChain { length: m };
            let reg = build_register(topo, CouplingMap::chain(topo, 1.0)).unwrap();
            assert_eq!(reg.dim(), 3usize.pow(m as u32));
        }
    }

    #[test]
    fn rejects_bad_registers() {
        let topo = Topology::QubitChain { length: 1 };
        assert!(build_register(topo, CouplingMap::empty()).is_err());
        let topo = Topology::DistantGate { n_ancillas: 1 };
        assert!(build_register(topo, CouplingMap::new(vec![(0, 7, 1.0)])).is_err());
        assert!(build_register(topo, CouplingMap::new(vec![(0, 1, -2.0)])).is_err());
        assert!(build_register(topo, CouplingMap::new(vec![(0, 0, 1.0)])).is_err());
        assert!(
            build_register(topo, CouplingMap::new(vec![(0, 1, 1.0), (1, 0, 1.0)])).is_err(),
            "duplicate pair must be rejected"
        );
    }

    #[test]
    fn chain_and_next_nearest_counts() {
        let topo = Topology::DistantGate { n_ancillas: 2 };
        assert_eq!(CouplingMap::chain(topo, 200.0).len(), 3);
        let nnn = CouplingMap::chain_with_next_nearest(topo, 200.0, 25.0);
        assert_eq!(nnn.len(), 5);
        let far: Vec<_> = nnn
            .entries()
            .iter()
            .filter(|&&(i, j, _)| j - i == 2)
            .collect();
        assert_eq!(far.len(), 2);
        assert!(far.iter().all(|&&(_, _, u)| u == 25.0));
    }

    #[test]
    fn embedded_projector_trace() {
        // |e><e| on the ancilla of the one-ancilla register: 3 * 3 states
        let reg = distant(1, 200.0);
        let proj = array![[ZERO, ZERO], [ZERO, ONE]];
        let op = embed_operator(&proj, 1, &reg).unwrap();
        let d = op.to_dense();
        let trace: C64 = (0..reg.dim()).map(|i| d[[i, i]]).sum();
        assert!((trace - C64::new(9.0, 0.0)).norm() < 1e-14);
        // enumeration oracle: count basis states with that ancilla excited
        let space = reg.space(None);
        let count = (0..space.dim())
            .filter(|&k| space.level_of(k, 1) == 1)
            .count();
        assert_eq!(count, 9);
    }

    #[test]
    fn embedding_against_kron_oracle() {
        // register C, A1, T: embed on the middle atom and compare with an
        // explicit kron product 1_3 x op x 1_3
        let reg = distant(1, 0.0);
        let op = array![[C64::new(0.3, 0.1), ONE], [ONE, C64::new(-0.2, 0.0)]];
        let emb = embed_operator(&op, 1, &reg).unwrap().to_dense();
        let id3 = crate::linalg::identity(3);
        let want = kron(&kron(&id3, &op), &id3);
        assert!(max_abs_diff(&emb, &want) < 1e-14);
    }

    #[test]
    fn embedding_is_multiplicative() {
        let reg = distant(1, 0.0);
        let a = array![[ZERO, ONE], [ZERO, ZERO]];
        let b = array![[ZERO, ZERO], [ONE, ZERO]];
        let ab = a.dot(&b);
        let lhs = embed_operator(&ab, 1, &reg).unwrap().to_dense();
        let rhs = embed_operator(&a, 1, &reg)
            .unwrap()
            .to_dense()
            .dot(&embed_operator(&b, 1, &reg).unwrap().to_dense());
        assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn interaction_no_ancilla_single_entry() {
        // C and T adjacent: only |r_C r_T> is shifted, index 2*3+2 = 8
        let reg = distant(0, 200.0);
        let h = interaction_hamiltonian(&reg);
        assert_eq!(h.nnz(), 1);
        let d = h.to_dense();
        assert!((d[[8, 8]] - C64::new(200.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn interaction_matches_embedded_products() {
        let reg = distant(2, 7.0);
        let space = reg.space(None);
        let h = space.interaction().to_dense();
        // oracle: sum of embedded projector pairs
        let mut want = Array2::zeros((space.dim(), space.dim()));
        for &(i, j, u) in reg.couplings().entries() {
            let pi = {
                let d = space.atom_dim(i);
                let mut p = Array2::zeros((d, d));
                p[[space.rydberg_level(i), space.rydberg_level(i)]] = ONE;
                space.embed(&p, i).unwrap().to_dense()
            };
            let pj = {
                let d = space.atom_dim(j);
                let mut p = Array2::zeros((d, d));
                p[[space.rydberg_level(j), space.rydberg_level(j)]] = ONE;
                space.embed(&p, j).unwrap().to_dense()
            };
            want += &pi.dot(&pj).mapv(|z| z * C64::new(u, 0.0));
        }
        assert!(max_abs_diff(&h, &want) < 1e-12);
        assert!(space.interaction().is_hermitian(1e-12));
    }

    #[test]
    fn drive_hamiltonian_shape_and_hermiticity() {
        let reg = distant(1, 200.0);
        let p = Pulse {
            atom: 0,
            transition: Transition::Q1R,
            area: std::f64::consts::PI,
            rabi: 1.0,
        };
        let h = drive_hamiltonian(&p, &reg).unwrap();
        assert!(h.is_hermitian(1e-12));
        // couples 12 basis-state pairs (ancilla x target = 6 configs, 2 dirs)
        assert_eq!(h.nnz(), 12);
        assert!((h.max_abs() - 0.5).abs() < 1e-14);

        let bad = Pulse {
            atom: 1,
            transition: Transition::Q0R,
            area: 1.0,
            rabi: 1.0,
        };
        assert!(drive_hamiltonian(&bad, &reg).is_err());
        let bad2 = Pulse {
            atom: 0,
            transition: Transition::GE,
            area: 1.0,
            rabi: 1.0,
        };
        assert!(drive_hamiltonian(&bad2, &reg).is_err());
    }

    #[test]
    fn zero_rabi_gives_zero_drive() {
        let reg = distant(0, 1.0);
        let p = Pulse {
            atom: 0,
            transition: Transition::Q0R,
            area: 0.0,
            rabi: 0.0,
        };
        let h = drive_hamiltonian(&p, &reg).unwrap();
        assert_eq!(h.nnz(), 0);
    }

    #[test]
    fn empty_couplings_zero_interaction() {
        let topo = Topology::DistantGate { n_ancillas: 2 };
        let reg = build_register(topo, CouplingMap::empty()).unwrap();
        assert_eq!(interaction_hamiltonian(&reg).nnz(), 0);
    }

    #[test]
    fn truncated_space_counts() {
        let reg = distant(2, 200.0);
        let space = reg.space(Some(1));
        // 4 ground states + 2 qubit-excited x1 + 2 ancilla choices x 4
        assert_eq!(space.dim(), 16);
        let space2 = reg.space(Some(2));
        assert_eq!(space2.dim(), 29);
        let full = reg.space(None);
        assert_eq!(full.dim(), 36);
        // positions invert full indices
        for k in 0..space.dim() {
            assert_eq!(space.position(space.full_index(k)), Some(k));
        }
    }

    #[test]
    fn coding_index_round_trip() {
        let reg = distant(2, 1.0);
        let s = reg.strides();
        assert_eq!(reg.coding_index(0, 0), 0);
        assert_eq!(reg.coding_index(1, 0), s[0]);
        assert_eq!(reg.coding_index(0, 1), 1);
        assert_eq!(reg.coding_index(1, 1), s[0] + 1);
        let space = reg.space(None);
        let k = space.position(reg.coding_index(1, 1)).unwrap();
        assert_eq!(space.level_of(k, 0), 1);
        assert_eq!(space.level_of(k, 1), 0);
        assert_eq!(space.level_of(k, 2), 0);
        assert_eq!(space.level_of(k, 3), 1);
    }

    #[test]
    fn labels() {
        let reg = distant(2, 1.0);
        assert_eq!(reg.label(0), "C");
        assert_eq!(reg.label(1), "A1");
        assert_eq!(reg.label(2), "A2");
        assert_eq!(reg.label(3), "T");
    }
}
