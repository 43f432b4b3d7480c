//! Network graph of the hybrid grid: bus/line data, AC and DC Laplacians,
//! DC subnetwork discovery, Kron reduction and the rotor–stator
//! elimination used by the damper-winding model.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::buslib::{BusId, BusModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub model: BusModel,
    /// Nominal load at the bus (p.u.); the small-signal model is linearized
    /// around it and does not otherwise use it.
    pub p_load: f64,
}

impl Bus {
    pub fn new(model: BusModel) -> Self {
        Bus { model, p_load: 0.0 }
    }

    pub fn id(&self) -> BusId {
        self.model.id()
    }
}

/// AC line with positive susceptance `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcLine {
    pub from: BusId,
    pub to: BusId,
    pub b: f64,
}

/// DC line with nonnegative conductance `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcLine {
    pub from: BusId,
    pub to: BusId,
    pub g: f64,
}

/// Load step of `magnitude` p.u. applied at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub bus: BusId,
    pub magnitude: f64,
    pub time: f64,
}

/// Kron-reduced hybrid network: every bus hosts a machine or a converter.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    /// Rate at which AC angles advance per unit of frequency deviation:
    /// 1 when frequencies are in rad/s, `2π f_base` when they are in p.u.
    pub angle_rate: f64,
    /// Hz per unit of frequency deviation, used for reporting.
    pub hz_per_unit: f64,
    pub buses: Vec<Bus>,
    pub ac_lines: Vec<AcLine>,
    pub dc_lines: Vec<DcLine>,
    pub disturbances: Vec<Disturbance>,
}

impl NetworkCase {
    /// Validated case with buses sorted by id. Frequencies default to rad/s.
    pub fn new(
        name: impl Into<String>,
        mut buses: Vec<Bus>,
        ac_lines: Vec<AcLine>,
        dc_lines: Vec<DcLine>,
        disturbances: Vec<Disturbance>,
    ) -> Result<Self> {
        buses.sort_by_key(|b| b.id());
        let case = NetworkCase {
            name: name.into(),
            angle_rate: 1.0,
            hz_per_unit: 1.0 / (2.0 * std::f64::consts::PI),
            buses,
            ac_lines,
            dc_lines,
            disturbances,
        };
        case.validate()?;
        Ok(case)
    }

    /// Express frequencies in per unit of `f_base` Hz.
    pub fn with_per_unit_frequency(mut self, f_base: f64) -> Self {
        self.angle_rate = 2.0 * std::f64::consts::PI * f_base;
        self.hz_per_unit = f_base;
        self
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id()).ok()
    }

    pub fn bus_ids(&self) -> Vec<BusId> {
        self.buses.iter().map(Bus::id).collect()
    }

    pub fn models(&self) -> Vec<&BusModel> {
        self.buses.iter().map(|b| &b.model).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::InvalidNetwork("no buses".into()));
        }
        for w in self.buses.windows(2) {
            if w[0].id() == w[1].id() {
                return Err(Error::InvalidNetwork(format!("duplicate bus id {}", w[0].id())));
            }
        }
        let lookup = |id: BusId| {
            self.index_of(id)
                .ok_or_else(|| Error::InvalidNetwork(format!("line references unknown bus {id}")))
        };
        for l in &self.ac_lines {
            lookup(l.from)?;
            lookup(l.to)?;
            if l.from == l.to {
                return Err(Error::InvalidNetwork(format!("self-loop at bus {}", l.from)));
            }
            if !(l.b > 0.0) || !l.b.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "ac line {}-{} susceptance {} must be positive",
                    l.from, l.to, l.b
                )));
            }
        }
        for l in &self.dc_lines {
            let (i, j) = (lookup(l.from)?, lookup(l.to)?);
            if l.from == l.to {
                return Err(Error::InvalidNetwork(format!("self-loop at bus {}", l.from)));
            }
            if !(l.g >= 0.0) || !l.g.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "dc line {}-{} conductance {} must be nonnegative",
                    l.from, l.to, l.g
                )));
            }
            for k in [i, j] {
                if !self.buses[k].model.is_converter() {
                    return Err(Error::DcLineOnMachine {
                        from: l.from,
                        to: l.to,
                        bus: self.buses[k].id(),
                    });
                }
            }
        }
        for d in &self.disturbances {
            if self.index_of(d.bus).is_none() {
                return Err(Error::InvalidNetwork(format!(
                    "disturbance references unknown bus {}",
                    d.bus
                )));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.buses.len();
        let mut uf = UnionFind::new(n);
        for l in &self.ac_lines {
            uf.union(self.index_of(l.from).unwrap(), self.index_of(l.to).unwrap());
        }
        for l in self.dc_lines.iter().filter(|l| l.g > 0.0) {
            uf.union(self.index_of(l.from).unwrap(), self.index_of(l.to).unwrap());
        }
        let root = uf.find(0);
        match (1..n).find(|&i| uf.find(i) != root) {
            Some(i) => Err(Error::Disconnected(self.buses[i].id())),
            None => Ok(()),
        }
    }

    /// Disturbance vector (p.u.) active at time `t`, in bus order.
    pub fn disturbance_at(&self, t: f64) -> Vec<f64> {
        let mut d = vec![0.0; self.buses.len()];
        for dist in &self.disturbances {
            if t >= dist.time {
                d[self.index_of(dist.bus).unwrap()] += dist.magnitude;
            }
        }
        d
    }
}

/// Connected component of the DC graph with at least two buses.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSubnetwork {
    /// Bus indices (into the case's bus order), ascending.
    pub buses: Vec<usize>,
    pub bus_ids: Vec<BusId>,
    /// Laplacian of this component embedded in the full `n × n` space.
    pub laplacian: DMatrix<f64>,
    /// Smallest nonzero eigenvalue of the component Laplacian.
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSet {
    pub l_ac: DMatrix<f64>,
    pub l_dc: DMatrix<f64>,
    pub subnetworks: Vec<DcSubnetwork>,
    /// Smallest nonzero eigenvalue of `l_ac`; `None` without AC lines.
    pub lambda_ac_min: Option<f64>,
    pub lambda_ac_max: f64,
    pub lambda_dc_max: f64,
}

impl LaplacianSet {
    pub fn n(&self) -> usize {
        self.l_ac.nrows()
    }

    /// Subnetwork index per bus, `None` for buses outside any DC subnetwork.
    pub fn membership(&self) -> Vec<Option<usize>> {
        let mut m = vec![None; self.n()];
        for (j, sub) in self.subnetworks.iter().enumerate() {
            for &i in &sub.buses {
                m[i] = Some(j);
            }
        }
        m
    }
}

fn laplacian_from_edges(n: usize, edges: impl Iterator<Item = (usize, usize, f64)>) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for (i, j, w) in edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn zero_tol(ev: &[f64]) -> f64 {
    1e-9 * ev.last().copied().unwrap_or(0.0).abs().max(1.0)
}

/// Assemble AC/DC Laplacians over all buses, discover DC subnetworks and
/// cache the eigenvalue extremes used by the stability conditions.
pub fn build_laplacians(case: &NetworkCase) -> Result<LaplacianSet> {
    case.validate()?;
    let n = case.len();
    let idx = |id| case.index_of(id).unwrap();
    let l_ac = laplacian_from_edges(n, case.ac_lines.iter().map(|l| (idx(l.from), idx(l.to), l.b)));
    let dc_edges: Vec<(usize, usize, f64)> = case
        .dc_lines
        .iter()
        .filter(|l| l.g > 0.0)
        .map(|l| (idx(l.from), idx(l.to), l.g))
        .collect();
    let l_dc = laplacian_from_edges(n, dc_edges.iter().copied());

    let mut uf = UnionFind::new(n);
    for &(i, j, _) in &dc_edges {
        uf.union(i, j);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j, _) in &dc_edges {
        for k in [i, j] {
            let members = groups.entry(uf.find(k)).or_default();
            if !members.contains(&k) {
                members.push(k);
            }
        }
    }
    let mut subnetworks: Vec<DcSubnetwork> = groups
        .into_values()
        .map(|mut buses| {
            buses.sort_unstable();
            let laplacian = laplacian_from_edges(
                n,
                dc_edges
                    .iter()
                    .copied()
                    .filter(|(i, _, _)| buses.binary_search(i).is_ok()),
            );
            let local = DMatrix::from_fn(buses.len(), buses.len(), |a, b| laplacian[(buses[a], buses[b])]);
            let ev = sym_eigenvalues(&local);
            let lambda_min = ev.get(1).copied().unwrap_or(0.0);
            DcSubnetwork {
                bus_ids: buses.iter().map(|&i| case.buses[i].id()).collect(),
                buses,
                laplacian,
                lambda_min,
            }
        })
        .collect();
    subnetworks.sort_by_key(|s| s.buses[0]);

    let ev_ac = sym_eigenvalues(&l_ac);
    let tol = zero_tol(&ev_ac);
    let lambda_ac_min = ev_ac.iter().copied().find(|&v| v > tol);
    let lambda_ac_max = ev_ac.last().copied().unwrap_or(0.0).max(0.0);
    let lambda_dc_max = sym_eigenvalues(&l_dc).last().copied().unwrap_or(0.0).max(0.0);

    Ok(LaplacianSet {
        l_ac,
        l_dc,
        subnetworks,
        lambda_ac_min,
        lambda_ac_max,
        lambda_dc_max,
    })
}

/// Schur-complement reduction onto a subset of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct KronReduction {
    pub keep: Vec<usize>,
    pub eliminate: Vec<usize>,
    /// `L_kk - L_ke L_ee⁻¹ L_ek`.
    pub reduced: DMatrix<f64>,
    /// `|keep| × n` map of full-network injections onto kept nodes: identity
    /// on kept columns, `-L_ke L_ee⁻¹` on eliminated ones.
    pub load_map: DMatrix<f64>,
}

/// Eliminate every node not in `keep`. `keep` is taken in the given order.
pub fn kron_reduce(l: &DMatrix<f64>, keep: &[usize]) -> Result<KronReduction> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::InvalidArgument("Kron reduction needs a square matrix".into()));
    }
    let mut seen = vec![false; n];
    for &k in keep {
        if k >= n || seen[k] {
            return Err(Error::InvalidArgument(format!("invalid or repeated keep index {k}")));
        }
        seen[k] = true;
    }
    let eliminate: Vec<usize> = (0..n).filter(|i| !seen[*i]).collect();
    let sub = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| l[(rows[a], cols[b])])
    };
    let l_kk = sub(keep, keep);
    let mut load_map = DMatrix::zeros(keep.len(), n);
    for (a, &k) in keep.iter().enumerate() {
        load_map[(a, k)] = 1.0;
    }
    if eliminate.is_empty() {
        return Ok(KronReduction {
            keep: keep.to_vec(),
            eliminate,
            reduced: l_kk,
            load_map,
        });
    }
    let l_ke = sub(keep, &eliminate);
    let l_ee = sub(&eliminate, &eliminate);
    let sv = l_ee.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax.max(1e-300)) {
        return Err(Error::SingularInterior);
    }
    let lu = l_ee.lu();
    // X = L_ee⁻¹ L_ek, M = -L_ke L_ee⁻¹ = -(L_ee⁻¹ L_ek)ᵀ for symmetric input
    let l_ek = sub(&eliminate, keep);
    let x = lu.solve(&l_ek).ok_or(Error::SingularInterior)?;
    let reduced = &l_kk - &l_ke * &x;
    let m = -(lu
        .solve(&l_ke.transpose())
        .ok_or(Error::SingularInterior)?
        .transpose());
    for (a, _) in keep.iter().enumerate() {
        for (b, &e) in eliminate.iter().enumerate() {
            load_map[(a, e)] = m[(a, b)];
        }
    }
    Ok(KronReduction {
        keep: keep.to_vec(),
        eliminate,
        reduced,
        load_map,
    })
}

/// Network Laplacian plus strictly positive diagonal shunts.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopyLaplacian {
    network: DMatrix<f64>,
    shunts: Vec<f64>,
}

impl LoopyLaplacian {
    pub fn new(network: DMatrix<f64>, shunts: Vec<f64>) -> Result<Self> {
        let n = network.nrows();
        if network.ncols() != n || shunts.len() != n {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        for i in 0..n {
            let row_sum: f64 = network.row(i).iter().sum();
            let scale = network.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            if row_sum.abs() > 1e-9 * scale {
                return Err(Error::InvalidArgument(format!("row {i} of the network part does not sum to zero")));
            }
            for j in 0..n {
                if i != j && network[(i, j)] > 0.0 {
                    return Err(Error::InvalidArgument(format!("positive off-diagonal at ({i}, {j})")));
                }
            }
            if !(shunts[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("shunt {i} must be positive")));
            }
        }
        Ok(LoopyLaplacian { network, shunts })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        &self.network + DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.shunts.clone()))
    }

    pub fn network(&self) -> &DMatrix<f64> {
        &self.network
    }

    pub fn shunts(&self) -> &[f64] {
        &self.shunts
    }
}

/// Elimination of stator buses behind the machine stator susceptances.
#[derive(Debug, Clone, PartialEq)]
pub struct StatorElimination {
    /// `L_s⁻¹ D_B`: nonnegative, row-stochastic map from rotor to stator angles.
    pub angle_map: DMatrix<f64>,
    /// `D_B - D_B L_s⁻¹ D_B`: Laplacian seen from the rotor buses.
    pub rotor_laplacian: DMatrix<f64>,
    /// `D_B L_s⁻¹`: map of stator-bus loads onto rotor buses.
    pub load_map: DMatrix<f64>,
}

/// Eliminate the stator buses of `b.len()` machines connected through
/// `stator_network` (a Laplacian over the stator buses).
pub fn stator_elimination(b: &[f64], stator_network: &DMatrix<f64>) -> Result<StatorElimination> {
    let loopy = LoopyLaplacian::new(stator_network.clone(), b.to_vec())?;
    let ls = loopy.matrix();
    let n = b.len();
    let sv = ls.clone().singular_values();
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::SingularStator);
    }
    let ls_inv = ls.try_inverse().ok_or(Error::SingularStator)?;
    let db = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b.to_vec()));
    let angle_map = &ls_inv * &db;
    let load_map = &db * &ls_inv;
    let rotor_laplacian = &db - &db * &angle_map;
    debug_assert_eq!(angle_map.nrows(), n);
    Ok(StatorElimination {
        angle_map,
        rotor_laplacian,
        load_map,
    })
}

/// Machine network seen from the rotor buses.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorReduction {
    /// Laplacian between rotor buses, in machine order.
    pub rotor_laplacian: DMatrix<f64>,
    /// `machines × buses` map of network-bus loads onto rotor buses.
    pub load_map: DMatrix<f64>,
    pub stator: StatorElimination,
}

/// Kron-reduce `network` (a Laplacian over all network buses) onto the
/// stator buses `stator[k]` of each machine, then eliminate the stators
/// behind susceptances `b[k]`.
pub fn reduce_to_rotors(network: &DMatrix<f64>, stator: &[usize], b: &[f64]) -> Result<RotorReduction> {
    if stator.len() != b.len() {
        return Err(Error::InvalidArgument("one stator susceptance per machine is required".into()));
    }
    let kron = kron_reduce(network, stator)?;
    let st = stator_elimination(b, &kron.reduced)?;
    Ok(RotorReduction {
        rotor_laplacian: st.rotor_laplacian.clone(),
        load_map: &st.load_map * &kron.load_map,
        stator: st,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
