use super::{NetworkCase, NetworkError};
use crate::linalg::{CMatrix, ComplexValue};
use nalgebra::DMatrix;

/// Node class within the partitioned matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    G,
    F,
    N,
}

/// Full admittance matrix ordered `[G | F | N]`, loads excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedAdmittance {
    pub n_g: usize,
    pub n_f: usize,
    pub n_n: usize,
    pub matrix: CMatrix,
    /// Bus index of each `F` node.
    pub gfl_buses: Vec<usize>,
    /// Bus index of each `N` node.
    pub interior_buses: Vec<usize>,
    /// Matrix node index of each bus.
    pub bus_node: Vec<usize>,
}

impl PartitionedAdmittance {
    /// Wraps an arbitrary symmetric matrix whose buses are the `F` and `N`
    /// nodes in order (bus `k` is node `n_g + k`).
    pub fn from_matrix(matrix: CMatrix, n_g: usize, n_f: usize) -> Self {
        let n = matrix.nrows();
        assert!(matrix.is_square() && n >= n_g + n_f);
        let n_n = n - n_g - n_f;
        PartitionedAdmittance {
            n_g,
            n_f,
            n_n,
            matrix,
            gfl_buses: (0..n_f).collect(),
            interior_buses: (n_f..n_f + n_n).collect(),
            bus_node: (0..n_f + n_n).map(|b| n_g + b).collect(),
        }
    }

    fn range(&self, p: Part) -> std::ops::Range<usize> {
        match p {
            Part::G => 0..self.n_g,
            Part::F => self.n_g..self.n_g + self.n_f,
            Part::N => self.n_g + self.n_f..self.n_g + self.n_f + self.n_n,
        }
    }

    pub fn block(&self, row: Part, col: Part) -> CMatrix {
        let r = self.range(row);
        let c = self.range(col);
        self.matrix.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Loads mapped onto matrix nodes (zero on EMF nodes).
    pub fn node_loads(&self, loads: &[ComplexValue]) -> Vec<ComplexValue> {
        let mut out = vec![ComplexValue::new(0.0, 0.0); self.dim()];
        for (bus, &node) in self.bus_node.iter().enumerate() {
            if let Some(y) = loads.get(bus) {
                out[node] += *y;
            }
        }
        out
    }

    /// Full matrix with load admittances on the diagonal.
    pub fn with_loads(&self, loads: &[ComplexValue]) -> CMatrix {
        let mut m = self.matrix.clone();
        for (k, y) in self.node_loads(loads).into_iter().enumerate() {
            m[(k, k)] += y;
        }
        m
    }
}

/// Assembles the bus admittance matrix, adds one EMF node per SG behind its
/// reactance, and orders nodes `[G | F | N]`. Loads stay in the case.
pub fn build_partitioned_admittance(case: &NetworkCase) -> Result<PartitionedAdmittance, NetworkError> {
    case.validate()?;
    let n_g = case.sg_buses.len();
    let n_f = case.gfl_buses.len();
    let n_bus = case.bus_count;
    let mut bus_node = vec![usize::MAX; n_bus];
    for (k, &bus) in case.gfl_buses.iter().enumerate() {
        bus_node[bus] = n_g + k;
    }
    let mut interior_buses = Vec::with_capacity(n_bus - n_f);
    for (bus, slot) in bus_node.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = n_g + n_f + interior_buses.len();
            interior_buses.push(bus);
        }
    }
    let dim = n_g + n_bus;
    let mut y: CMatrix = DMatrix::zeros(dim, dim);
    let mut stamp = |a: usize, b: usize, adm: ComplexValue| {
        y[(a, a)] += adm;
        y[(b, b)] += adm;
        y[(a, b)] -= adm;
        y[(b, a)] -= adm;
    };
    for br in &case.branches {
        stamp(bus_node[br.from], bus_node[br.to], br.series_admittance);
    }
    for (k, sg) in case.sg_buses.iter().enumerate() {
        stamp(k, bus_node[sg.bus], ComplexValue::new(0.0, -1.0 / sg.reactance));
    }
    for br in &case.branches {
        let half = ComplexValue::new(0.0, 0.5 * br.charging_susceptance);
        y[(bus_node[br.from], bus_node[br.from])] += half;
        y[(bus_node[br.to], bus_node[br.to])] += half;
    }
    Ok(PartitionedAdmittance {
        n_g,
        n_f,
        n_n: interior_buses.len(),
        matrix: y,
        gfl_buses: case.gfl_buses.clone(),
        interior_buses,
        bus_node,
    })
}
