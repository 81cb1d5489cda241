use super::{NetworkError, PartitionedAdmittance};
use crate::linalg::{asymmetry, mat_vec, max_abs, CMatrix, ComplexLu, ComplexValue};

/// Node-eliminated admittance: `[I_G; I_F] = Yt [E_G; U_F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAdmittance {
    pub yt_gg: CMatrix,
    pub yt_gf: CMatrix,
    pub yt_fg: CMatrix,
    pub yt_ff: CMatrix,
    /// Smallest pivot met while eliminating interior nodes.
    pub min_pivot: f64,
}

impl ReducedAdmittance {
    pub fn n_g(&self) -> usize {
        self.yt_gg.nrows()
    }

    pub fn n_f(&self) -> usize {
        self.yt_ff.nrows()
    }

    /// Boundary currents for given EMFs and GFL terminal voltages.
    pub fn currents(&self, e: &[ComplexValue], u: &[ComplexValue]) -> (Vec<ComplexValue>, Vec<ComplexValue>) {
        let add = |a: Vec<ComplexValue>, b: Vec<ComplexValue>| a.into_iter().zip(b).map(|(x, y)| x + y).collect();
        let i_g = add(mat_vec(&self.yt_gg, e), mat_vec(&self.yt_gf, u));
        let i_f = add(mat_vec(&self.yt_fg, e), mat_vec(&self.yt_ff, u));
        (i_g, i_f)
    }
}

/// Hybrid description: `I_G = Y_eq E + T_eq I_F`, `U_F = T_u E + Z_eq I_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridInterfaceMatrix {
    /// N_G x N_G, entries G + jB.
    pub y_eq: CMatrix,
    /// N_G x N_F current transfer, entries V + jW.
    pub t_eq: CMatrix,
    /// N_F x N_G voltage transfer; equals `-t_eq^T`.
    pub t_eq_u: CMatrix,
    /// N_F x N_F, entries R + jX.
    pub z_eq: CMatrix,
    /// max |t_eq + t_eq_u^T|.
    pub symmetry_residual: f64,
}

impl HybridInterfaceMatrix {
    pub fn n_g(&self) -> usize {
        self.y_eq.nrows()
    }

    pub fn n_f(&self) -> usize {
        self.z_eq.nrows()
    }

    /// SG currents and GFL terminal voltages for given EMFs and GFL currents.
    pub fn solve(&self, e: &[ComplexValue], i_f: &[ComplexValue]) -> (Vec<ComplexValue>, Vec<ComplexValue>) {
        let add = |a: Vec<ComplexValue>, b: Vec<ComplexValue>| a.into_iter().zip(b).map(|(x, y)| x + y).collect();
        let i_g = add(mat_vec(&self.y_eq, e), mat_vec(&self.t_eq, i_f));
        let u_f = add(mat_vec(&self.t_eq_u, e), mat_vec(&self.z_eq, i_f));
        (i_g, u_f)
    }
}

/// Hybrid description with all SGs merged into one COI node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoiInterfaceMatrix {
    pub y_eq: ComplexValue,
    pub t_eq: Vec<ComplexValue>,
    pub z_eq: CMatrix,
    pub symmetry_residual: f64,
}

impl CoiInterfaceMatrix {
    /// Same data as a one-SG hybrid matrix.
    pub fn to_hybrid(&self) -> HybridInterfaceMatrix {
        let n_f = self.t_eq.len();
        let t_eq = CMatrix::from_fn(1, n_f, |_, j| self.t_eq[j]);
        HybridInterfaceMatrix {
            y_eq: CMatrix::from_element(1, 1, self.y_eq),
            t_eq_u: -t_eq.transpose(),
            t_eq,
            z_eq: self.z_eq.clone(),
            symmetry_residual: self.symmetry_residual,
        }
    }
}

/// Eliminates every `N` node with the loads folded into the diagonal:
/// `Yt = Y_BB - Y_BN (Y_NN + diag(loads))^-1 Y_NB` over boundary `B = G ∪ F`.
pub fn eliminate_network_nodes(
    part: &PartitionedAdmittance,
    loads: &[ComplexValue],
) -> Result<ReducedAdmittance, NetworkError> {
    let full = part.with_loads(loads);
    let nb = part.n_g + part.n_f;
    let nn = part.n_n;
    let y_bb = full.view((0, 0), (nb, nb)).into_owned();
    let (reduced, min_pivot) = if nn == 0 {
        (y_bb, f64::INFINITY)
    } else {
        let y_bn = full.view((0, nb), (nb, nn)).into_owned();
        let y_nb = full.view((nb, 0), (nn, nb)).into_owned();
        let y_nn = full.view((nb, nb), (nn, nn)).into_owned();
        let lu = ComplexLu::factor(&y_nn).map_err(|source| NetworkError::Singular { stage: "interior node block", source })?;
        let x = lu.solve_mat(&y_nb);
        (y_bb - y_bn * x, lu.min_pivot())
    };
    let g = part.n_g;
    let f = part.n_f;
    Ok(ReducedAdmittance {
        yt_gg: reduced.view((0, 0), (g, g)).into_owned(),
        yt_gf: reduced.view((0, g), (g, f)).into_owned(),
        yt_fg: reduced.view((g, 0), (f, g)).into_owned(),
        yt_ff: reduced.view((g, g), (f, f)).into_owned(),
        min_pivot,
    })
}

/// Moves the GFL currents to the right-hand side. The products are ordered
/// so every block has the right shape for any `N_G`, `N_F`.
pub fn form_hybrid_matrix(red: &ReducedAdmittance) -> Result<HybridInterfaceMatrix, NetworkError> {
    let g = red.n_g();
    let f = red.n_f();
    if f == 0 {
        return Ok(HybridInterfaceMatrix {
            y_eq: red.yt_gg.clone(),
            t_eq: CMatrix::zeros(g, 0),
            t_eq_u: CMatrix::zeros(0, g),
            z_eq: CMatrix::zeros(0, 0),
            symmetry_residual: 0.0,
        });
    }
    let lu = ComplexLu::factor(&red.yt_ff).map_err(|source| NetworkError::Singular { stage: "reduced GFL block", source })?;
    let z = lu.inverse();
    let t_eq = &red.yt_gf * &z;
    let t_eq_u = -(&z * &red.yt_fg);
    let y_eq = &red.yt_gg - &t_eq * &red.yt_fg;
    let symmetry_residual = max_abs(&(&t_eq + t_eq_u.transpose()));
    Ok(HybridInterfaceMatrix { y_eq, t_eq, t_eq_u, z_eq: z, symmetry_residual })
}

/// Merges the SG rows and columns into a single COI node (currents add, all
/// EMFs equal the COI EMF) and then reduces as usual.
pub fn coi_frame_reduction(
    part: &PartitionedAdmittance,
    loads: &[ComplexValue],
) -> Result<CoiInterfaceMatrix, NetworkError> {
    if part.n_g == 0 {
        return Err(NetworkError::NoSynchronousGenerator);
    }
    let merged = collapse_generators(part);
    let red = eliminate_network_nodes(&merged, loads)?;
    let hyb = form_hybrid_matrix(&red)?;
    Ok(CoiInterfaceMatrix {
        y_eq: hyb.y_eq[(0, 0)],
        t_eq: hyb.t_eq.row(0).iter().copied().collect(),
        z_eq: hyb.z_eq,
        symmetry_residual: hyb.symmetry_residual,
    })
}

fn collapse_generators(part: &PartitionedAdmittance) -> PartitionedAdmittance {
    let g = part.n_g;
    let rest = part.dim() - g;
    let m = &part.matrix;
    let mut out = CMatrix::zeros(rest + 1, rest + 1);
    for i in 0..g {
        for j in 0..g {
            out[(0, 0)] += m[(i, j)];
        }
    }
    for x in 0..rest {
        for i in 0..g {
            out[(0, x + 1)] += m[(i, g + x)];
            out[(x + 1, 0)] += m[(g + x, i)];
        }
        for y in 0..rest {
            out[(x + 1, y + 1)] = m[(g + x, g + y)];
        }
    }
    PartitionedAdmittance {
        n_g: 1,
        n_f: part.n_f,
        n_n: part.n_n,
        matrix: out,
        gfl_buses: part.gfl_buses.clone(),
        interior_buses: part.interior_buses.clone(),
        bus_node: part.bus_node.iter().map(|&k| k - g + 1).collect(),
    }
}

/// Symmetry check used by tests and diagnostics: max |M - M^T| / max |M|.
pub fn relative_asymmetry(m: &CMatrix) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        0.0
    } else {
        asymmetry(m) / scale
    }
}
