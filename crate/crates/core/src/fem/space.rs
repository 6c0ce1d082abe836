use std::sync::Arc;

use crate::error::{FsiError, Result};
use crate::mesh::{BoundaryTag, Mesh, Point, Subdomain, LOCAL_EDGES};

/// Where a space lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Fluid,
    Solid,
    /// Trace space on the fluid-solid interface polyline.
    Interface,
}

impl Domain {
    pub fn subdomain(self) -> Option<Subdomain> {
        match self {
            Domain::Fluid => Some(Subdomain::Fluid),
            Domain::Solid => Some(Subdomain::Solid),
            Domain::Interface => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Fluid => "fluid",
            Domain::Solid => "solid",
            Domain::Interface => "interface",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluid" => Ok(Domain::Fluid),
            "solid" => Ok(Domain::Solid),
            "interface" => Ok(Domain::Interface),
            _ => Err(FsiError::Invalid(format!("unknown space domain '{s}'"))),
        }
    }
}

/// Affine triangle geometry.
#[derive(Debug, Clone, Copy)]
pub struct CellGeom {
    pub pts: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_l: [[f64; 2]; 3],
}

impl CellGeom {
    pub fn new(pts: [Point; 3]) -> Self {
        let area = crate::mesh::signed_area(pts[0], pts[1], pts[2]);
        let mut grad_l = [[0.0; 2]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            grad_l[i] = [
                (pts[j][1] - pts[k][1]) / (2.0 * area),
                (pts[k][0] - pts[j][0]) / (2.0 * area),
            ];
        }
        CellGeom { pts, area, grad_l }
    }

    pub fn point(&self, bary: [f64; 3]) -> Point {
        let mut p = [0.0; 2];
        for i in 0..3 {
            p[0] += bary[i] * self.pts[i][0];
            p[1] += bary[i] * self.pts[i][1];
        }
        p
    }

    /// Barycentric coordinates of a physical point.
    pub fn bary(&self, p: Point) -> [f64; 3] {
        let mut b = [0.0; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            b[i] = self.grad_l[i][0] * (p[0] - self.pts[j][0]) + self.grad_l[i][1] * (p[1] - self.pts[j][1]);
        }
        b
    }
}

/// Lagrange basis values and gradients on a triangle. Local order: vertices, then edges
/// in [`LOCAL_EDGES`] order.
pub fn tri_basis(order: usize, bary: [f64; 3], g: &CellGeom, vals: &mut [f64], grads: &mut [[f64; 2]]) {
    let l = bary;
    let gl = &g.grad_l;
    if order == 1 {
        for i in 0..3 {
            vals[i] = l[i];
            grads[i] = gl[i];
        }
        return;
    }
    for i in 0..3 {
        vals[i] = l[i] * (2.0 * l[i] - 1.0);
        let f = 4.0 * l[i] - 1.0;
        grads[i] = [f * gl[i][0], f * gl[i][1]];
    }
    for (k, [a, b]) in LOCAL_EDGES.iter().copied().enumerate() {
        vals[3 + k] = 4.0 * l[a] * l[b];
        grads[3 + k] = [
            4.0 * (l[b] * gl[a][0] + l[a] * gl[b][0]),
            4.0 * (l[b] * gl[a][1] + l[a] * gl[b][1]),
        ];
    }
}

/// 1D Lagrange basis on an edge parametrized by `t` in [0, 1]; local order: ends, then midpoint.
pub fn edge_basis(order: usize, t: f64, vals: &mut [f64]) {
    if order == 1 {
        vals[0] = 1.0 - t;
        vals[1] = t;
    } else {
        vals[0] = (1.0 - t) * (1.0 - 2.0 * t);
        vals[1] = t * (2.0 * t - 1.0);
        vals[2] = 4.0 * t * (1.0 - t);
    }
}

/// Lagrange finite-element space. Vector DOF of scalar index `s`, component `c` is
/// `comps * s + c`.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    domain: Domain,
    order: usize,
    comps: usize,
    n_scalar: usize,
    node_dof: Vec<usize>,
    edge_dof: Vec<usize>,
    cells: Vec<usize>,
    cell_of: Vec<usize>,
    nloc: usize,
    loc: Vec<usize>,
    points: Vec<Point>,
}

const NONE: usize = usize::MAX;

/// Builds a space; `order` is 1 or 2 and `comps` is 1 or 2.
pub fn build_space(mesh: &Arc<Mesh>, domain: Domain, order: usize, comps: usize) -> Result<Arc<FeSpace>> {
    FeSpace::new(mesh.clone(), domain, order, comps).map(Arc::new)
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, domain: Domain, order: usize, comps: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(FsiError::Invalid(format!("unsupported element order {order}")));
        }
        if !(1..=2).contains(&comps) {
            return Err(FsiError::Invalid(format!("unsupported component count {comps}")));
        }
        let nn = mesh.nodes().len();
        let ne = mesh.edges().len();
        let mut node_dof = vec![NONE; nn];
        let mut edge_dof = vec![NONE; if order == 2 { ne } else { 0 }];
        let mut cells = Vec::new();
        let mut cell_of: Vec<usize>;
        let nloc;
        let mut loc = Vec::new();
        match domain.subdomain() {
            Some(sub) => {
                cells = mesh.cells_of(sub).collect();
                if cells.is_empty() {
                    return Err(FsiError::Invalid(format!("subdomain {sub} has no cells")));
                }
                cell_of = vec![NONE; mesh.triangles().len()];
                for (c, &t) in cells.iter().enumerate() {
                    cell_of[t] = c;
                    for &n in &mesh.triangles()[t].nodes {
                        node_dof[n] = 0;
                    }
                    if order == 2 {
                        for e in mesh.triangle_edges(t) {
                            edge_dof[e] = 0;
                        }
                    }
                }
                nloc = if order == 1 { 3 } else { 6 };
            }
            None => {
                if mesh.interface_edges().is_empty() {
                    return Err(FsiError::Invalid("mesh has no fluid-solid interface".into()));
                }
                cell_of = vec![NONE; ne];
                for (c, ie) in mesh.interface_edges().iter().enumerate() {
                    cells.push(c);
                    cell_of[ie.edge] = c;
                    for &n in &ie.nodes {
                        node_dof[n] = 0;
                    }
                    if order == 2 {
                        edge_dof[ie.edge] = 0;
                    }
                }
                nloc = order + 1;
            }
        }
        // Number nodes, then edges, each in ascending mesh order.
        let mut n_scalar = 0;
        let mut points = Vec::new();
        if domain == Domain::Interface {
            // Follow the interface ordering.
            for &n in mesh.interface_nodes() {
                node_dof[n] = n_scalar;
                points.push(mesh.nodes()[n]);
                n_scalar += 1;
            }
        } else {
            for (n, d) in node_dof.iter_mut().enumerate() {
                if *d == 0 {
                    *d = n_scalar;
                    points.push(mesh.nodes()[n]);
                    n_scalar += 1;
                }
            }
        }
        for (e, d) in edge_dof.iter_mut().enumerate() {
            if *d == 0 {
                *d = n_scalar;
                let [a, b] = mesh.edges()[e].map(|i| mesh.nodes()[i]);
                points.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                n_scalar += 1;
            }
        }
        for &c in &cells {
            if domain == Domain::Interface {
                let ie = &mesh.interface_edges()[c];
                loc.push(node_dof[ie.nodes[0]]);
                loc.push(node_dof[ie.nodes[1]]);
                if order == 2 {
                    loc.push(edge_dof[ie.edge]);
                }
            } else {
                for &n in &mesh.triangles()[c].nodes {
                    loc.push(node_dof[n]);
                }
                if order == 2 {
                    for e in mesh.triangle_edges(c) {
                        loc.push(edge_dof[e]);
                    }
                }
            }
        }
        Ok(FeSpace { mesh, domain, order, comps, n_scalar, node_dof, edge_dof, cells, cell_of, nloc, loc, points })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.comps
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Mesh triangle (volume spaces) or interface edge position (trace spaces) of cell `c`.
    pub fn cell_entity(&self, c: usize) -> usize {
        self.cells[c]
    }

    /// Space cell holding a mesh triangle (volume) or mesh edge (trace).
    pub fn cell_of_entity(&self, e: usize) -> Option<usize> {
        self.cell_of.get(e).copied().filter(|&c| c != NONE)
    }

    /// Number of scalar basis functions per cell.
    pub fn n_local(&self) -> usize {
        self.nloc
    }

    /// Scalar DOFs of cell `c`.
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.loc[c * self.nloc..(c + 1) * self.nloc]
    }

    pub fn dof(&self, scalar: usize, comp: usize) -> usize {
        self.comps * scalar + comp
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof.get(node).copied().filter(|&d| d != NONE)
    }

    pub fn edge_dof(&self, edge: usize) -> Option<usize> {
        self.edge_dof.get(edge).copied().filter(|&d| d != NONE)
    }

    /// Coordinates of the Lagrange node of scalar DOF `s`.
    pub fn dof_point(&self, s: usize) -> Point {
        self.points[s]
    }

    pub fn cell_geom(&self, c: usize) -> CellGeom {
        CellGeom::new(self.mesh.triangle_points(self.cells[c]))
    }

    /// Scalar DOFs lying on edges carrying `tag`, sorted ascending.
    pub fn scalar_dofs_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out = Vec::new();
        for be in self.mesh.edges_with_tag(tag) {
            for &n in &be.nodes {
                out.extend(self.node_dof(n));
            }
            if self.order == 2 {
                if let Some(e) = self.mesh.edge_id(be.nodes[0], be.nodes[1]) {
                    out.extend(self.edge_dof(e));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All vector DOFs (every component) on edges carrying `tag`.
    pub fn dofs_on(&self, tag: BoundaryTag) -> Vec<usize> {
        self.scalar_dofs_on(tag)
            .into_iter()
            .flat_map(|s| (0..self.comps).map(move |c| self.comps * s + c))
            .collect()
    }

    /// Nodal interpolation of `f(point, component)`.
    pub fn interpolate(&self, f: impl Fn(Point, usize) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_dofs()];
        for s in 0..self.n_scalar {
            for c in 0..self.comps {
                v[self.comps * s + c] = f(self.points[s], c);
            }
        }
        v
    }

    /// Two spaces describe the same DOF layout.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        std::ptr::eq(self, other)
            || (Arc::ptr_eq(&self.mesh, &other.mesh)
                && self.domain == other.domain
                && self.order == other.order
                && self.comps == other.comps)
    }

    /// Short descriptor `domain/order/comps`.
    pub fn descriptor(&self) -> String {
        format!("{}/{}/{}", self.domain.as_str(), self.order, self.comps)
    }

    /// Maps scalar DOFs of `self` onto the scalar DOFs of `other` at the same Lagrange node,
    /// for every DOF of `self` that `other` also has.
    pub fn shared_scalar_dofs(&self, other: &FeSpace) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (n, &d) in self.node_dof.iter().enumerate() {
            if d != NONE {
                if let Some(o) = other.node_dof(n) {
                    out.push((d, o));
                }
            }
        }
        if self.order == 2 && other.order == 2 {
            for (e, &d) in self.edge_dof.iter().enumerate() {
                if d != NONE {
                    if let Some(o) = other.edge_dof(e) {
                        out.push((d, o));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
