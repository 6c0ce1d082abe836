//! Two-subdomain triangulations with tagged boundaries.
//!
//! A [`Mesh`] is immutable once built. [`Mesh::new`] checks every structural
//! invariant (positive orientation, boundary-edge adjacency, conformity of
//! the fluid-solid interface) so downstream code can rely on them.

mod generate;
mod io;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

pub use generate::{generate_benchmark_mesh, generate_rectangle_mesh, GeometryParams, RectangleTags};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};

use crate::error::{FsiError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subdomain {
    Fluid,
    Solid,
}

impl Subdomain {
    pub fn as_str(self) -> &'static str {
        match self {
            Subdomain::Fluid => "fluid",
            Subdomain::Solid => "solid",
        }
    }
}

impl fmt::Display for Subdomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subdomain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fluid" => Ok(Subdomain::Fluid),
            "solid" => Ok(Subdomain::Solid),
            other => Err(format!("unknown subdomain '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inlet,
    Walls,
    Outlet,
    SolidDirichlet,
    FsiInterface,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Inlet,
        BoundaryTag::Walls,
        BoundaryTag::Outlet,
        BoundaryTag::SolidDirichlet,
        BoundaryTag::FsiInterface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Walls => "walls",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::SolidDirichlet => "solid_dirichlet",
            BoundaryTag::FsiInterface => "fsi_interface",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = FsiError;

    fn from_str(s: &str) -> Result<Self> {
        BoundaryTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| FsiError::Invalid(format!("unknown boundary tag '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub subdomain: Subdomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// One edge of the fluid-solid interface seen from both sides.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceEdge {
    /// Mesh edge index.
    pub edge: usize,
    pub nodes: [usize; 2],
    pub fluid_cell: usize,
    /// Local edge number (0..3) of this edge inside the fluid cell.
    pub fluid_local: usize,
    pub solid_cell: usize,
    pub solid_local: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<Triangle>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_nodes: Vec<usize>,
    // derived topology
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_index: HashMap<[usize; 2], usize>,
    edge_cells: Vec<Vec<usize>>,
    interface: Vec<InterfaceEdge>,
}

/// Local edge `k` of a triangle joins local vertices `LOCAL_EDGES[k]`.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

fn key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh and validates all invariants.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<Triangle>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(FsiError::InvalidMesh("no cells".into()));
        }
        let n = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.nodes.iter().find(|&&i| i >= n) {
                return Err(FsiError::InvalidMesh(format!(
                    "triangle {t} references node {bad} (only {n} nodes)"
                )));
            }
            let [a, b, c] = tri.nodes.map(|i| nodes[i]);
            if signed_area(a, b, c) <= 0.0 {
                return Err(FsiError::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area"
                )));
            }
        }
        for (e, be) in boundary_edges.iter().enumerate() {
            if let Some(&bad) = be.nodes.iter().find(|&&i| i >= n) {
                return Err(FsiError::InvalidMesh(format!(
                    "boundary edge {e} references node {bad} (only {n} nodes)"
                )));
            }
        }

        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for (k, le) in LOCAL_EDGES.iter().enumerate() {
                let kk = key(tri.nodes[le[0]], tri.nodes[le[1]]);
                let id = *edge_index.entry(kk).or_insert_with(|| {
                    edges.push(kk);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[id].push(t);
                te[k] = id;
            }
            tri_edges.push(te);
        }
        if let Some(e) = edge_cells.iter().position(|c| c.len() > 2) {
            return Err(FsiError::InvalidMesh(format!(
                "edge {:?} is shared by more than two triangles",
                edges[e]
            )));
        }

        let mut mesh = Mesh {
            nodes,
            triangles,
            boundary_edges,
            interface_nodes: Vec::new(),
            edges,
            tri_edges,
            edge_index,
            edge_cells,
            interface: Vec::new(),
        };
        mesh.check_boundary_edges()?;
        mesh.build_interface()?;
        Ok(mesh)
    }

    fn check_boundary_edges(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for be in &self.boundary_edges {
            let k = key(be.nodes[0], be.nodes[1]);
            if !seen.insert(k) {
                return Err(FsiError::InvalidMesh(format!("duplicate boundary edge {k:?}")));
            }
            let Some(&e) = self.edge_index.get(&k) else {
                return Err(FsiError::InvalidMesh(format!(
                    "boundary edge {k:?} is not an edge of any triangle"
                )));
            };
            let cells = &self.edge_cells[e];
            let fluid = cells
                .iter()
                .filter(|&&c| self.triangles[c].subdomain == Subdomain::Fluid)
                .count();
            let solid = cells.len() - fluid;
            let ok = match be.tag {
                BoundaryTag::Inlet | BoundaryTag::Walls | BoundaryTag::Outlet => {
                    fluid == 1 && solid == 0
                }
                BoundaryTag::SolidDirichlet => solid == 1 && fluid == 0,
                BoundaryTag::FsiInterface => fluid == 1 && solid == 1,
            };
            if !ok {
                return Err(FsiError::InvalidMesh(format!(
                    "{} edge {k:?} touches {fluid} fluid and {solid} solid triangles",
                    be.tag
                )));
            }
        }
        // Every edge between a fluid and a solid triangle must be tagged.
        for (e, cells) in self.edge_cells.iter().enumerate() {
            if cells.len() == 2
                && self.triangles[cells[0]].subdomain != self.triangles[cells[1]].subdomain
                && !seen.contains(&self.edges[e])
            {
                return Err(FsiError::InvalidMesh(format!(
                    "untagged fluid-solid edge {:?}",
                    self.edges[e]
                )));
            }
        }
        Ok(())
    }

    fn build_interface(&mut self) -> Result<()> {
        let mut iface = Vec::new();
        for be in &self.boundary_edges {
            if be.tag != BoundaryTag::FsiInterface {
                continue;
            }
            let e = self.edge_index[&key(be.nodes[0], be.nodes[1])];
            let mut fluid = None;
            let mut solid = None;
            for &c in &self.edge_cells[e] {
                let local = self.tri_edges[c].iter().position(|&x| x == e).unwrap();
                match self.triangles[c].subdomain {
                    Subdomain::Fluid => fluid = Some((c, local)),
                    Subdomain::Solid => solid = Some((c, local)),
                }
            }
            let (fc, fl) = fluid.unwrap();
            let (sc, sl) = solid.unwrap();
            iface.push(InterfaceEdge {
                edge: e,
                nodes: be.nodes,
                fluid_cell: fc,
                fluid_local: fl,
                solid_cell: sc,
                solid_local: sl,
            });
        }
        if iface.is_empty() {
            self.interface = iface;
            return Ok(());
        }
        // Chain the interface edges into one ordered polyline.
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, ie) in iface.iter().enumerate() {
            for &v in &ie.nodes {
                adj.entry(v).or_default().push(i);
            }
        }
        if adj.values().any(|v| v.len() > 2) {
            return Err(FsiError::InvalidMesh("interface polyline branches".into()));
        }
        let start = adj
            .iter()
            .filter(|(_, v)| v.len() == 1)
            .map(|(&n, _)| n)
            .min()
            .unwrap_or_else(|| iface[0].nodes[0]);
        let mut order = vec![start];
        let mut used = vec![false; iface.len()];
        let mut edge_order = Vec::with_capacity(iface.len());
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|&i| !used[i]);
            let Some(i) = next else { break };
            used[i] = true;
            edge_order.push(i);
            let [a, b] = iface[i].nodes;
            cur = if a == cur { b } else { a };
            if cur != start {
                order.push(cur);
            }
        }
        if used.iter().any(|u| !u) {
            return Err(FsiError::InvalidMesh("interface is not a single polyline".into()));
        }
        self.interface = edge_order.into_iter().map(|i| iface[i]).collect();
        self.interface_nodes = order;
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Interface nodes ordered along the fluid-solid interface.
    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface_nodes
    }

    /// Interface edges, ordered consistently with [`Mesh::interface_nodes`].
    pub fn interface_edges(&self) -> &[InterfaceEdge] {
        &self.interface
    }

    /// Unique mesh edges as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&key(a, b)).copied()
    }

    pub fn edge_cells(&self, e: usize) -> &[usize] {
        &self.edge_cells[e]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].nodes.map(|i| self.nodes[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn cells_of(&self, sub: Subdomain) -> impl Iterator<Item = usize> + '_ {
        self.triangles
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.subdomain == sub)
            .map(|(i, _)| i)
    }

    pub fn subdomain_area(&self, sub: Subdomain) -> f64 {
        self.cells_of(sub).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Nodes incident to at least one edge carrying `tag`, sorted ascending.
    pub fn nodes_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges_with_tag(tag)
            .flat_map(|e| e.nodes.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// String-tag variant of [`Mesh::nodes_on`].
    pub fn nodes_on_named(&self, tag: &str) -> Result<Vec<usize>> {
        Ok(self.nodes_on(tag.parse()?))
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            for k in 0..3 {
                let a = p[k];
                let b = p[(k + 1) % 3];
                let c = p[(k + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Longest interface edge.
    pub fn interface_edge_length(&self) -> f64 {
        self.interface
            .iter()
            .map(|ie| {
                let [a, b] = ie.nodes.map(|i| self.nodes[i]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits())
            && self.triangles == other.triangles
            && self.boundary_edges == other.boundary_edges
    }
}
