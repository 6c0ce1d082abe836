//! Dense brute-force reference for one monolithic and one partitioned step.
//!
//! Only the mesh, the DOF numbering and the DOF coordinates come from the library. Shape
//! functions, quadrature, boundary detection, residuals, Jacobians (central differences)
//! and the linear algebra (dense LU) are written out here from the continuous equations.

use std::collections::HashMap;

use fsirom::fem::FeSpace;
use fsirom::mesh::{BoundaryTag, Mesh, Subdomain};
use fsirom::offline_monolithic::{MonolithicProblem, MonolithicState};
use fsirom::offline_partitioned::{PartitionedProblem, PartitionedState};
use fsirom::params::NewmarkForm;
use nalgebra::{DMatrix, DVector};

type Pt = [f64; 2];
type M2 = [[f64; 2]; 2];

const QA: f64 = 0.445_948_490_915_965;
const QWA: f64 = 0.223_381_589_678_011;
const QB: f64 = 0.091_576_213_509_771;
const QWB: f64 = 0.109_951_743_655_322;

/// Degree-4 rule on the triangle, weights relative to the area.
fn tri_rule() -> [([f64; 3], f64); 6] {
    [
        ([1.0 - 2.0 * QA, QA, QA], QWA),
        ([QA, 1.0 - 2.0 * QA, QA], QWA),
        ([QA, QA, 1.0 - 2.0 * QA], QWA),
        ([1.0 - 2.0 * QB, QB, QB], QWB),
        ([QB, 1.0 - 2.0 * QB, QB], QWB),
        ([QB, QB, 1.0 - 2.0 * QB], QWB),
    ]
}

/// Three-point Gauss rule on [0, 1].
fn line_rule() -> [(f64, f64); 3] {
    let s = (3.0f64 / 5.0).sqrt();
    [(0.5 - 0.5 * s, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.5 * s, 5.0 / 18.0)]
}

fn key(p: Pt) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

fn det(m: &M2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv(m: &M2) -> M2 {
    let d = det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn mm(a: &M2, b: &M2) -> M2 {
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn tr(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

#[derive(Clone, Copy)]
struct Tri {
    p: [Pt; 3],
    area: f64,
    dl: [[f64; 2]; 3],
}

impl Tri {
    fn new(p: [Pt; 3]) -> Self {
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let dl = std::array::from_fn(|i| {
            let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a]
        });
        Tri { p, area: 0.5 * two_a.abs(), dl }
    }

    fn bary(&self, x: Pt) -> [f64; 3] {
        std::array::from_fn(|i| 1.0 + self.dl[i][0] * (x[0] - self.p[i][0]) + self.dl[i][1] * (x[1] - self.p[i][1]))
    }
}

#[derive(Clone, Copy)]
enum Node {
    Vertex(usize),
    Edge(usize, usize),
}

/// Lagrange element on one cell, with nodes listed in the library's local DOF order.
#[derive(Clone)]
struct Elem {
    t: usize,
    tri: Tri,
    nodes: Vec<Node>,
    dofs: Vec<usize>,
    quadratic: bool,
}

impl Elem {
    fn shape(&self, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let dl = &self.tri.dl;
        let mut vals = Vec::with_capacity(self.nodes.len());
        let mut grads = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            match *n {
                Node::Vertex(i) if self.quadratic => {
                    vals.push(l[i] * (2.0 * l[i] - 1.0));
                    let s = 4.0 * l[i] - 1.0;
                    grads.push([s * dl[i][0], s * dl[i][1]]);
                }
                Node::Vertex(i) => {
                    vals.push(l[i]);
                    grads.push(dl[i]);
                }
                Node::Edge(i, j) => {
                    vals.push(4.0 * l[i] * l[j]);
                    grads.push([4.0 * (l[j] * dl[i][0] + l[i] * dl[j][0]), 4.0 * (l[j] * dl[i][1] + l[i] * dl[j][1])]);
                }
            }
        }
        (vals, grads)
    }
}

/// Per-cell elements of a triangle space, indexed by mesh triangle.
struct Elems {
    by_tri: HashMap<usize, Elem>,
    order_cells: Vec<usize>,
}

impl Elems {
    fn new(space: &FeSpace) -> Self {
        let mesh = space.mesh();
        let mut by_tri = HashMap::new();
        let mut order_cells = Vec::new();
        for c in 0..space.n_cells() {
            let t = space.cell_entity(c);
            let tri = Tri::new(mesh.triangle_points(t));
            let dofs = space.cell_dofs(c).to_vec();
            let nodes = dofs
                .iter()
                .map(|&s| {
                    let l = tri.bary(space.dof_point(s));
                    if let Some(i) = (0..3).find(|&i| (l[i] - 1.0).abs() < 1e-8) {
                        Node::Vertex(i)
                    } else {
                        let half: Vec<usize> = (0..3).filter(|&i| (l[i] - 0.5).abs() < 1e-8).collect();
                        assert_eq!(half.len(), 2, "DOF point is neither a vertex nor an edge midpoint");
                        Node::Edge(half[0], half[1])
                    }
                })
                .collect();
            by_tri.insert(t, Elem { t, tri, nodes, dofs, quadratic: space.order() == 2 });
            order_cells.push(t);
        }
        Elems { by_tri, order_cells }
    }

    fn iter(&self) -> impl Iterator<Item = &Elem> {
        self.order_cells.iter().map(|t| &self.by_tri[t])
    }
}

/// Value and gradient of a vector field with interleaved components.
fn vec_at(e: &Elem, vals: &[f64], grads: &[[f64; 2]], x: &dyn Fn(usize) -> f64) -> ([f64; 2], M2) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for i in 0..e.dofs.len() {
        for a in 0..2 {
            let xi = x(2 * i + a);
            v[a] += xi * vals[i];
            g[a][0] += xi * grads[i][0];
            g[a][1] += xi * grads[i][1];
        }
    }
    (v, g)
}

fn vec_dofs(e: &Elem, off: usize) -> Vec<usize> {
    e.dofs.iter().flat_map(|&s| [off + 2 * s, off + 2 * s + 1]).collect()
}

/// Boundary tags of every point that is a vertex or midpoint of a tagged edge.
struct Tags(HashMap<(i64, i64), Vec<BoundaryTag>>);

impl Tags {
    fn new(mesh: &Mesh) -> Self {
        let mut m: HashMap<(i64, i64), Vec<BoundaryTag>> = HashMap::new();
        let mut add = |a: usize, b: usize, tag: BoundaryTag| {
            let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
            for p in [pa, pb, [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]] {
                m.entry(key(p)).or_default().push(tag);
            }
        };
        for be in mesh.boundary_edges() {
            add(be.nodes[0], be.nodes[1], be.tag);
        }
        for ie in mesh.interface_edges() {
            add(ie.nodes[0], ie.nodes[1], BoundaryTag::FsiInterface);
        }
        Tags(m)
    }

    fn has(&self, p: Pt, tag: BoundaryTag) -> bool {
        self.0.get(&key(p)).is_some_and(|v| v.contains(&tag))
    }
}

/// A local residual contribution: rows and columns are the same global unknowns.
struct Piece<'a> {
    dofs: Vec<usize>,
    f: Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>,
}

/// `R(x) = sum of pieces`, with fixed rows `x_d - g_d`.
struct System<'a> {
    n: usize,
    pieces: Vec<Piece<'a>>,
    fixed: Vec<(usize, f64)>,
}

impl System<'_> {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        for pc in &self.pieces {
            let xl: Vec<f64> = pc.dofs.iter().map(|&d| x[d]).collect();
            for (k, v) in (pc.f)(&xl).into_iter().enumerate() {
                r[pc.dofs[k]] += v;
            }
        }
        for &(d, g) in &self.fixed {
            r[d] = x[d] - g;
        }
        r
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n, self.n);
        for pc in &self.pieces {
            let mut xl: Vec<f64> = pc.dofs.iter().map(|&d| x[d]).collect();
            for m in 0..xl.len() {
                let x0 = xl[m];
                let h = 1e-7 * x0.abs().max(1e-3);
                xl[m] = x0 + h;
                let fp = (pc.f)(&xl);
                xl[m] = x0 - h;
                let fm = (pc.f)(&xl);
                xl[m] = x0;
                for k in 0..fp.len() {
                    j[(pc.dofs[k], pc.dofs[m])] += (fp[k] - fm[k]) / (2.0 * h);
                }
            }
        }
        for &(d, _) in &self.fixed {
            j.row_mut(d).fill(0.0);
            j[(d, d)] = 1.0;
        }
        j
    }

    /// Newton with a frozen Jacobian, refreshed when the contraction stalls. A factorization
    /// passed in is reused (and one computed here is handed back).
    fn solve(&self, mut x: Vec<f64>, lu: &mut Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>) -> Vec<f64> {
        for &(d, g) in &self.fixed {
            x[d] = g;
        }
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            if lu.is_none() {
                *lu = Some(self.jacobian(&x).lu());
            }
            let r = DVector::from_vec(self.residual(&x));
            let dx = lu.as_ref().unwrap().solve(&r).expect("singular reference Jacobian");
            let step = dx.amax();
            for (xi, di) in x.iter_mut().zip(dx.iter()) {
                *xi -= di;
            }
            let scale = x.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            if step <= 1e-14 * scale {
                return x;
            }
            if step > 0.5 * last {
                *lu = None;
            }
            last = step;
        }
        panic!("reference Newton did not converge");
    }
}

fn inlet(t: f64, y: f64, u_bar: f64) -> f64 {
    let h = 0.41;
    let s = if t < 2.0 { 0.5 * (1.0 - (std::f64::consts::PI * t / 2.0).cos()) } else { 1.0 };
    1.5 * u_bar * 4.0 * y * (h - y) / (h * h) * s
}

/// Interface-edge geometry: endpoints, length, fluid outward normal, and the two cells.
struct IEdge {
    pos: usize,
    a: Pt,
    b: Pt,
    len: f64,
    n: [f64; 2],
    fluid: usize,
    solid: usize,
}

fn iedges(mesh: &Mesh) -> Vec<IEdge> {
    mesh.interface_edges()
        .iter()
        .enumerate()
        .map(|(pos, ie)| {
            let (a, b) = (mesh.nodes()[ie.nodes[0]], mesh.nodes()[ie.nodes[1]]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let mut n = [(b[1] - a[1]) / len, (a[0] - b[0]) / len];
            // Away from the fluid cell's third vertex.
            let third = mesh.triangles()[ie.fluid_cell].nodes.iter().copied().find(|&v| !ie.nodes.contains(&v)).unwrap();
            let c = mesh.nodes()[third];
            if (c[0] - a[0]) * n[0] + (c[1] - a[1]) * n[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            IEdge { pos, a, b, len, n, fluid: ie.fluid_cell, solid: ie.solid_cell }
        })
        .collect()
}

/// Linear trace element on an interface edge.
fn trace_vals(space: &FeSpace, e: &IEdge, s: f64) -> Vec<f64> {
    space
        .cell_dofs(e.pos)
        .iter()
        .map(|&d| {
            let p = space.dof_point(d);
            if key(p) == key(e.a) {
                1.0 - s
            } else {
                assert_eq!(key(p), key(e.b));
                s
            }
        })
        .collect()
}

/// `J (rho nu (G F^-1 + F^-T G^T) - p I) F^-T` for reference gradient `G` and map gradient `F`.
fn first_piola(g: &M2, p: f64, f: &M2, rho_nu: f64) -> M2 {
    let fi = inv(f);
    let j = det(f);
    let gf = mm(g, &fi);
    let mut s = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            s[a][b] = rho_nu * (gf[a][b] + gf[b][a]) - if a == b { p } else { 0.0 };
        }
    }
    let m = mm(&s, &tr(&fi));
    [[j * m[0][0], j * m[0][1]], [j * m[1][0], j * m[1][1]]]
}

fn solid_piola(g: &M2, mu: f64, lambda: f64) -> M2 {
    let trace = g[0][0] + g[1][1];
    let mut p = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            p[a][b] = mu * (g[a][b] + g[b][a]) + if a == b { lambda * trace } else { 0.0 };
        }
    }
    p
}

fn ident_plus(h: &M2) -> M2 {
    [[1.0 + h[0][0], h[0][1]], [h[1][0], 1.0 + h[1][1]]]
}

/// Every field of the monolithic step from `s`, packed in the library's block order.
pub fn monolithic_step(prob: &MonolithicProblem, s: &MonolithicState) -> Vec<f64> {
    assert_eq!(prob.time.newmark_form, NewmarkForm::Standard);
    let sp = &prob.spaces;
    let mesh = &*sp.mesh;
    let off = sp.offsets();
    let (ou, op, od, os, olu, old) = (off[0], off[1], off[2], off[3], off[4], off[5]);
    let ph = prob.phys;
    let (dt, gamma, beta) = (prob.time.dt, prob.time.gamma, prob.time.beta);
    let t_next = s.t + dt;
    let first = s.u_prev.is_none();
    // Backward differences: D x = c0 x + (history part).
    let c0 = if first { 1.0 / dt } else { 1.5 / dt };
    let hist = |now: f64, before: f64| if first { -now / dt } else { (-4.0 * now + before) / (2.0 * dt) };
    let zeros_v = vec![0.0; sp.v.n_dofs()];
    let u_prev = s.u_prev.as_ref().map_or(&zeros_v, |f| &f.values);
    let d_prev = s.d_f_prev.as_ref().map_or(&zeros_v, |f| &f.values);
    // Newmark: a(d) = (d - d^n - dt v^n - dt^2 (1/2 - beta) a^n) / (beta dt^2), v(d) = v^n + dt ((1 - gamma) a^n + gamma a(d)).
    let acc = |d: f64, i: usize| {
        (d - s.d_s.values[i] - dt * s.v_s.values[i] - dt * dt * (0.5 - beta) * s.a_s.values[i]) / (beta * dt * dt)
    };
    let vel = |d: f64, i: usize| s.v_s.values[i] + dt * ((1.0 - gamma) * s.a_s.values[i] + gamma * acc(d, i));

    let fe = Elems::new(&sp.v);
    let qe = Elems::new(&sp.q);
    let se = Elems::new(&sp.es);
    let rule = tri_rule();
    let mut pieces: Vec<Piece> = Vec::new();

    for e in fe.iter() {
        let eq = qe.by_tri[&e.t].clone();
        let e = e.clone();
        let nq = eq.dofs.len();
        let ud = vec_dofs(&e, ou);
        let dd = vec_dofs(&e, od);
        let qd: Vec<usize> = eq.dofs.iter().map(|&d| op + d).collect();
        let mut dofs = ud.clone();
        dofs.extend(&qd);
        dofs.extend(&dd);
        let lag: Vec<f64> = vec_dofs(&e, 0).iter().map(|&g| s.d_f.values[g]).collect();
        let un: Vec<f64> = vec_dofs(&e, 0).iter().map(|&g| s.u.values[g]).collect();
        let unm: Vec<f64> = vec_dofs(&e, 0).iter().map(|&g| u_prev[g]).collect();
        let dnm: Vec<f64> = vec_dofs(&e, 0).iter().map(|&g| d_prev[g]).collect();
        let rho = ph.rho_f;
        let rho_nu = ph.rho_f * ph.nu_f;
        let b = ph.b_f;
        let lag2 = lag.clone();
        let e2 = e.clone();
        pieces.push(Piece {
            dofs: dofs.clone(),
            f: Box::new(move |x: &[f64]| {
                let mut r = vec![0.0; 24 + nq];
                for &(l, w) in &rule {
                    let wa = w * e.tri.area;
                    let (vv, vg) = e.shape(l);
                    let (qv, _) = eq.shape(l);
                    let (u, g) = vec_at(&e, &vv, &vg, &|k| x[k]);
                    let (d, h) = vec_at(&e, &vv, &vg, &|k| x[12 + nq + k]);
                    let (u_n, _) = vec_at(&e, &vv, &vg, &|k| un[k]);
                    let (u_nm, _) = vec_at(&e, &vv, &vg, &|k| unm[k]);
                    let (d_nm, _) = vec_at(&e, &vv, &vg, &|k| dnm[k]);
                    let (d_n, _) = vec_at(&e, &vv, &vg, &|k| lag[k]);
                    let p: f64 = (0..nq).map(|k| x[12 + k] * qv[k]).sum();
                    let f = ident_plus(&h);
                    let j = det(&f);
                    assert!(j > 0.0, "inverted reference cell");
                    let gf = mm(&g, &inv(&f));
                    let w_mesh = [0, 1].map(|a| c0 * d[a] + hist(d_n[a], d_nm[a]));
                    let rel = [u[0] - w_mesh[0], u[1] - w_mesh[1]];
                    let sig = first_piola(&g, p, &f, rho_nu);
                    for i in 0..6 {
                        for a in 0..2 {
                            let dudt = c0 * u[a] + hist(u_n[a], u_nm[a]);
                            let f0 = rho * j * dudt + rho * j * (gf[a][0] * rel[0] + gf[a][1] * rel[1]) - j * b[a];
                            r[2 * i + a] += wa * (f0 * vv[i] + sig[a][0] * vg[i][0] + sig[a][1] * vg[i][1]);
                        }
                    }
                    let div = gf[0][0] + gf[1][1];
                    for k in 0..nq {
                        r[12 + k] -= wa * j * div * qv[k];
                    }
                }
                r
            }),
        });
        // Mesh motion: (1/J(d^n) grad d, grad e).
        pieces.push(Piece {
            dofs: dd,
            f: Box::new(move |x: &[f64]| {
                let mut r = vec![0.0; 12];
                for &(l, w) in &rule {
                    let (vv, vg) = e2.shape(l);
                    let (_, h) = vec_at(&e2, &vv, &vg, &|k| x[k]);
                    let (_, hl) = vec_at(&e2, &vv, &vg, &|k| lag2[k]);
                    let jl = det(&ident_plus(&hl));
                    for i in 0..6 {
                        for a in 0..2 {
                            r[2 * i + a] += w * e2.tri.area / jl * (h[a][0] * vg[i][0] + h[a][1] * vg[i][1]);
                        }
                    }
                }
                r
            }),
        });
    }

    for e in se.iter() {
        let e = e.clone();
        let gl = vec_dofs(&e, 0);
        let (rho_s, mu, lambda, b) = (ph.rho_s, ph.mu_s, ph.lambda_s, ph.b_s);
        let acc = &acc;
        pieces.push(Piece {
            dofs: vec_dofs(&e, os),
            f: Box::new(move |x: &[f64]| {
                let a_nodal: Vec<f64> = (0..12).map(|k| acc(x[k], gl[k])).collect();
                let mut r = vec![0.0; 12];
                for &(l, w) in &rule {
                    let wa = w * e.tri.area;
                    let (vv, vg) = e.shape(l);
                    let (_, g) = vec_at(&e, &vv, &vg, &|k| x[k]);
                    let (av, _) = vec_at(&e, &vv, &vg, &|k| a_nodal[k]);
                    let p = solid_piola(&g, mu, lambda);
                    for i in 0..6 {
                        for a in 0..2 {
                            r[2 * i + a] += wa * ((rho_s * av[a] - b[a]) * vv[i] + p[a][0] * vg[i][0] + p[a][1] * vg[i][1]);
                        }
                    }
                }
                r
            }),
        });
    }

    for ie in iedges(mesh) {
        let ef = fe.by_tri[&ie.fluid].clone();
        let es = se.by_tri[&ie.solid].clone();
        let ld: Vec<usize> = sp.l.cell_dofs(ie.pos).to_vec();
        let mut dofs = vec_dofs(&ef, ou);
        dofs.extend(vec_dofs(&ef, od));
        dofs.extend(vec_dofs(&es, os));
        dofs.extend(ld.iter().flat_map(|&d| [olu + 2 * d, olu + 2 * d + 1]));
        dofs.extend(ld.iter().flat_map(|&d| [old + 2 * d, old + 2 * d + 1]));
        let sg = vec_dofs(&es, 0);
        let lsp = sp.l.clone();
        let vel = &vel;
        pieces.push(Piece {
            dofs,
            f: Box::new(move |x: &[f64]| {
                let (xu, xd, xs, xlu, xld) = (&x[0..12], &x[12..24], &x[24..36], &x[36..40], &x[40..44]);
                let rate: Vec<f64> = (0..12).map(|k| vel(xs[k], sg[k])).collect();
                let mut r = vec![0.0; 44];
                for (sv, w) in line_rule() {
                    let wl = w * ie.len;
                    let pt = [ie.a[0] + sv * (ie.b[0] - ie.a[0]), ie.a[1] + sv * (ie.b[1] - ie.a[1])];
                    let (fv, fg) = ef.shape(ef.tri.bary(pt));
                    let (sv_, sg_) = es.shape(es.tri.bary(pt));
                    let lv = trace_vals(&lsp, &ie, sv);
                    let (u, _) = vec_at(&ef, &fv, &fg, &|k| xu[k]);
                    let (d, _) = vec_at(&ef, &fv, &fg, &|k| xd[k]);
                    let (ds, _) = vec_at(&es, &sv_, &sg_, &|k| xs[k]);
                    let (dsdt, _) = vec_at(&es, &sv_, &sg_, &|k| rate[k]);
                    let lu = [0, 1].map(|a| xlu[a] * lv[0] + xlu[2 + a] * lv[1]);
                    let lam_d = [0, 1].map(|a| xld[a] * lv[0] + xld[2 + a] * lv[1]);
                    for a in 0..2 {
                        for i in 0..6 {
                            r[2 * i + a] -= wl * lu[a] * fv[i];
                            r[12 + 2 * i + a] -= wl * lam_d[a] * fv[i];
                            r[24 + 2 * i + a] += wl * lu[a] * sv_[i];
                        }
                        for m in 0..2 {
                            r[36 + 2 * m + a] += wl * (u[a] - dsdt[a]) * lv[m];
                            r[40 + 2 * m + a] += wl * (d[a] - ds[a]) * lv[m];
                        }
                    }
                }
                r
            }),
        });
    }

    let tags = Tags::new(mesh);
    let mut fixed = Vec::new();
    for sdof in 0..sp.v.n_scalar() {
        let p = sp.v.dof_point(sdof);
        let inl = tags.has(p, BoundaryTag::Inlet);
        let wall = tags.has(p, BoundaryTag::Walls);
        if inl || wall {
            let g = if inl { inlet(t_next, p[1], ph.u_bar) } else { 0.0 };
            fixed.push((ou + 2 * sdof, g));
            fixed.push((ou + 2 * sdof + 1, 0.0));
        }
        if inl || wall || tags.has(p, BoundaryTag::Outlet) {
            fixed.push((od + 2 * sdof, 0.0));
            fixed.push((od + 2 * sdof + 1, 0.0));
        }
    }
    for sdof in 0..sp.es.n_scalar() {
        if tags.has(sp.es.dof_point(sdof), BoundaryTag::SolidDirichlet) {
            fixed.push((os + 2 * sdof, 0.0));
            fixed.push((os + 2 * sdof + 1, 0.0));
        }
    }
    let sys = System { n: off[6], pieces, fixed };
    sys.solve(s.pack(), &mut None)
}

/// Fields of the partitioned step from `s`: `(u, p, d_f, d_s, fixed-point iterations)`.
pub fn partitioned_step(prob: &PartitionedProblem, s: &PartitionedState) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let sp = &prob.spaces;
    let mesh = &*sp.mesh;
    let ph = prob.phys;
    let dt = prob.time.dt;
    let t_next = s.t + dt;
    let rule = tri_rule();
    let fe = Elems::new(&sp.v);
    let qe = Elems::new(&sp.q);
    let se = Elems::new(&sp.es);
    let tags = Tags::new(mesh);
    let rho_nu = ph.rho_f * ph.nu_f;
    let (nv, nq, ns) = (sp.v.n_dofs(), sp.q.n_dofs(), sp.es.n_dofs());

    // Solid scalar DOF at each interface point.
    let solid_at: HashMap<(i64, i64), usize> = (0..sp.es.n_scalar()).map(|d| (key(sp.es.dof_point(d)), d)).collect();
    let tags = &tags;
    let fluid_on = |tag: BoundaryTag| (0..sp.v.n_scalar()).filter(move |&d| tags.has(sp.v.dof_point(d), tag));

    // 1. Harmonic extension of the solid interface displacement.
    let mut pieces = Vec::new();
    for e in fe.iter() {
        let e = e.clone();
        pieces.push(Piece {
            dofs: vec_dofs(&e, 0),
            f: Box::new(move |x: &[f64]| {
                let mut r = vec![0.0; 12];
                for &(l, w) in &rule {
                    let (vv, vg) = e.shape(l);
                    let (_, h) = vec_at(&e, &vv, &vg, &|k| x[k]);
                    for i in 0..6 {
                        for a in 0..2 {
                            r[2 * i + a] += w * e.tri.area * (h[a][0] * vg[i][0] + h[a][1] * vg[i][1]);
                        }
                    }
                }
                r
            }),
        });
    }
    let mut fix: HashMap<usize, f64> = HashMap::new();
    for tag in [BoundaryTag::Inlet, BoundaryTag::Walls, BoundaryTag::Outlet] {
        for d in fluid_on(tag) {
            fix.insert(2 * d, 0.0);
            fix.insert(2 * d + 1, 0.0);
        }
    }
    for d in fluid_on(BoundaryTag::FsiInterface) {
        let sd = solid_at[&key(sp.v.dof_point(d))];
        fix.insert(2 * d, s.d_s.values[2 * sd]);
        fix.insert(2 * d + 1, s.d_s.values[2 * sd + 1]);
    }
    let ext = System { n: nv, pieces, fixed: fix.into_iter().collect() };
    let d_next = ext.solve(vec![0.0; nv], &mut None);
    let w: Vec<f64> = (0..nv).map(|i| (d_next[i] - s.d_f.values[i]) / dt).collect();

    // 2. Explicit momentum step with the old pressure.
    let mut pieces = Vec::new();
    for e in fe.iter() {
        let e = e.clone();
        let eq = qe.by_tri[&e.t].clone();
        let gl = vec_dofs(&e, 0);
        let loc = |v: &[f64]| gl.iter().map(|&g| v[g]).collect::<Vec<f64>>();
        let (un, dn, wn) = (loc(&s.u.values), loc(&d_next), loc(&w));
        let pn: Vec<f64> = eq.dofs.iter().map(|&d| s.p.values[d]).collect();
        let (rho, b) = (ph.rho_f, ph.b_f);
        pieces.push(Piece {
            dofs: gl.clone(),
            f: Box::new(move |x: &[f64]| {
                let mut r = vec![0.0; 12];
                for &(l, wq) in &rule {
                    let wa = wq * e.tri.area;
                    let (vv, vg) = e.shape(l);
                    let (_, qg) = eq.shape(l);
                    let (u, g) = vec_at(&e, &vv, &vg, &|k| x[k]);
                    let (u0, _) = vec_at(&e, &vv, &vg, &|k| un[k]);
                    let (wv, _) = vec_at(&e, &vv, &vg, &|k| wn[k]);
                    let (_, h) = vec_at(&e, &vv, &vg, &|k| dn[k]);
                    let gp = [0, 1].map(|m| (0..pn.len()).map(|k| pn[k] * qg[k][m]).sum::<f64>());
                    let f = ident_plus(&h);
                    let j = det(&f);
                    let fi = inv(&f);
                    let gf = mm(&g, &fi);
                    let visc = first_piola(&g, 0.0, &f, rho_nu);
                    // J F^-T grad p
                    let fgp = [0, 1].map(|a| j * (fi[0][a] * gp[0] + fi[1][a] * gp[1]));
                    let rel = [u[0] - wv[0], u[1] - wv[1]];
                    for i in 0..6 {
                        for a in 0..2 {
                            let f0 = rho * j * (u[a] - u0[a]) / dt + rho * j * (gf[a][0] * rel[0] + gf[a][1] * rel[1]) + fgp[a]
                                - j * b[a];
                            r[2 * i + a] += wa * (f0 * vv[i] + visc[a][0] * vg[i][0] + visc[a][1] * vg[i][1]);
                        }
                    }
                }
                r
            }),
        });
    }
    let mut fix: HashMap<usize, f64> = HashMap::new();
    for d in fluid_on(BoundaryTag::Walls) {
        fix.insert(2 * d, 0.0);
        fix.insert(2 * d + 1, 0.0);
    }
    for d in fluid_on(BoundaryTag::Inlet) {
        fix.insert(2 * d, inlet(t_next, sp.v.dof_point(d)[1], ph.u_bar));
        fix.insert(2 * d + 1, 0.0);
    }
    for d in fluid_on(BoundaryTag::FsiInterface) {
        fix.insert(2 * d, w[2 * d]);
        fix.insert(2 * d + 1, w[2 * d + 1]);
    }
    let mom = System { n: nv, pieces, fixed: fix.into_iter().collect() };
    let u_next = mom.solve(s.u.values.clone(), &mut None);

    // 3. Inlet average of -(sigma n) . n on the reference geometry, from the old state.
    let mut acc_in = 0.0;
    let mut len_in = 0.0;
    for be in mesh.boundary_edges().iter().filter(|b| b.tag == BoundaryTag::Inlet) {
        let (a, b) = (mesh.nodes()[be.nodes[0]], mesh.nodes()[be.nodes[1]]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let eid = mesh.edge_id(be.nodes[0], be.nodes[1]).unwrap();
        let t = mesh.edge_cells(eid)[0];
        assert_eq!(mesh.triangles()[t].subdomain, Subdomain::Fluid);
        let (ev, eq) = (&fe.by_tri[&t], &qe.by_tri[&t]);
        for (sv, w) in line_rule() {
            let pt = [a[0] + sv * (b[0] - a[0]), a[1] + sv * (b[1] - a[1])];
            let (vv, vg) = ev.shape(ev.tri.bary(pt));
            let (qv, _) = eq.shape(eq.tri.bary(pt));
            let (_, g) = vec_at(ev, &vv, &vg, &|k| s.u.values[vec_dofs(ev, 0)[k]]);
            let p: f64 = eq.dofs.iter().zip(&qv).map(|(&d, v)| s.p.values[d] * v).sum();
            acc_in += w * len * (p - 2.0 * rho_nu * g[0][0]);
        }
        len_in += len;
    }
    let p_bar = acc_in / len_in;

    // Fixed-point loop between the pressure Poisson problem and the structure.
    let alpha = {
        let c_p = ((ph.lambda_s + 2.0 * ph.mu_s) / ph.rho_s).sqrt();
        ph.rho_f / (ph.rho_s * c_p * dt)
    };
    let iface = iedges(mesh);
    let p_fixed: Vec<(usize, f64)> = (0..sp.q.n_scalar()).filter(|&d| tags.has(sp.q.dof_point(d), BoundaryTag::Inlet)).map(|d| (d, p_bar)).collect();
    let s_fixed: Vec<(usize, f64)> = (0..sp.es.n_scalar())
        .filter(|&d| tags.has(sp.es.dof_point(d), BoundaryTag::SolidDirichlet))
        .flat_map(|d| [(2 * d, 0.0), (2 * d + 1, 0.0)])
        .collect();
    let norm_q = |v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for e in qe.iter() {
            for &(l, w) in &rule {
                let (qv, _) = e.shape(l);
                let x: f64 = e.dofs.iter().zip(&qv).map(|(&d, b)| v[d] * b).sum();
                acc += w * e.tri.area * x * x;
            }
        }
        acc.sqrt()
    };
    let norm_s = |v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for e in se.iter() {
            let gl = vec_dofs(e, 0);
            for &(l, w) in &rule {
                let (vv, vg) = e.shape(l);
                let (_, g) = vec_at(e, &vv, &vg, &|k| v[gl[k]]);
                acc += w * e.tri.area * (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2));
            }
        }
        acc.sqrt()
    };
    let rel = |norm: &dyn Fn(&[f64]) -> f64, new: &[f64], old: &[f64]| {
        let n = norm(new);
        if n < 1e-14 {
            0.0
        } else {
            norm(&new.iter().zip(old).map(|(a, b)| a - b).collect::<Vec<_>>()) / n
        }
    };

    let (mut p_it, mut d_it) = (s.p.values.clone(), s.d_s.values.clone());
    let (mut lu_p, mut lu_s) = (None, None);
    let (rho, rho_s) = (ph.rho_f, ph.rho_s);
    for it in 1..=prob.time.max_fp_iters {
        // Pressure Poisson with Robin interface data.
        let accel: Vec<f64> = (0..ns).map(|i| (d_it[i] - 2.0 * s.d_s.values[i] + s.d_s_prev.values[i]) / (dt * dt)).collect();
        let mut pieces = Vec::new();
        for e in qe.iter() {
            let (eq, ev) = (e.clone(), fe.by_tri[&e.t].clone());
            let gl = vec_dofs(&ev, 0);
            let (un, dn): (Vec<f64>, Vec<f64>) = gl.iter().map(|&g| (u_next[g], d_next[g])).unzip();
            pieces.push(Piece {
                dofs: eq.dofs.clone(),
                f: Box::new(move |x: &[f64]| {
                    let mut r = vec![0.0; x.len()];
                    for &(l, w) in &rule {
                        let wa = w * eq.tri.area;
                        let (qv, qg) = eq.shape(l);
                        let (vv, vg) = ev.shape(l);
                        let (_, g) = vec_at(&ev, &vv, &vg, &|k| un[k]);
                        let (_, h) = vec_at(&ev, &vv, &vg, &|k| dn[k]);
                        let f = ident_plus(&h);
                        let (j, fi) = (det(&f), inv(&f));
                        let gp = [0, 1].map(|m| (0..x.len()).map(|k| x[k] * qg[k][m]).sum::<f64>());
                        let fgp = [0, 1].map(|a| fi[0][a] * gp[0] + fi[1][a] * gp[1]);
                        let gf = mm(&g, &fi);
                        for k in 0..x.len() {
                            let fgq = [0, 1].map(|a| fi[0][a] * qg[k][0] + fi[1][a] * qg[k][1]);
                            r[k] += wa * (j * (fgp[0] * fgq[0] + fgp[1] * fgq[1]) + rho / dt * j * (gf[0][0] + gf[1][1]) * qv[k]);
                        }
                    }
                    r
                }),
            });
        }
        for ie in &iface {
            let (eq, ev, es) = (qe.by_tri[&ie.fluid].clone(), fe.by_tri[&ie.fluid].clone(), se.by_tri[&ie.solid].clone());
            let dn: Vec<f64> = vec_dofs(&ev, 0).iter().map(|&g| d_next[g]).collect();
            let an: Vec<f64> = vec_dofs(&es, 0).iter().map(|&g| accel[g]).collect();
            let pn: Vec<f64> = eq.dofs.iter().map(|&d| p_it[d]).collect();
            let (a, b, len, n) = (ie.a, ie.b, ie.len, ie.n);
            pieces.push(Piece {
                dofs: eq.dofs.clone(),
                f: Box::new(move |x: &[f64]| {
                    let mut r = vec![0.0; x.len()];
                    for (sv, w) in line_rule() {
                        let pt = [a[0] + sv * (b[0] - a[0]), a[1] + sv * (b[1] - a[1])];
                        let (qv, _) = eq.shape(eq.tri.bary(pt));
                        let (vv, vg) = ev.shape(ev.tri.bary(pt));
                        let (sv_, sg) = es.shape(es.tri.bary(pt));
                        let (_, h) = vec_at(&ev, &vv, &vg, &|k| dn[k]);
                        let (av, _) = vec_at(&es, &sv_, &sg, &|k| an[k]);
                        let f = ident_plus(&h);
                        let (j, fi) = (det(&f), inv(&f));
                        let jfn = [0, 1].map(|c| j * (fi[0][c] * n[0] + fi[1][c] * n[1]));
                        let p: f64 = (0..x.len()).map(|k| x[k] * qv[k]).sum();
                        let p_old: f64 = (0..x.len()).map(|k| pn[k] * qv[k]).sum();
                        for k in 0..x.len() {
                            r[k] += w * len * qv[k] * (alpha * (p - p_old) + rho * (av[0] * jfn[0] + av[1] * jfn[1]));
                        }
                    }
                    r
                }),
            });
        }
        let psys = System { n: nq, pieces, fixed: p_fixed.clone() };
        let p_new = psys.solve(p_it.clone(), &mut lu_p);

        // Structure under the fluid traction.
        let mut load = vec![0.0; ns];
        for ie in &iface {
            let (eq, ev, es) = (&qe.by_tri[&ie.fluid], &fe.by_tri[&ie.fluid], &se.by_tri[&ie.solid]);
            let vg_ = vec_dofs(ev, 0);
            let sg_ = vec_dofs(es, 0);
            for (sv, w) in line_rule() {
                let pt = [ie.a[0] + sv * (ie.b[0] - ie.a[0]), ie.a[1] + sv * (ie.b[1] - ie.a[1])];
                let (qv, _) = eq.shape(eq.tri.bary(pt));
                let (vv, vg) = ev.shape(ev.tri.bary(pt));
                let (svv, _) = es.shape(es.tri.bary(pt));
                let (_, g) = vec_at(ev, &vv, &vg, &|k| u_next[vg_[k]]);
                let (_, h) = vec_at(ev, &vv, &vg, &|k| d_next[vg_[k]]);
                let p: f64 = eq.dofs.iter().zip(&qv).map(|(&d, b)| p_new[d] * b).sum();
                let sig = first_piola(&g, p, &ident_plus(&h), rho_nu);
                let tv = [0, 1].map(|a| sig[a][0] * ie.n[0] + sig[a][1] * ie.n[1]);
                for i in 0..6 {
                    for a in 0..2 {
                        load[sg_[2 * i + a]] += w * ie.len * tv[a] * svv[i];
                    }
                }
            }
        }
        let mut pieces = Vec::new();
        for e in se.iter() {
            let e = e.clone();
            let gl = vec_dofs(&e, 0);
            let hist: Vec<f64> = gl.iter().map(|&g| 2.0 * s.d_s.values[g] - s.d_s_prev.values[g]).collect();
            let (mu, lambda, b) = (ph.mu_s, ph.lambda_s, ph.b_s);
            pieces.push(Piece {
                dofs: gl.clone(),
                f: Box::new(move |x: &[f64]| {
                    let mut r = vec![0.0; 12];
                    for &(l, w) in &rule {
                        let wa = w * e.tri.area;
                        let (vv, vg) = e.shape(l);
                        let (dv, g) = vec_at(&e, &vv, &vg, &|k| x[k]);
                        let (hv, _) = vec_at(&e, &vv, &vg, &|k| hist[k]);
                        let pk = solid_piola(&g, mu, lambda);
                        for i in 0..6 {
                            for a in 0..2 {
                                r[2 * i + a] +=
                                    wa * ((rho_s * (dv[a] - hv[a]) / (dt * dt) - b[a]) * vv[i] + pk[a][0] * vg[i][0] + pk[a][1] * vg[i][1]);
                            }
                        }
                    }
                    r
                }),
            });
        }
        let load_c = load.clone();
        pieces.push(Piece { dofs: (0..ns).collect(), f: Box::new(move |_x: &[f64]| load_c.clone()) });
        let ssys = System { n: ns, pieces, fixed: s_fixed.clone() };
        let d_new = ssys.solve(d_it.clone(), &mut lu_s);

        let inc = rel(&norm_q, &p_new, &p_it).max(rel(&norm_s, &d_new, &d_it));
        p_it = p_new;
        d_it = d_new;
        if inc < prob.time.eps {
            return (u_next, p_it, d_next, d_it, it);
        }
    }
    panic!("reference fixed point did not converge");
}
