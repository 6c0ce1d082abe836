use std::f64::consts::PI;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{signed_area, BoundaryEdge, BoundaryTag, Mesh, Point, Subdomain, Triangle};
use crate::error::{FsiError, Result};

/// Channel-with-cylinder-and-bar geometry. Lengths share one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub channel_length: f64,
    pub channel_height: f64,
    pub cylinder_center: Point,
    pub cylinder_radius: f64,
    pub bar_length: f64,
    pub bar_thickness: f64,
    /// Edge density: target edge length near the interface is `channel_height / resolution`.
    pub resolution: usize,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            channel_length: 2.5,
            channel_height: 0.41,
            cylinder_center: [0.2, 0.2],
            cylinder_radius: 0.05,
            bar_length: 0.35,
            bar_thickness: 0.02,
            resolution: 16,
        }
    }
}

impl GeometryParams {
    pub fn with_resolution(resolution: usize) -> Self {
        GeometryParams { resolution, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel_length", self.channel_length),
            ("channel_height", self.channel_height),
            ("cylinder_radius", self.cylinder_radius),
            ("bar_length", self.bar_length),
            ("bar_thickness", self.bar_thickness),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FsiError::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if self.resolution == 0 {
            return Err(FsiError::Geometry("resolution must be a positive integer".into()));
        }
        if self.bar_thickness >= 2.0 * self.cylinder_radius {
            return Err(FsiError::Geometry(format!(
                "bar thickness {} is not smaller than the cylinder diameter {}",
                self.bar_thickness,
                2.0 * self.cylinder_radius
            )));
        }
        let [cx, cy] = self.cylinder_center;
        let r = self.cylinder_radius;
        if cx - r <= 0.0 || cy - r <= 0.0 || cy + r >= self.channel_height {
            return Err(FsiError::Geometry("cylinder does not fit inside the channel".into()));
        }
        if self.tip_x() >= self.channel_length {
            return Err(FsiError::Geometry("bar tip reaches the outlet".into()));
        }
        Ok(())
    }

    /// Half-angle of the circular arc where the bar is clamped.
    pub fn attachment_angle(&self) -> f64 {
        (0.5 * self.bar_thickness / self.cylinder_radius).asin()
    }

    pub fn tip_x(&self) -> f64 {
        self.cylinder_center[0] + self.cylinder_radius + self.bar_length
    }

    /// Target edge length along the interface.
    pub fn near_spacing(&self) -> f64 {
        self.channel_height / self.resolution as f64
    }

    fn far_spacing(&self) -> f64 {
        3.0 * self.near_spacing()
    }
}

fn segments(len: f64, h: f64) -> usize {
    ((len / h).round() as usize).max(1)
}

fn polyline(a: Point, b: Point, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let s = i as f64 / n as f64;
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        })
        .collect()
}

/// Generates the two-subdomain benchmark mesh.
pub fn generate_benchmark_mesh(params: &GeometryParams) -> Result<Mesh> {
    params.validate()?;
    let h = params.near_spacing();
    let hf = params.far_spacing();
    let (l, hgt) = (params.channel_length, params.channel_height);
    let [cx, cy] = params.cylinder_center;
    let r = params.cylinder_radius;
    let th0 = params.attachment_angle();
    let y_lo = cy - 0.5 * params.bar_thickness;
    let y_hi = cy + 0.5 * params.bar_thickness;
    let x_root = cx + r * th0.cos();
    let x_tip = params.tip_x();

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| -> Result<FixedVertexHandle> {
        cdt.insert(Point2::new(p[0], p[1]))
            .map_err(|e| FsiError::Geometry(format!("point insertion failed: {e:?}")))
    };
    let add_loop = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, pts: &[Point], closed: bool| -> Result<Vec<FixedVertexHandle>> {
        let hs = pts.iter().map(|&p| insert(cdt, p)).collect::<Result<Vec<_>>>()?;
        let m = if closed { hs.len() } else { hs.len() - 1 };
        for i in 0..m {
            cdt.add_constraint(hs[i], hs[(i + 1) % hs.len()]);
        }
        Ok(hs)
    };

    // Outer channel boundary, counter-clockwise.
    let corners = [[0.0, 0.0], [l, 0.0], [l, hgt], [0.0, hgt]];
    let mut outer = Vec::new();
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        outer.extend(polyline(a, b, segments(len, hf)));
    }
    add_loop(&mut cdt, &outer, true)?;

    // Cylinder polygon: wall arc from th0 to 2pi - th0, clamped arc from -th0 to th0.
    let n_wall = segments(r * (2.0 * PI - 2.0 * th0), h).max(24);
    let n_root = segments(2.0 * r * th0, h).max(2);
    let mut circle = Vec::new();
    for i in 0..n_wall {
        let a = th0 + (2.0 * PI - 2.0 * th0) * i as f64 / n_wall as f64;
        circle.push([cx + r * a.cos(), cy + r * a.sin()]);
    }
    for i in 0..n_root {
        let a = -th0 + 2.0 * th0 * i as f64 / n_root as f64;
        circle.push([cx + r * a.cos(), cy + r * a.sin()]);
    }
    // circle[0] is the upper attachment point, circle[n_wall] the lower one.
    let circle_h = add_loop(&mut cdt, &circle, true)?;
    let lower = circle_h[n_wall];
    let upper = circle_h[0];

    // Bar boundary (the part not on the cylinder).
    let len = x_tip - x_root;
    let mut bar = polyline([x_root, y_lo], [x_tip, y_lo], segments(len, h));
    bar.extend(polyline([x_tip, y_lo], [x_tip, y_hi], segments(params.bar_thickness, h)));
    bar.extend(polyline([x_tip, y_hi], [x_root, y_hi], segments(len, h)));
    bar.push([x_root, y_hi]);
    let bar_h = bar[1..bar.len() - 1]
        .iter()
        .map(|&p| insert(&mut cdt, p))
        .collect::<Result<Vec<_>>>()?;
    let mut chain = vec![lower];
    chain.extend(bar_h);
    chain.push(upper);
    for w in chain.windows(2) {
        cdt.add_constraint(w[0], w[1]);
    }

    let max_area = 0.5 * hf * hf;
    cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(25.0))
            .with_max_allowed_area(max_area),
    );

    // Classify faces.
    let inside_circle = |p: Point| point_in_polygon(p, &circle);
    let in_bar = |p: Point| p[0] > x_root - r && p[0] < x_tip && p[1] > y_lo && p[1] < y_hi;
    let mut node_map = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let pts = vs.map(|v| {
            let p = v.position();
            [p.x, p.y]
        });
        let c = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        if inside_circle(c) {
            continue;
        }
        let sub = if in_bar(c) { Subdomain::Solid } else { Subdomain::Fluid };
        let mut ids = [0; 3];
        for (k, v) in vs.iter().enumerate() {
            let old = v.fix().index();
            if node_map[old] == usize::MAX {
                node_map[old] = nodes.len();
                nodes.push(pts[k]);
            }
            ids[k] = node_map[old];
        }
        if signed_area(nodes[ids[0]], nodes[ids[1]], nodes[ids[2]]) < 0.0 {
            ids.swap(1, 2);
        }
        triangles.push(Triangle { nodes: ids, subdomain: sub });
    }

    let boundary_edges = tag_edges(&nodes, &triangles, l, hgt);
    Mesh::new(nodes, triangles, boundary_edges)
}

fn tag_edges(nodes: &[Point], triangles: &[Triangle], l: f64, hgt: f64) -> Vec<BoundaryEdge> {
    use std::collections::BTreeMap;
    let mut owners: BTreeMap<[usize; 2], Vec<Subdomain>> = BTreeMap::new();
    for t in triangles {
        for le in super::LOCAL_EDGES {
            let (a, b) = (t.nodes[le[0]], t.nodes[le[1]]);
            owners.entry(super::key(a, b)).or_default().push(t.subdomain);
        }
    }
    let tol = 1e-9 * l.max(hgt);
    let mut out = Vec::new();
    for (k, subs) in owners {
        let tag = match subs.as_slice() {
            [Subdomain::Fluid, Subdomain::Solid] | [Subdomain::Solid, Subdomain::Fluid] => BoundaryTag::FsiInterface,
            [Subdomain::Solid] => BoundaryTag::SolidDirichlet,
            [Subdomain::Fluid] => {
                let [a, b] = [nodes[k[0]], nodes[k[1]]];
                if a[0].abs() < tol && b[0].abs() < tol {
                    BoundaryTag::Inlet
                } else if (a[0] - l).abs() < tol && (b[0] - l).abs() < tol {
                    BoundaryTag::Outlet
                } else {
                    BoundaryTag::Walls
                }
            }
            _ => continue,
        };
        out.push(BoundaryEdge { nodes: k, tag });
    }
    out
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Boundary tags for the four sides of a rectangle mesh.
#[derive(Debug, Clone, Copy)]
pub struct RectangleTags {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl RectangleTags {
    pub fn uniform(tag: BoundaryTag) -> Self {
        RectangleTags { left: tag, right: tag, bottom: tag, top: tag }
    }

    /// Channel convention: inlet on the left, outlet on the right, walls elsewhere.
    pub fn channel() -> Self {
        RectangleTags {
            left: BoundaryTag::Inlet,
            right: BoundaryTag::Outlet,
            bottom: BoundaryTag::Walls,
            top: BoundaryTag::Walls,
        }
    }
}

/// Structured `nx` by `ny` triangulation of `[0, lx] x [0, ly]` in one subdomain.
pub fn generate_rectangle_mesh(
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    subdomain: Subdomain,
    tags: RectangleTags,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
        return Err(FsiError::Geometry("rectangle needs positive extents and cell counts".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push(Triangle { nodes: [a, b, c], subdomain });
            triangles.push(Triangle { nodes: [a, c, d], subdomain });
        }
    }
    let mut edges = Vec::new();
    for i in 0..nx {
        edges.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: tags.bottom });
        edges.push(BoundaryEdge { nodes: [id(i, ny), id(i + 1, ny)], tag: tags.top });
    }
    for j in 0..ny {
        edges.push(BoundaryEdge { nodes: [id(0, j), id(0, j + 1)], tag: tags.left });
        edges.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], tag: tags.right });
    }
    Mesh::new(nodes, triangles, edges)
}
