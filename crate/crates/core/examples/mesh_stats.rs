use fsirom::mesh::{generate_benchmark_mesh, BoundaryTag, GeometryParams, Subdomain};

fn main() {
    for r in [4, 8, 16, 32] {
        let m = generate_benchmark_mesh(&GeometryParams::with_resolution(r)).unwrap();
        println!(
            "res {r}: nodes {} tris {} fluid {} solid {} iface_nodes {} min_angle {:.1} fluid_area {:.5} dir {}",
            m.nodes().len(),
            m.triangles().len(),
            m.cells_of(Subdomain::Fluid).count(),
            m.cells_of(Subdomain::Solid).count(),
            m.interface_nodes().len(),
            m.min_angle_deg(),
            m.subdomain_area(Subdomain::Fluid),
            m.nodes_on(BoundaryTag::SolidDirichlet).len()
        );
    }
}
