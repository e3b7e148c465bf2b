use lapwave_core::coeffs::Bc;
use lapwave_core::mesh::{build_cell_mesh, export_mesh, import_mesh, BoundaryTag};
use proptest::prelude::*;

#[test]
fn areas_tile_the_unit_cell() {
    for h in [0.1, 0.05, 0.02] {
        let (mesh, _) = build_cell_mesh(h, Bc::Neumann).unwrap();
        let total: f64 = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
        assert!((total - 1.0).abs() < 1e-12, "h = {h}: area {total}");
    }
}

#[test]
fn triangles_are_counterclockwise() {
    let (mesh, _) = build_cell_mesh(0.05, Bc::Neumann).unwrap();
    for [a, b, c] in &mesh.triangles {
        let (pa, pb, pc) = (mesh.vertices[*a], mesh.vertices[*b], mesh.vertices[*c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        assert!(det > 0.0);
    }
}

#[test]
fn periodic_pairs_sit_at_equal_heights_on_opposite_sides() {
    let (mesh, _) = build_cell_mesh(0.04, Bc::Neumann).unwrap();
    assert!(!mesh.left_right_pairs.is_empty());
    for &(l, r) in &mesh.left_right_pairs {
        assert!((mesh.vertices[l][0] + 0.5).abs() < 1e-12);
        assert!((mesh.vertices[r][0] - 0.5).abs() < 1e-12);
        assert!((mesh.vertices[l][1] - mesh.vertices[r][1]).abs() < 1e-12);
    }
}

#[test]
fn right_boundary_nodes_share_their_partner_dof() {
    let (mesh, basis) = build_cell_mesh(0.04, Bc::Neumann).unwrap();
    for &(l, r) in &mesh.left_right_pairs {
        assert_eq!(basis.dof_of_node[l], basis.dof_of_node[r]);
    }
}

#[test]
fn dirichlet_drops_exactly_the_wall_dofs() {
    let (mesh, neumann) = build_cell_mesh(0.05, Bc::Neumann).unwrap();
    let (_, dirichlet) = build_cell_mesh(0.05, Bc::Dirichlet).unwrap();
    let walls = mesh
        .boundary_tags
        .iter()
        .zip(&mesh.vertices)
        .filter(|(t, v)| {
            (matches!(t, BoundaryTag::Top | BoundaryTag::Bottom)
                || v[1] == 0.0
                || v[1] == 1.0)
                && v[0] < 0.5 - 1e-12
        })
        .count();
    assert_eq!(neumann.m_prime, dirichlet.m_prime + walls);
    for (node, d) in dirichlet.dof_of_node.iter().enumerate() {
        let x2 = mesh.vertices[node][1];
        if x2 == 0.0 || x2 == 1.0 {
            assert!(d.is_none());
        }
    }
}

#[test]
fn dof_count_scales_like_h_to_the_minus_two() {
    // A mesh at h = 0.02 carries about (1/0.02)² · 2/√3 nodes.
    let (_, basis) = build_cell_mesh(0.02, Bc::Neumann).unwrap();
    let expect = 2500.0 * 2.0 / 3.0f64.sqrt();
    assert!((basis.m_prime as f64) > 0.8 * expect);
    assert!((basis.m_prime as f64) < 1.2 * expect);
}

#[test]
fn locate_returns_a_containing_triangle() {
    let (mesh, _) = build_cell_mesh(0.07, Bc::Neumann).unwrap();
    for i in 0..23 {
        for j in 0..17 {
            let x1 = -0.5 + i as f64 / 22.0;
            let x2 = j as f64 / 16.0;
            let (tri, bary) = mesh.locate(x1, x2);
            assert!(bary.iter().all(|b| *b >= -1e-9), "({x1}, {x2}) escaped");
            let [a, b, c] = mesh.triangles[tri];
            let rx1: f64 = bary[0] * mesh.vertices[a][0]
                + bary[1] * mesh.vertices[b][0]
                + bary[2] * mesh.vertices[c][0];
            let rx2: f64 = bary[0] * mesh.vertices[a][1]
                + bary[1] * mesh.vertices[b][1]
                + bary[2] * mesh.vertices[c][1];
            assert!((rx1 - x1).abs() + (rx2 - x2).abs() < 1e-9);
        }
    }
}

#[test]
fn mesh_size_is_validated() {
    assert!(build_cell_mesh(0.0, Bc::Neumann).is_err());
    assert!(build_cell_mesh(0.7, Bc::Neumann).is_err());
    assert!(build_cell_mesh(-0.1, Bc::Neumann).is_err());
}

#[test]
fn export_import_roundtrip() {
    let dir = std::env::temp_dir().join("lapwave-mesh-roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mesh.txt");
    let (mesh, _) = build_cell_mesh(0.1, Bc::Neumann).unwrap();
    export_mesh(&mesh, &path).unwrap();
    let back = import_mesh(&path).unwrap();
    assert_eq!(back.triangles, mesh.triangles);
    assert_eq!(back.n_cols, mesh.n_cols);
    assert_eq!(back.n_rows, mesh.n_rows);
    assert_eq!(back.boundary_tags, mesh.boundary_tags);
    for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn locate_reconstructs_random_points(x1 in -0.5f64..0.5, x2 in 0.0f64..1.0) {
        let (mesh, _) = build_cell_mesh(0.11, Bc::Neumann).unwrap();
        let (tri, bary) = mesh.locate(x1, x2);
        prop_assert!(bary.iter().all(|b| *b >= -1e-9));
        let [a, b, c] = mesh.triangles[tri];
        let rx1 = bary[0] * mesh.vertices[a][0]
            + bary[1] * mesh.vertices[b][0]
            + bary[2] * mesh.vertices[c][0];
        prop_assert!((rx1 - x1).abs() < 1e-9);
    }
}
