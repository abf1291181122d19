use isoproj::partition::{cell_from_planes, ConvexCell, Plane};
use isoproj::Vec3;
use proptest::prelude::*;

fn det(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    a.dot(b.cross(c))
}

/// Brute force: intersect every plane triple, keep the feasible points.
fn oracle_vertices(planes: &[Plane], tol: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    let n = planes.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (planes[i].normal, planes[j].normal, planes[k].normal);
                let d = det(a, b, c);
                if d.abs() < 1e-9 {
                    continue;
                }
                // Cramer's rule, column replacement by offsets
                let p = (b.cross(c) * planes[i].offset + c.cross(a) * planes[j].offset + a.cross(b) * planes[k].offset) / d;
                if planes.iter().all(|pl| pl.signed_distance(p) <= tol) && !out.iter().any(|q| q.distance(p) <= tol) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn same_sets(cell: &ConvexCell, oracle: &[Vec3], tol: f64) {
    assert_eq!(cell.vertices.len(), oracle.len(), "{:?} vs {:?}", cell.vertices, oracle);
    for v in &cell.vertices {
        assert!(oracle.iter().any(|o| o.distance(*v) <= tol), "vertex {v:?} not in oracle");
    }
}

fn euler(c: &ConvexCell) -> i64 {
    c.vertices.len() as i64 - c.edges.len() as i64 + c.faces.len() as i64
}

#[test]
fn open_box_with_two_tilted_caps() {
    let raw = [
        [-1.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.4, 0.0, 1.0, 1.1],
        [0.0, -0.3, 1.0, 0.9],
    ];
    let planes: Vec<Plane> = raw.iter().map(|&a| Plane::from_array(a).unwrap()).collect();
    let cell = cell_from_planes(&planes).unwrap();
    let oracle = oracle_vertices(&planes, 1e-9);
    same_sets(&cell, &oracle, 1e-9);
    assert_eq!(euler(&cell), 2);
    // every edge is shared by exactly the two faces it lists
    for (e, edge) in cell.edges.iter().enumerate() {
        for f in edge.faces {
            assert!(cell.faces[f].edges.contains(&e));
        }
    }
}

fn unit(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos())
}

prop_compose! {
    /// An octahedron-like set of 8 bounding planes with jittered normals and
    /// offsets, plus a few random cuts through the interior.
    fn bounded_config()(
        jitter in prop::collection::vec((-0.35f64..0.35, -0.35f64..0.35, 0.5f64..1.5), 8),
        cuts in prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.0f64..std::f64::consts::PI, 0.2f64..1.0), 0..5),
    ) -> Vec<Plane> {
        let mut planes = Vec::new();
        for (i, (a, b, d)) in jitter.into_iter().enumerate() {
            let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
            let n = Vec3::new(s(1) + a, s(2) + b, s(4) + 0.5 * (a - b));
            planes.push(Plane::new(n, d).unwrap());
        }
        for (t, p, d) in cuts {
            planes.push(Plane::new(unit(t, p), d).unwrap());
        }
        planes
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn matches_triple_enumeration(planes in bounded_config()) {
        let cell = cell_from_planes(&planes).unwrap();
        let oracle = oracle_vertices(&planes, 1e-9);
        prop_assert_eq!(cell.vertices.len(), oracle.len());
        for v in &cell.vertices {
            prop_assert!(oracle.iter().any(|o| o.distance(*v) <= 1e-9));
        }
        prop_assert_eq!(euler(&cell), 2);
        let eps = cell.eps();
        for v in &cell.vertices {
            prop_assert!(cell.contains(*v, eps));
        }
    }
}
