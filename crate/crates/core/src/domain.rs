//! Regular n-gon parameter domains, mean value coordinates, and the
//! concentric-ring triangulation.

use std::f64::consts::TAU;

use thiserror::Error;

/// Inside-polygon tolerance.
pub const INSIDE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("an n-gon needs at least 3 sides, got {0}")]
    InvalidSides(usize),
    #[error("resolution must be at least 1, got {0}")]
    InvalidResolution(usize),
    #[error("point ({u}, {v}) lies outside the polygon")]
    Outside { u: f64, v: f64 },
    #[error("degenerate polygon")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGonDomain {
    pub n: usize,
    /// Corner `i` at angle `2πi/n` on the unit circle.
    pub corners: Vec<[f64; 2]>,
}

impl NGonDomain {
    pub fn new(n: usize) -> Result<Self, DomainError> {
        if n < 3 {
            return Err(DomainError::InvalidSides(n));
        }
        let corners = (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        Ok(Self { n, corners })
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.corners)
    }
}

pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p[0] * q[1] - p[1] * q[0];
    }
    0.5 * a
}

/// Generalized barycentric coordinates, one weight per polygon corner.
#[derive(Debug, Clone, PartialEq)]
pub struct BaryCoords(pub Vec<f64>);

impl BaryCoords {
    pub fn indicator(n: usize, i: usize) -> Self {
        let mut l = vec![0.0; n];
        l[i] = 1.0;
        BaryCoords(l)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reproduced point `Σ λ_i · q_i` for 2D values.
    pub fn combine2(&self, pts: &[[f64; 2]]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (l, p) in self.0.iter().zip(pts) {
            out[0] += l * p[0];
            out[1] += l * p[1];
        }
        out
    }
}

/// Mean value coordinates of `p` with respect to the convex polygon `poly`
/// (counter-clockwise). On an edge they reduce to linear interpolation, at a
/// corner to the indicator.
pub fn mean_value_weights(poly: &[[f64; 2]], p: [f64; 2]) -> Result<Vec<f64>, DomainError> {
    let n = poly.len();
    if n < 3 {
        return Err(DomainError::Degenerate);
    }
    let s: Vec<[f64; 2]> = poly.iter().map(|c| [c[0] - p[0], c[1] - p[1]]).collect();
    let r: Vec<f64> = s.iter().map(|v| v[0].hypot(v[1])).collect();
    let scale = r.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let mut area = vec![0.0; n];
    let mut dot = vec![0.0; n];
    for i in 0..n {
        let j = (i + 1) % n;
        area[i] = s[i][0] * s[j][1] - s[i][1] * s[j][0];
        dot[i] = s[i][0] * s[j][0] + s[i][1] * s[j][1];
        let e = [poly[j][0] - poly[i][0], poly[j][1] - poly[i][1]];
        let len = e[0].hypot(e[1]);
        if area[i] < -INSIDE_EPS * len {
            return Err(DomainError::Outside { u: p[0], v: p[1] });
        }
    }
    let mut w = vec![0.0; n];
    for i in 0..n {
        if r[i] <= INSIDE_EPS * scale {
            w[i] = 1.0;
            return Ok(w);
        }
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if area[i].abs() <= INSIDE_EPS * r[i] * r[j] && dot[i] < 0.0 {
            w[i] = r[j] / (r[i] + r[j]);
            w[j] = r[i] / (r[i] + r[j]);
            return Ok(w);
        }
    }
    // tan(α_i / 2) for the angle at p spanned by corners i and i+1
    let tan_half: Vec<f64> = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            area[i] / (r[i] * r[j] + dot[i])
        })
        .collect();
    let mut sum = 0.0;
    for i in 0..n {
        let prev = (i + n - 1) % n;
        w[i] = (tan_half[prev] + tan_half[i]) / r[i];
        sum += w[i];
    }
    for wi in &mut w {
        *wi /= sum;
    }
    Ok(w)
}

pub fn mean_value_coords(domain: &NGonDomain, p: [f64; 2]) -> Result<BaryCoords, DomainError> {
    mean_value_weights(&domain.corners, p).map(BaryCoords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Interior,
    Corner(usize),
    /// `j`-th of the `r - 1` points strictly inside side `side` (from corner
    /// `side` toward corner `side + 1`), `1 ≤ j < r`.
    Side { side: usize, j: usize },
}

impl VertexKind {
    pub fn is_boundary(self) -> bool {
        !matches!(self, VertexKind::Interior)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainVertex {
    pub uv: [f64; 2],
    pub bary: BaryCoords,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMesh {
    pub domain: NGonDomain,
    pub resolution: usize,
    pub vertices: Vec<DomainVertex>,
    /// Counter-clockwise in the domain plane.
    pub triangles: Vec<[u32; 3]>,
}

impl DomainMesh {
    pub fn n(&self) -> usize {
        self.domain.n
    }

    pub fn vertex_count(n: usize, r: usize) -> usize {
        1 + n * r * (r + 1) / 2
    }

    pub fn triangle_count(n: usize, r: usize) -> usize {
        n * r * r
    }

    /// Index of corner vertex `i`.
    pub fn corner_index(&self, i: usize) -> usize {
        ring_index(self.n(), self.resolution, i, 0)
    }
}

/// Vertex `j` (`0 ≤ j < k`) on side `i` of ring `k`; ring 0 is the center.
fn ring_index(n: usize, k: usize, i: usize, j: usize) -> usize {
    if k == 0 {
        return 0;
    }
    let (i, j) = if j == k { ((i + 1) % n, 0) } else { (i, j) };
    1 + n * k * (k - 1) / 2 + i * k + j
}

/// Concentric-ring triangulation: ring `k` is the polygon scaled by `k/r`
/// with `k` points per side.
pub fn triangulate_ngon(n: usize, r: usize) -> Result<DomainMesh, DomainError> {
    let domain = NGonDomain::new(n)?;
    if r < 1 {
        return Err(DomainError::InvalidResolution(r));
    }
    let c = &domain.corners;
    let mut vertices = Vec::with_capacity(DomainMesh::vertex_count(n, r));
    vertices.push(DomainVertex {
        uv: [0.0, 0.0],
        bary: BaryCoords(vec![1.0 / n as f64; n]),
        kind: VertexKind::Interior,
    });
    for k in 1..=r {
        for i in 0..n {
            let a = c[i];
            let b = c[(i + 1) % n];
            for j in 0..k {
                let wa = (k - j) as f64 / r as f64;
                let wb = j as f64 / r as f64;
                let uv = [wa * a[0] + wb * b[0], wa * a[1] + wb * b[1]];
                let (bary, kind) = if k < r {
                    (mean_value_coords(&domain, uv)?, VertexKind::Interior)
                } else if j == 0 {
                    (BaryCoords::indicator(n, i), VertexKind::Corner(i))
                } else {
                    let mut l = vec![0.0; n];
                    l[i] = wa;
                    l[(i + 1) % n] = wb;
                    (BaryCoords(l), VertexKind::Side { side: i, j })
                };
                vertices.push(DomainVertex { uv, bary, kind });
            }
        }
    }
    let mut triangles = Vec::with_capacity(DomainMesh::triangle_count(n, r));
    for k in 1..=r {
        for i in 0..n {
            let outer = |j: usize| ring_index(n, k, i, j) as u32;
            let inner = |j: usize| ring_index(n, k - 1, i, j) as u32;
            for j in 0..k {
                triangles.push([outer(j), outer(j + 1), inner(j)]);
                if j + 1 < k {
                    triangles.push([inner(j), outer(j + 1), inner(j + 1)]);
                }
            }
        }
    }
    Ok(DomainMesh {
        domain,
        resolution: r,
        vertices,
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn valences(m: &DomainMesh) -> Vec<usize> {
        let mut nb: Vec<std::collections::BTreeSet<u32>> = vec![Default::default(); m.vertices.len()];
        for t in &m.triangles {
            for e in 0..3 {
                nb[t[e] as usize].insert(t[(e + 1) % 3]);
                nb[t[(e + 1) % 3] as usize].insert(t[e]);
            }
        }
        nb.iter().map(|s| s.len()).collect()
    }

    #[test]
    fn center_corner_and_edge_midpoint() {
        for n in 3..9 {
            let d = NGonDomain::new(n).unwrap();
            let l = mean_value_coords(&d, [0.0, 0.0]).unwrap();
            for w in &l.0 {
                assert!((w - 1.0 / n as f64).abs() < 1e-14);
            }
            let l = mean_value_coords(&d, d.corners[2]).unwrap();
            assert_eq!(l, BaryCoords::indicator(n, 2));
            let (a, b) = (d.corners[1], d.corners[2]);
            let l = mean_value_coords(&d, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]).unwrap();
            assert!((l.0[1] - 0.5).abs() < 1e-12 && (l.0[2] - 0.5).abs() < 1e-12);
        }
        assert!(mean_value_coords(&NGonDomain::new(4).unwrap(), [2.0, 0.0]).is_err());
    }

    #[test]
    fn small_counts() {
        let m = triangulate_ngon(3, 1).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len()), (4, 3));
        let m = triangulate_ngon(5, 2).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len()), (16, 20));
        assert!(triangulate_ngon(2, 3).is_err());
        assert!(triangulate_ngon(4, 0).is_err());
    }

    #[test]
    fn counts_areas_and_valences() {
        for n in 3..=8 {
            for r in 1..=6 {
                let m = triangulate_ngon(n, r).unwrap();
                assert_eq!(m.vertices.len(), DomainMesh::vertex_count(n, r));
                assert_eq!(m.triangles.len(), DomainMesh::triangle_count(n, r));
                let mut total = 0.0;
                for t in &m.triangles {
                    let p: Vec<[f64; 2]> = t.iter().map(|&i| m.vertices[i as usize].uv).collect();
                    let a = polygon_area(&p);
                    assert!(a > 0.0);
                    total += a;
                }
                let area = m.domain.area();
                assert!((total - area).abs() <= 1e-9 * area);
                let val = valences(&m);
                for (v, dv) in m.vertices.iter().enumerate() {
                    match dv.kind {
                        VertexKind::Interior if v == 0 => assert_eq!(val[v], n),
                        VertexKind::Interior => assert_eq!(val[v], 6),
                        VertexKind::Side { .. } => assert_eq!(val[v], 4),
                        VertexKind::Corner(_) if r >= 2 => assert_eq!(val[v], 3),
                        VertexKind::Corner(_) => {}
                    }
                }
            }
        }
    }

    #[test]
    fn every_edge_shared_once_or_twice_consistently() {
        let m = triangulate_ngon(6, 4).unwrap();
        let mut directed = std::collections::BTreeSet::new();
        for t in &m.triangles {
            for e in 0..3 {
                assert!(directed.insert((t[e], t[(e + 1) % 3])), "edge used twice in one direction");
            }
        }
        for &(a, b) in &directed {
            let boundary = m.vertices[a as usize].kind.is_boundary() && m.vertices[b as usize].kind.is_boundary();
            assert!(boundary || directed.contains(&(b, a)));
        }
    }

    #[test]
    fn boundary_coordinates_are_exact() {
        let m = triangulate_ngon(5, 4).unwrap();
        for v in &m.vertices {
            if let VertexKind::Side { side, j } = v.kind {
                let nz: Vec<usize> = (0..5).filter(|&i| v.bary.0[i] != 0.0).collect();
                assert_eq!(nz, {
                    let mut s = vec![side, (side + 1) % 5];
                    s.sort();
                    s
                });
                assert_eq!(v.bary.0[(side + 1) % 5], j as f64 / 4.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]
        #[test]
        fn partition_of_unity_and_linear_precision(n in 3usize..9, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            // random convex combination of the center and one sector's corners
            let d = NGonDomain::new(n).unwrap();
            let i = ((c * n as f64) as usize).min(n - 1);
            let (s, t) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let p0 = d.corners[i];
            let p1 = d.corners[(i + 1) % n];
            let p = [s * p0[0] + t * p1[0], s * p0[1] + t * p1[1]];
            let l = mean_value_coords(&d, p).unwrap();
            let sum: f64 = l.0.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(l.0.iter().all(|&w| w >= -1e-12));
            let q = l.combine2(&d.corners);
            prop_assert!((q[0] - p[0]).abs() < 1e-10 && (q[1] - p[1]).abs() < 1e-10);
        }
    }
}
