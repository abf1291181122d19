use std::collections::BTreeMap;

use super::{CellEdge, CellFace, ConvexCell, PartitionError, Plane};
use crate::geom::{newell_normal, solve3, Point3, Vec3};

/// Face polygon during clipping. `plane` indexes the working plane list;
/// ids at or beyond `n_input` belong to the auxiliary bounding box.
#[derive(Debug, Clone)]
struct Poly {
    plane: usize,
    pts: Vec<Point3>,
}

fn box_corners(lo: Point3, hi: Point3) -> [Point3; 8] {
    let mut c = [Vec3::ZERO; 8];
    for (i, ci) in c.iter_mut().enumerate() {
        *ci = Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        );
    }
    c
}

/// The six box faces as (plane, corner loop) with loops counter-clockwise
/// seen from outside.
fn box_faces(lo: Point3, hi: Point3) -> Vec<(Plane, [usize; 4])> {
    let raw: [(Vec3, f64, [usize; 4]); 6] = [
        (-Vec3::X, -lo.x, [0, 4, 6, 2]),
        (Vec3::X, hi.x, [1, 3, 7, 5]),
        (-Vec3::Y, -lo.y, [0, 1, 5, 4]),
        (Vec3::Y, hi.y, [2, 6, 7, 3]),
        (-Vec3::Z, -lo.z, [0, 2, 3, 1]),
        (Vec3::Z, hi.z, [4, 5, 7, 6]),
    ];
    raw.iter()
        .map(|&(n, d, l)| (Plane { normal: n, offset: d }, l))
        .collect()
}

fn clip_poly(poly: &Poly, plane: &Plane, eps: f64) -> Vec<Point3> {
    let n = poly.pts.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let a = poly.pts[i];
        let b = poly.pts[(i + 1) % n];
        let da = plane.signed_distance(a);
        let db = plane.signed_distance(b);
        let a_in = da <= eps;
        let b_in = db <= eps;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn dedupe(points: &[Point3], eps: f64) -> Vec<Point3> {
    let mut out: Vec<Point3> = Vec::new();
    for &p in points {
        if !out.iter().any(|q| q.distance(p) <= eps) {
            out.push(p);
        }
    }
    out
}

fn order_cap(points: Vec<Point3>, normal: Vec3) -> Vec<Point3> {
    let c = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) / points.len() as f64;
    let helper = if normal.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let u = normal.cross(helper).normalize();
    let v = normal.cross(u);
    let mut keyed: Vec<(f64, Point3)> = points
        .into_iter()
        .map(|p| {
            let d = p - c;
            (d.dot(v).atan2(d.dot(u)), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p).collect()
}

fn clip(polys: Vec<Poly>, plane: &Plane, id: usize, eps: f64) -> Result<Vec<Poly>, PartitionError> {
    let mut out = Vec::with_capacity(polys.len() + 1);
    let mut cap = Vec::new();
    let mut coplanar = false;
    for poly in &polys {
        let pts = clip_poly(poly, plane, eps);
        if pts.len() < 3 {
            continue;
        }
        let on_plane = pts.iter().all(|&p| plane.signed_distance(p).abs() <= eps);
        if on_plane {
            let n = newell_normal(&pts);
            if n.dot(plane.normal) > 0.0 {
                coplanar = true;
            } else {
                // an opposite face lies in the plane: the solid is flat
                return Err(PartitionError::Empty);
            }
        }
        cap.extend(pts.iter().copied().filter(|&p| plane.signed_distance(p).abs() <= eps));
        out.push(Poly { plane: poly.plane, pts });
    }
    if out.is_empty() {
        return Err(PartitionError::Empty);
    }
    if !coplanar {
        let cap = dedupe(&cap, eps);
        if cap.len() >= 3 {
            out.push(Poly {
                plane: id,
                pts: order_cap(cap, plane.normal),
            });
        }
    }
    Ok(out)
}

fn clip_all(planes: &[Plane], lo: Point3, hi: Point3, eps: f64) -> Result<Vec<Poly>, PartitionError> {
    let corners = box_corners(lo, hi);
    let mut polys: Vec<Poly> = box_faces(lo, hi)
        .into_iter()
        .enumerate()
        .map(|(k, (_, l))| Poly {
            plane: planes.len() + k,
            pts: l.iter().map(|&i| corners[i]).collect(),
        })
        .collect();
    for (id, plane) in planes.iter().enumerate() {
        polys = clip(polys, plane, id, eps)?;
    }
    Ok(polys)
}

/// Builds edges and face-edge references from CCW face loops.
fn finish(
    planes: Vec<Plane>,
    vertices: Vec<Point3>,
    loops: Vec<(usize, Vec<usize>)>,
    aabb: Option<(Point3, Point3)>,
) -> Result<ConvexCell, PartitionError> {
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (f, (_, l)) in loops.iter().enumerate() {
        for i in 0..l.len() {
            let (a, b) = (l[i], l[(i + 1) % l.len()]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let mut edges = Vec::with_capacity(edge_faces.len());
    let mut edge_index = BTreeMap::new();
    for (&(a, b), fs) in &edge_faces {
        if fs.len() != 2 {
            return Err(PartitionError::Topology(format!(
                "edge ({a}, {b}) has {} incident faces",
                fs.len()
            )));
        }
        edge_index.insert((a, b), edges.len());
        edges.push(CellEdge {
            vertices: [a, b],
            faces: [fs[0], fs[1]],
        });
    }
    let faces = loops
        .into_iter()
        .map(|(plane, l)| {
            let edges = (0..l.len())
                .map(|i| {
                    let (a, b) = (l[i], l[(i + 1) % l.len()]);
                    edge_index[&(a.min(b), a.max(b))]
                })
                .collect();
            CellFace { plane, vertices: l, edges }
        })
        .collect();
    Ok(ConvexCell {
        planes,
        vertices,
        edges,
        faces,
        aabb,
    })
}

/// Axis-aligned box as a cell. Vertex `i` has bit 0/1/2 of `i` selecting
/// max over min on x/y/z; coordinates are copied exactly from the corners.
pub fn box_cell(min: Point3, max: Point3) -> Result<ConvexCell, PartitionError> {
    if !(min.x < max.x && min.y < max.y && min.z < max.z) || !min.is_finite() || !max.is_finite() {
        return Err(PartitionError::DegenerateBox {
            min: min.to_array(),
            max: max.to_array(),
        });
    }
    let corners = box_corners(min, max);
    let faces = box_faces(min, max);
    let planes = faces.iter().map(|(p, _)| *p).collect();
    let loops = faces
        .iter()
        .enumerate()
        .map(|(k, (_, l))| (k, l.to_vec()))
        .collect();
    finish(planes, corners.to_vec(), loops, Some((min, max)))
}

/// Intersects the half-spaces `n·p ≤ d` by successively clipping a bounding
/// box. Redundant planes are dropped; vertices where more than three planes
/// meet are merged. Final vertex positions are re-solved from their three
/// best-conditioned incident planes.
pub fn cell_from_planes(planes: &[Plane]) -> Result<ConvexCell, PartitionError> {
    if planes.len() < 4 {
        return Err(PartitionError::Unbounded);
    }
    let n_input = planes.len();
    let scale = 1.0 + planes.iter().map(|p| p.offset.abs()).fold(0.0, f64::max);

    // Coarse pass: a huge box tells bounded from unbounded and gives the extent.
    let half = 1e4 * scale;
    let rough = clip_all(planes, Vec3::splat(-half), Vec3::splat(half), 1e-12 * half)?;
    if rough.iter().any(|p| p.plane >= n_input) {
        return Err(PartitionError::Unbounded);
    }
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for p in rough.iter().flat_map(|p| p.pts.iter()) {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let diam = lo.distance(hi);
    if !(diam > 1e-12 * scale) {
        return Err(PartitionError::Empty);
    }

    // Fine pass in a box fitted to the cell, with the final tolerance.
    let c = (lo + hi) * 0.5;
    let eps = 1e-9 * diam;
    let polys = clip_all(planes, c - Vec3::splat(diam), c + Vec3::splat(diam), eps)?;
    if polys.iter().any(|p| p.plane >= n_input) {
        return Err(PartitionError::Unbounded);
    }

    let mut verts: Vec<Point3> = Vec::new();
    let mut loops: Vec<(usize, Vec<usize>)> = Vec::new();
    for poly in &polys {
        let mut l: Vec<usize> = Vec::new();
        for &p in &poly.pts {
            let idx = match verts.iter().position(|q| q.distance(p) <= eps) {
                Some(i) => i,
                None => {
                    verts.push(p);
                    verts.len() - 1
                }
            };
            if l.last() != Some(&idx) {
                l.push(idx);
            }
        }
        while l.len() > 1 && l.first() == l.last() {
            l.pop();
        }
        if l.len() >= 3 {
            loops.push((poly.plane, l));
        }
    }

    // Drop vertices that ended up with fewer than three faces (points on an
    // edge left over from clipping noise).
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (plane, l) in loops.iter() {
        for &v in l {
            if !incident[v].contains(plane) {
                incident[v].push(*plane);
            }
        }
    }
    for (_, l) in loops.iter_mut() {
        l.retain(|&v| incident[v].len() >= 3);
    }
    loops.retain(|(_, l)| l.len() >= 3);

    // Re-solve positions and compact vertex indices.
    let mut remap = vec![usize::MAX; verts.len()];
    let mut vertices = Vec::new();
    for (_, l) in &loops {
        for &v in l {
            if remap[v] != usize::MAX {
                continue;
            }
            let inc = &incident[v];
            let mut best: Option<(f64, Point3)> = None;
            for i in 0..inc.len() {
                for j in i + 1..inc.len() {
                    for k in j + 1..inc.len() {
                        let (a, b, cpl) = (planes[inc[i]], planes[inc[j]], planes[inc[k]]);
                        let det = a.normal.dot(b.normal.cross(cpl.normal)).abs();
                        if best.is_some_and(|(d, _)| d >= det) {
                            continue;
                        }
                        if let Some(x) = solve3(
                            [a.normal, b.normal, cpl.normal],
                            [a.offset, b.offset, cpl.offset],
                        ) {
                            best = Some((det, x));
                        }
                    }
                }
            }
            remap[v] = vertices.len();
            vertices.push(best.map(|(_, x)| x).unwrap_or(verts[v]));
        }
    }

    // Keep only planes that own a face, in input order.
    let mut used: Vec<usize> = loops.iter().map(|(p, _)| *p).collect();
    used.sort_unstable();
    used.dedup();
    if used.len() < 4 {
        return Err(PartitionError::Empty);
    }
    let plane_remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let out_planes: Vec<Plane> = used.iter().map(|&p| planes[p]).collect();
    let mut out_loops: Vec<(usize, Vec<usize>)> = loops
        .into_iter()
        .map(|(p, l)| (plane_remap[&p], l.into_iter().map(|v| remap[v]).collect()))
        .collect();
    out_loops.sort_by_key(|(p, _)| *p);
    finish(out_planes, vertices, out_loops, None)
}
