//! Triangle-mesh domains: BVH closest point plus angle-weighted pseudo-normal sign.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore};

use super::bvh::Bvh;
use super::{BoundaryQuery, Domain};
use crate::error::{Error, Result};
use crate::vector::{add, axpy, cross, dist2, dot, norm, normalize, scale, sub, Aabb, Vector};

/// Boundary samples are kept within this absolute signed distance of the surface.
pub const BOUNDARY_BAND: f64 = 0.01;

/// Which feature of a triangle the closest point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Vertex(u8),
    Edge(u8, u8),
    Face,
}

#[derive(Debug, Clone)]
pub struct MeshDomain {
    vertices: Vec<Vector<3>>,
    triangles: Vec<[u32; 3]>,
    face_normals: Vec<Vector<3>>,
    vertex_normals: Vec<Vector<3>>,
    edge_normals: HashMap<(u32, u32), Vector<3>>,
    areas: Vec<f64>,
    bvh: Bvh<3>,
    bbox: Aabb<3>,
}

impl MeshDomain {
    pub fn new(vertices: Vec<Vector<3>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().find(|v| !crate::vector::is_finite(v)) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&i) = tri.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {i}, mesh has {}",
                    vertices.len()
                )));
            }
        }

        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut vertex_normals = vec![[0.0; 3]; vertices.len()];
        let mut edge_normals: HashMap<(u32, u32), Vector<3>> = HashMap::new();
        for tri in &triangles {
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let n = cross(&sub(&b, &a), &sub(&c, &a));
            let len = norm(&n);
            areas.push(0.5 * len);
            let n = if len > 0.0 {
                scale(&n, 1.0 / len)
            } else {
                [0.0; 3]
            };
            face_normals.push(n);
            for k in 0..3 {
                let v = tri[k];
                let p = vertices[v as usize];
                let e1 = normalize(&sub(&vertices[tri[(k + 1) % 3] as usize], &p));
                let e2 = normalize(&sub(&vertices[tri[(k + 2) % 3] as usize], &p));
                let angle = dot(&e1, &e2).clamp(-1.0, 1.0).acos();
                vertex_normals[v as usize] = axpy(&vertex_normals[v as usize], angle, &n);
                let key = edge_key(v, tri[(k + 1) % 3]);
                let e = edge_normals.entry(key).or_insert([0.0; 3]);
                *e = add(e, &n);
            }
        }

        let boxes: Vec<Aabb<3>> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i as usize])))
            .collect();
        let bvh = Bvh::build(&boxes);
        let bbox = Aabb::from_points(&vertices).inflated(0.01);
        Ok(Self {
            vertices,
            triangles,
            face_normals,
            vertex_normals,
            edge_normals,
            areas,
            bvh,
            bbox,
        })
    }

    pub fn vertices(&self) -> &[Vector<3>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [Vector<3>; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Closest surface point and triangle index (BVH accelerated).
    pub fn closest(&self, p: &Vector<3>) -> (usize, Vector<3>, f64) {
        let hit = self
            .bvh
            .closest(p, |t| {
                let [a, b, c] = self.triangle(t);
                let (q, _) = closest_point_on_triangle(p, &a, &b, &c);
                (q, dist2(p, &q))
            })
            .expect("mesh is non-empty");
        (hit.primitive, hit.point, hit.dist2.sqrt())
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: &Vector<3>) -> f64 {
        let q = self.query(p);
        if q.inside {
            -q.distance
        } else {
            q.distance
        }
    }

    fn pseudo_normal(&self, t: usize, feature: Feature) -> Vector<3> {
        let tri = self.triangles[t];
        match feature {
            Feature::Face => self.face_normals[t],
            Feature::Vertex(k) => self.vertex_normals[tri[k as usize] as usize],
            Feature::Edge(i, j) => self.edge_normals[&edge_key(tri[i as usize], tri[j as usize])],
        }
    }

    pub fn from_obj_str(src: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim();
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::InvalidMesh(format!("line {}: {e}", lineno + 1)))?;
                    if coords.len() != 3 {
                        return Err(Error::InvalidMesh(format!(
                            "line {}: vertex needs 3 coordinates",
                            lineno + 1
                        )));
                    }
                    vertices.push([coords[0], coords[1], coords[2]]);
                }
                Some("f") => {
                    let idx: Vec<u32> = parts
                        .map(|tok| parse_obj_index(tok, vertices.len()))
                        .collect::<Option<_>>()
                        .ok_or_else(|| {
                            Error::InvalidMesh(format!("line {}: bad face record", lineno + 1))
                        })?;
                    if idx.len() < 3 {
                        return Err(Error::InvalidMesh(format!(
                            "line {}: face needs at least 3 vertices",
                            lineno + 1
                        )));
                    }
                    // Fan triangulation for polygons.
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_obj_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    /// Axis-aligned cube `[0, 1]^3` with outward-facing triangles.
    pub fn unit_cube() -> Self {
        Self::boxed([0.0; 3], [1.0; 3])
    }

    pub fn boxed(min: Vector<3>, max: Vector<3>) -> Self {
        let vertices: Vec<Vector<3>> = (0..8)
            .map(|i| {
                [
                    if i & 1 == 0 { min[0] } else { max[0] },
                    if i & 2 == 0 { min[1] } else { max[1] },
                    if i & 4 == 0 { min[2] } else { max[2] },
                ]
            })
            .collect();
        let quads = [
            [0, 2, 3, 1], // z = min
            [4, 5, 7, 6], // z = max
            [0, 1, 5, 4], // y = min
            [2, 6, 7, 3], // y = max
            [0, 4, 6, 2], // x = min
            [1, 3, 7, 5], // x = max
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self::new(vertices, triangles).expect("box mesh is valid")
    }

    /// Subdivided icosahedron projected onto the sphere of `radius` at the origin.
    pub fn icosphere(radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector<3>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(normalize)
        .collect();
        let mut triangles: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector<3>>| -> u32 {
                *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                    let m = normalize(&scale(&add(&verts[a as usize], &verts[b as usize]), 0.5));
                    verts.push(m);
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for [a, b, c] in triangles {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        let vertices = vertices.iter().map(|v| scale(v, radius)).collect();
        Self::new(vertices, triangles).expect("icosphere is valid")
    }
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `v`, `v/vt`, `v//vn`, `v/vt/vn`, with negative (relative) indices allowed.
fn parse_obj_index(tok: &str, n_vertices: usize) -> Option<u32> {
    let first = tok.split('/').next()?;
    let i: i64 = first.parse().ok()?;
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        n_vertices as i64 + i
    } else {
        return None;
    };
    (idx >= 0).then_some(idx as u32)
}

/// Closest point on triangle `abc` to `p`, with the feature it lies on.
pub fn closest_point_on_triangle(
    p: &Vector<3>,
    a: &Vector<3>,
    b: &Vector<3>,
    c: &Vector<3>,
) -> (Vector<3>, Feature) {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (axpy(a, v, &ab), Feature::Edge(0, 1));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (axpy(a, w, &ac), Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (axpy(b, w, &sub(c, b)), Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (add(&axpy(a, v, &ab), &scale(&ac, w)), Feature::Face)
}

impl Domain<3> for MeshDomain {
    fn query(&self, p: &Vector<3>) -> BoundaryQuery<3> {
        let (t, q, distance) = self.closest(p);
        let [a, b, c] = self.triangle(t);
        let (_, feature) = closest_point_on_triangle(p, &a, &b, &c);
        let n = self.pseudo_normal(t, feature);
        let inside = distance > 0.0 && dot(&sub(p, &q), &n) < 0.0;
        BoundaryQuery {
            closest: q,
            distance,
            inside,
        }
    }

    fn bounding_box(&self) -> Aabb<3> {
        self.bbox
    }

    /// Area-weighted surface points pushed off the surface by at most
    /// [`BOUNDARY_BAND`], accepted when `|sdf| <= BOUNDARY_BAND`.
    fn sample_boundary(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<3>>> {
        let mut cdf = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidMesh("mesh has zero surface area".into()));
        }
        let mut out = Vec::with_capacity(n);
        let mut candidates = 0u64;
        while out.len() < n {
            candidates += 1;
            let u = rng.random::<f64>() * acc;
            let t = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            let [a, b, c] = self.triangle(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let on = add(
                &add(&scale(&a, 1.0 - s), &scale(&b, s * (1.0 - r2))),
                &scale(&c, s * r2),
            );
            let offset = (2.0 * rng.random::<f64>() - 1.0) * BOUNDARY_BAND;
            let p = axpy(&on, offset, &self.face_normals[t]);
            if self.signed_distance(&p).abs() <= BOUNDARY_BAND {
                out.push(p);
            }
            let rate = out.len() as f64 / candidates as f64;
            if candidates >= super::REJECTION_CANDIDATE_LIMIT
                && rate < super::REJECTION_MIN_ACCEPTANCE
            {
                return Err(Error::DegenerateDomain { candidates, rate });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn cube_center_is_inside_at_half_distance() {
        let m = MeshDomain::unit_cube();
        assert!(m.contains(&[0.5, 0.5, 0.5]));
        assert!((m.distance_to_boundary(&[0.5, 0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(!m.contains(&[1.5, 0.5, 0.5]));
        assert!(!m.contains(&[1.0, 0.5, 0.5]));
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_features() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(
            closest_point_on_triangle(&[-1.0, -1.0, 0.3], &a, &b, &c).1,
            Feature::Vertex(0)
        );
        assert_eq!(
            closest_point_on_triangle(&[0.5, -1.0, 0.0], &a, &b, &c).1,
            Feature::Edge(0, 1)
        );
        assert_eq!(
            closest_point_on_triangle(&[1.0, 1.0, 0.0], &a, &b, &c).1,
            Feature::Edge(1, 2)
        );
        let (q, f) = closest_point_on_triangle(&[0.2, 0.2, 5.0], &a, &b, &c);
        assert_eq!(f, Feature::Face);
        assert!(dist2(&q, &[0.2, 0.2, 0.0]) < 1e-30);
    }

    #[test]
    fn obj_round_trip_and_polygons() {
        let src = "# quad pyramid\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0.5 0.5 1\nf 4 3 2 1\nf 1/1 2/2 5/5\nf 2//1 3//1 5//1\nf 3 4 5\nf -2 -5 -1\n";
        let m = MeshDomain::from_obj_str(src).unwrap();
        assert_eq!(m.triangles().len(), 6);
        assert!(m.contains(&[0.5, 0.5, 0.2]));
        let again = MeshDomain::from_obj_str(&m.to_obj_string()).unwrap();
        assert_eq!(again.triangles(), m.triangles());
        assert!(MeshDomain::from_obj_str("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(MeshDomain::from_obj_str("v 0 0\n").is_err());
    }

    #[test]
    fn icosphere_is_a_ball() {
        let m = MeshDomain::icosphere(1.0, 3);
        assert!(m.contains(&[0.0; 3]));
        let d = m.distance_to_boundary(&[0.0; 3]).unwrap();
        assert!(d > 0.98 && d <= 1.0);
        assert!(!m.contains(&[0.0, 0.0, 1.01]));
    }

    #[test]
    fn boundary_samples_stay_in_band() {
        let m = MeshDomain::icosphere(0.8, 2);
        let mut rng = substream(4, 0, 0, 0);
        let pts = m.sample_boundary(500, &mut rng).unwrap();
        assert_eq!(pts.len(), 500);
        assert!(pts
            .iter()
            .all(|p| m.signed_distance(p).abs() <= BOUNDARY_BAND));
    }
}
