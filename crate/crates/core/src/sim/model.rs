//! Surface models: vertices in the grapple frame {C}, optional triangles.
//!
//! File format is a strict OBJ subset: `v x y z` and `f i j k` lines
//! (1-based indices), `#` comments and blank lines. Anything else is rejected.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::registration::spatial::{ClosestHit, ClosestPointIndex};

/// Declared discretization floor of a triangulated model, m.
pub const MESH_RESOLUTION: f64 = 5e-4;

const MOCKUP_OBJ: &str = include_str!("../../data/mockup.obj");

#[derive(Clone, Debug)]
pub struct SurfaceModel {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    resolution: f64,
    index: ClosestPointIndex,
}

impl SurfaceModel {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "surface model needs at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite vertex {v:?}")));
        }
        for (k, f) in faces.iter().enumerate() {
            if let Some(&i) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "face {k} references vertex {i}, only {} exist",
                    vertices.len()
                )));
            }
        }
        if !spans_volume(&vertices) {
            return Err(Error::InvalidArgument("surface model vertices are coplanar".into()));
        }
        let resolution = if faces.is_empty() {
            median_nn_spacing(&vertices)
        } else {
            MESH_RESOLUTION
        };
        let index = ClosestPointIndex::new(&vertices, &faces);
        Ok(Self { vertices, faces, resolution, index })
    }

    /// The shipped asymmetric micro-satellite mock-up.
    pub fn mockup() -> Self {
        Self::from_obj_str(MOCKUP_OBJ).expect("bundled mock-up is valid")
    }

    pub fn from_obj_str(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tok = line.split_whitespace();
            let kind = tok.next().unwrap_or_default();
            let rest: Vec<&str> = tok.collect();
            let bad = |msg: &str| Error::Config(format!("OBJ line {}: {msg}: `{line}`", lineno + 1));
            if rest.len() != 3 {
                return Err(bad("expected exactly three fields"));
            }
            match kind {
                "v" => {
                    let mut p = [0.0; 3];
                    for (slot, s) in p.iter_mut().zip(&rest) {
                        *slot = s.parse().map_err(|_| bad("bad coordinate"))?;
                    }
                    vertices.push(Vector3::from(p));
                }
                "f" => {
                    let mut f = [0usize; 3];
                    for (slot, s) in f.iter_mut().zip(&rest) {
                        let i: usize = s.parse().map_err(|_| bad("bad vertex index"))?;
                        if i == 0 {
                            return Err(bad("indices are 1-based"));
                        }
                        *slot = i - 1;
                    }
                    faces.push(f);
                }
                _ => return Err(bad("only `v` and `f` records are supported")),
            }
        }
        Self::new(vertices, faces)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_obj_str(&text)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn has_faces(&self) -> bool {
        !self.faces.is_empty()
    }

    /// Mesh resolution for triangle models, median nearest-neighbour
    /// vertex spacing for point models.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn triangle(&self, i: usize) -> [Vector3<f64>; 3] {
        let f = self.faces[i];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Unnormalized normal `(b − a) × (c − a)`; length is twice the area.
    pub fn face_normal_raw(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, i: usize) -> f64 {
        0.5 * self.face_normal_raw(i).norm()
    }

    /// Closest model point (on a triangle or a vertex) to `p`.
    pub fn closest(&self, p: &Vector3<f64>) -> ClosestHit {
        self.index.closest(p).expect("model is non-empty")
    }

    pub fn closest_brute_force(&self, p: &Vector3<f64>) -> ClosestHit {
        self.index.closest_brute_force(p).expect("model is non-empty")
    }

    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn spans_volume(vertices: &[Vector3<f64>]) -> bool {
    let n = vertices.len() as f64;
    let c = vertices.iter().sum::<Vector3<f64>>() / n;
    let cov: Matrix3<f64> = vertices.iter().map(|v| (v - c) * (v - c).transpose()).sum::<Matrix3<f64>>() / n;
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    hi > 0.0 && lo > 1e-12 * hi
}

fn median_nn_spacing(vertices: &[Vector3<f64>]) -> f64 {
    let mut d: Vec<f64> = vertices
        .iter()
        .enumerate()
        .map(|(i, a)| {
            vertices
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}
