//! Closest-point queries against a surface model: a bounding-volume
//! hierarchy over triangles (or bare vertices), and the brute-force scan it
//! must agree with.
//!
//! Ties are broken by the lowest primitive index, in both paths, by
//! comparing `(distance², index)` lexicographically.

use nalgebra::Vector3;

/// Closest point of triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + v * ab;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + w * ac;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Result of a closest-point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub point: Vector3<f64>,
    /// Triangle index for meshes, vertex index for point models.
    pub primitive: usize,
    pub dist_sq: f64,
}

impl ClosestHit {
    fn better_than(&self, other: &ClosestHit) -> bool {
        self.dist_sq < other.dist_sq || (self.dist_sq == other.dist_sq && self.primitive < other.primitive)
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    fn dist_sq(&self, p: &Vector3<f64>) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Closest-point index over the primitives of a surface model.
#[derive(Clone, Debug)]
pub struct ClosestPointIndex {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl ClosestPointIndex {
    /// Builds over triangles when `faces` is non-empty, else over vertices.
    pub fn new(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> Self {
        let mut idx = Self {
            vertices: vertices.to_vec(),
            faces: faces.to_vec(),
            order: Vec::new(),
            nodes: Vec::new(),
        };
        let n = idx.primitive_count();
        idx.order = (0..n).collect();
        if n > 0 {
            let centroids: Vec<Vector3<f64>> = (0..n).map(|i| idx.centroid(i)).collect();
            let mut order = std::mem::take(&mut idx.order);
            idx.build(&mut order, 0, n, &centroids);
            idx.order = order;
        }
        idx
    }

    fn primitive_count(&self) -> usize {
        if self.faces.is_empty() {
            self.vertices.len()
        } else {
            self.faces.len()
        }
    }

    fn centroid(&self, i: usize) -> Vector3<f64> {
        if self.faces.is_empty() {
            self.vertices[i]
        } else {
            let f = self.faces[i];
            (self.vertices[f[0]] + self.vertices[f[1]] + self.vertices[f[2]]) / 3.0
        }
    }

    fn prim_bounds(&self, i: usize) -> Aabb {
        let mut b = Aabb::empty();
        if self.faces.is_empty() {
            b.grow(&self.vertices[i]);
        } else {
            for &v in &self.faces[i] {
                b.grow(&self.vertices[v]);
            }
        }
        b
    }

    fn build(&mut self, order: &mut [usize], start: usize, end: usize, centroids: &[Vector3<f64>]) -> usize {
        let mut bounds = Aabb::empty();
        for &i in &order[start..end] {
            bounds.merge(&self.prim_bounds(i));
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mut cb = Aabb::empty();
        for &i in &order[start..end] {
            cb.grow(&centroids[i]);
        }
        let extent = cb.max - cb.min;
        let axis = extent.imax();
        order[start..end].sort_by(|&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(order, start, mid, centroids);
        let right = self.build(order, mid, end, centroids);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    fn primitive_hit(&self, p: &Vector3<f64>, i: usize) -> ClosestHit {
        let point = if self.faces.is_empty() {
            self.vertices[i]
        } else {
            let f = self.faces[i];
            closest_point_on_triangle(p, &self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]])
        };
        ClosestHit {
            point,
            primitive: i,
            dist_sq: (point - p).norm_squared(),
        }
    }

    /// Exhaustive scan over every primitive.
    pub fn closest_brute_force(&self, p: &Vector3<f64>) -> Option<ClosestHit> {
        let mut best: Option<ClosestHit> = None;
        for i in 0..self.primitive_count() {
            let h = self.primitive_hit(p, i);
            if best.as_ref().is_none_or(|b| h.better_than(b)) {
                best = Some(h);
            }
        }
        best
    }

    /// Hierarchy-pruned query; returns the same hit as the brute-force scan.
    pub fn closest(&self, p: &Vector3<f64>) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if let Some(b) = &best {
                // Equal distances are kept: a lower index may still be inside.
                if node.bounds().dist_sq(p) > b.dist_sq {
                    continue;
                }
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &i in &self.order[*start..*end] {
                        let h = self.primitive_hit(p, i);
                        if best.as_ref().is_none_or(|b| h.better_than(b)) {
                            best = Some(h);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().dist_sq(p);
                    let dr = self.nodes[*right].bounds().dist_sq(p);
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }
}
