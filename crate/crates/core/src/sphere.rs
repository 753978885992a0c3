//! Cube-sphere raster of the sphere at infinity, limit-cell marking and
//! connected-component labeling of the unmarked cells.
//!
//! The raster is the equiangular cube sphere: each face is split into an
//! `n × n` grid that is uniform in angle, so cells are close to equal area
//! and the grid lines of adjacent faces meet exactly along the seams. Cell
//! areas and sub-cell quadrature weights are exact spherical areas.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::moebius::{MoebiusMap, SpherePoint};
use crate::vec3::{self, Vec3};
use crate::verdict::Verdict;

pub const MIN_RESOLUTION: usize = 2;
/// Default dilation in units of the mean cell diagonal.
pub const DEFAULT_DILATION_DIAGONALS: f64 = 1.5;
/// Fraction of representative points that must agree for a component image.
pub const IMAGE_AGREEMENT: f64 = 0.95;

/// `(major axis, sign, first tangent axis, second tangent axis)` per face.
const FACES: [(usize, f64, usize, usize); 6] = [
    (0, 1.0, 1, 2),
    (0, -1.0, 1, 2),
    (1, 1.0, 2, 0),
    (1, -1.0, 2, 0),
    (2, 1.0, 0, 1),
    (2, -1.0, 0, 1),
];

/// A closed spherical cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Cap {
    pub center: Vec3,
    pub half_angle: f64,
}

impl Cap {
    pub fn new(center: Vec3, half_angle: f64) -> Self {
        Cap {
            center: vec3::normalize(center),
            half_angle,
        }
    }

    /// The cap bounded by the circle through three distinct points, on the
    /// side containing `inside`.
    pub fn through(points: [Vec3; 3], inside: Vec3) -> Result<Cap> {
        let [a, b, c] = points.map(vec3::normalize);
        let normal = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let len = vec3::norm(normal);
        if len <= 1e-12 * vec3::norm(vec3::sub(b, a)) * vec3::norm(vec3::sub(c, a)) || len == 0.0 {
            return Err(Error::Degenerate("boundary points are collinear".into()));
        }
        let mut n = vec3::scale(normal, 1.0 / len);
        let mut h = vec3::dot(n, a);
        if vec3::dot(n, vec3::normalize(inside)) < h {
            n = vec3::scale(n, -1.0);
            h = -h;
        }
        Ok(Cap {
            center: n,
            half_angle: h.clamp(-1.0, 1.0).acos(),
        })
    }

    /// Image of the cap under a Möbius map.
    pub fn image(&self, f: &MoebiusMap) -> Result<Cap> {
        let pts = self.boundary_points(3);
        let img = [0, 1, 2].map(|k| f.apply(&pts[k]).unit());
        Cap::through(img, f.apply(&SpherePoint::from_unit(self.center)).unit())
    }

    /// Angular gap between two caps; negative when they overlap.
    pub fn separation(&self, other: &Cap) -> f64 {
        vec3::angle(self.center, other.center) - self.half_angle - other.half_angle
    }

    /// Whether `other` lies inside this cap with room `margin` to spare.
    pub fn contains_cap(&self, other: &Cap, margin: f64) -> bool {
        vec3::angle(self.center, other.center) + other.half_angle + margin <= self.half_angle
    }

    /// `half_angle - distance(center, p)`: positive inside.
    pub fn margin(&self, p: &SpherePoint) -> f64 {
        self.half_angle - vec3::angle(self.center, p.unit())
    }

    pub fn contains(&self, p: &SpherePoint, tol: f64) -> bool {
        self.margin(p) >= -tol
    }

    pub fn complement(&self) -> Cap {
        Cap {
            center: vec3::scale(self.center, -1.0),
            half_angle: PI - self.half_angle,
        }
    }

    /// `count` points evenly spaced on the boundary circle.
    pub fn boundary_points(&self, count: usize) -> Vec<SpherePoint> {
        let e1 = vec3::orthogonal(self.center);
        let e2 = vec3::cross(self.center, e1);
        let (s, c) = self.half_angle.sin_cos();
        (0..count)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / count as f64;
                let dir = vec3::add(vec3::scale(e1, phi.cos()), vec3::scale(e2, phi.sin()));
                SpherePoint::from_unit(vec3::add(vec3::scale(self.center, c), vec3::scale(dir, s)))
            })
            .collect()
    }
}

/// A quadrature node: unit vector and spherical area weight.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub point: Vec3,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub face: usize,
    pub i: usize,
    pub j: usize,
    pub center: Vec3,
    pub area: f64,
    /// 2×2 sub-cell nodes; weights sum to `area`.
    pub nodes: [Node; 4],
}

#[derive(Debug)]
pub struct SphereRaster {
    n: usize,
    cells: Vec<Cell>,
    /// Gnomonic coordinates of the grid lines, exactly antisymmetric.
    tangents: Vec<f64>,
    vertices: Vec<Vec3>,
    cell_vertices: Vec<[usize; 4]>,
    /// `neighbors[c][k]` shares edge `k` (vertices `k`, `k+1`) with `c`.
    neighbors: Vec<[usize; 4]>,
}

fn cube_point(face: usize, x: f64, y: f64) -> Vec3 {
    let (k, s, a, b) = FACES[face];
    let mut p = [0.0; 3];
    p[k] = s;
    p[a] = x;
    p[b] = y;
    p
}

/// Solid angle of the gnomonic rectangle `[x1,x2] × [y1,y2]` on a face.
fn gnomonic_area(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    let f = |x: f64, y: f64| (x * y / (1.0 + x * x + y * y).sqrt()).atan();
    f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)
}

fn tangent_at(n: usize, twice_index: usize) -> f64 {
    // grid line at index twice_index/2 (half-integers allowed)
    let u = -FRAC_PI_4 + twice_index as f64 * FRAC_PI_2 / (2 * n) as f64;
    u.tan()
}

impl SphereRaster {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < MIN_RESOLUTION {
            return Err(Error::Precondition(format!(
                "raster resolution {n} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        // Half-step table, antisymmetric so seams coincide bit for bit.
        let m = 4 * n;
        let mut half = vec![0.0; m + 1];
        for t in 0..=m / 2 {
            let v = tangent_at(2 * n, t);
            half[t] = v;
            half[m - t] = -v;
        }
        half[0] = -1.0;
        half[m] = 1.0;
        half[m / 2] = 0.0;
        let tangents: Vec<f64> = (0..=n).map(|i| half[4 * i]).collect();

        let mut vertex_ids: HashMap<[u64; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let mut vertex_id = |p: Vec3| -> usize {
            let key = p.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
            *vertex_ids.entry(key).or_insert_with(|| {
                vertices.push(vec3::normalize(p));
                vertices.len() - 1
            })
        };

        let mut cells = Vec::with_capacity(6 * n * n);
        let mut cell_vertices = Vec::with_capacity(6 * n * n);
        for face in 0..6 {
            for j in 0..n {
                for i in 0..n {
                    let (x0, x1) = (tangents[i], tangents[i + 1]);
                    let (y0, y1) = (tangents[j], tangents[j + 1]);
                    let (xm, ym) = (half[4 * i + 2], half[4 * j + 2]);
                    let (xq, yq) = ([half[4 * i + 1], half[4 * i + 3]], [half[4 * j + 1], half[4 * j + 3]]);
                    let sub_x = [(x0, xm), (xm, x1)];
                    let sub_y = [(y0, ym), (ym, y1)];
                    let mut nodes = [Node {
                        point: [0.0; 3],
                        weight: 0.0,
                    }; 4];
                    for (q, node) in nodes.iter_mut().enumerate() {
                        let (sx, sy) = (q % 2, q / 2);
                        node.point = vec3::normalize(cube_point(face, xq[sx], yq[sy]));
                        node.weight = gnomonic_area(sub_x[sx].0, sub_x[sx].1, sub_y[sy].0, sub_y[sy].1);
                    }
                    let area = nodes.iter().map(|nd| nd.weight).sum();
                    cells.push(Cell {
                        face,
                        i,
                        j,
                        center: vec3::normalize(cube_point(face, xm, ym)),
                        area,
                        nodes,
                    });
                    cell_vertices.push([
                        vertex_id(cube_point(face, x0, y0)),
                        vertex_id(cube_point(face, x1, y0)),
                        vertex_id(cube_point(face, x1, y1)),
                        vertex_id(cube_point(face, x0, y1)),
                    ]);
                }
            }
        }

        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (c, vs) in cell_vertices.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (vs[k], vs[(k + 1) % 4]);
                edges.entry((a.min(b), a.max(b))).or_default().push((c, k));
            }
        }
        let mut neighbors = vec![[usize::MAX; 4]; cells.len()];
        for sides in edges.values() {
            if let [(c1, k1), (c2, k2)] = sides[..] {
                neighbors[c1][k1] = c2;
                neighbors[c2][k2] = c1;
            } else {
                unreachable!("cube-sphere edge shared by {} cells", sides.len());
            }
        }

        Ok(Arc::new(SphereRaster {
            n,
            cells,
            tangents,
            vertices,
            cell_vertices,
            neighbors,
        }))
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn neighbors(&self, id: usize) -> &[usize; 4] {
        &self.neighbors[id]
    }

    pub fn cell_vertices(&self, id: usize) -> &[usize; 4] {
        &self.cell_vertices[id]
    }

    pub fn vertex(&self, id: usize) -> Vec3 {
        self.vertices[id]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// `m × m` sub-cell quadrature nodes of a cell with exact areas.
    pub fn sub_nodes(&self, id: usize, m: usize) -> Vec<Node> {
        let cell = &self.cells[id];
        let du = FRAC_PI_2 / self.n as f64;
        let lines = |idx: usize| -> Vec<f64> {
            (0..=m)
                .map(|k| match k {
                    0 => self.tangents[idx],
                    k if k == m => self.tangents[idx + 1],
                    k => (-FRAC_PI_4 + (idx as f64 + k as f64 / m as f64) * du).tan(),
                })
                .collect()
        };
        let mid = |idx: usize, k: usize| (-FRAC_PI_4 + (idx as f64 + (k as f64 + 0.5) / m as f64) * du).tan();
        let (xs, ys) = (lines(cell.i), lines(cell.j));
        let mut out = Vec::with_capacity(m * m);
        for b in 0..m {
            for a in 0..m {
                out.push(Node {
                    point: vec3::normalize(cube_point(cell.face, mid(cell.i, a), mid(cell.j, b))),
                    weight: gnomonic_area(xs[a], xs[a + 1], ys[b], ys[b + 1]),
                });
            }
        }
        out
    }

    /// Cells whose centers lie in a cap.
    pub fn cells_in_cap(&self, cap: &Cap) -> Vec<usize> {
        let c = cap.half_angle.cos();
        (0..self.cells.len())
            .filter(|&id| vec3::dot(self.cells[id].center, cap.center) >= c)
            .collect()
    }

    /// Mean angular cell width.
    pub fn cell_size(&self) -> f64 {
        (4.0 * PI / self.cells.len() as f64).sqrt()
    }

    pub fn cell_diagonal(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.cell_size()
    }

    pub fn default_dilation(&self) -> f64 {
        DEFAULT_DILATION_DIAGONALS * self.cell_diagonal()
    }

    /// Index of the cell containing the direction `v`.
    pub fn locate(&self, v: Vec3) -> usize {
        let ax = [v[0].abs(), v[1].abs(), v[2].abs()];
        let k = if ax[0] >= ax[1] && ax[0] >= ax[2] {
            0
        } else if ax[1] >= ax[2] {
            1
        } else {
            2
        };
        let face = 2 * k + usize::from(v[k] < 0.0);
        let (_, _, a, b) = FACES[face];
        let x = v[a] / ax[k];
        let y = v[b] / ax[k];
        let i = self.grid_index(x);
        let j = self.grid_index(y);
        (face * self.n + j) * self.n + i
    }

    fn grid_index(&self, x: f64) -> usize {
        // binary search on the exact grid-line table
        let t = &self.tangents;
        match t.binary_search_by(|probe| probe.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(idx) => idx.min(self.n - 1),
            Err(idx) => idx.saturating_sub(1).min(self.n - 1),
        }
    }

    /// Cells whose centers lie within angular distance `radius` of `v`,
    /// grown from the containing cell.
    pub fn cells_near(&self, v: Vec3, radius: f64, stamp: &mut [u32], generation: u32, out: &mut Vec<usize>) {
        out.clear();
        let start = self.locate(v);
        let mut queue = VecDeque::from([start]);
        stamp[start] = generation;
        out.push(start);
        let cos_r = radius.cos();
        while let Some(c) = queue.pop_front() {
            for &nb in &self.neighbors[c] {
                if stamp[nb] == generation {
                    continue;
                }
                stamp[nb] = generation;
                if vec3::dot(self.cells[nb].center, v) >= cos_r {
                    out.push(nb);
                    queue.push_back(nb);
                }
            }
        }
    }
}

/// Marks every cell whose center lies within `radius` of a sample or which
/// contains a sample.
pub fn mark_limit_cells(raster: &SphereRaster, samples: &[SpherePoint], radius: f64) -> Vec<bool> {
    let mut marked = vec![false; raster.len()];
    let mut stamp = vec![0u32; raster.len()];
    let mut scratch = Vec::new();
    for (k, p) in samples.iter().enumerate() {
        let generation = (k as u32).wrapping_add(1);
        if generation == 0 {
            stamp.iter_mut().for_each(|s| *s = 0);
        }
        raster.cells_near(p.unit(), radius, &mut stamp, generation.max(1), &mut scratch);
        for &c in &scratch {
            marked[c] = true;
        }
    }
    marked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JordanState {
    Jordan,
    NotJordan,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JordanFlag {
    pub state: JordanState,
    pub confidence: f64,
    pub euler_characteristic: i64,
    pub pinch_vertices: usize,
    pub boundary_loops: usize,
}

impl JordanFlag {
    pub fn is_jordan(&self) -> bool {
        self.state == JordanState::Jordan
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub id: usize,
    pub cell_count: usize,
    pub area: f64,
    pub jordan: JordanFlag,
    #[serde(skip)]
    pub cells: Vec<usize>,
    #[serde(skip)]
    pub boundary_cells: Vec<usize>,
    /// Cells at least two steps away from the component boundary, evenly
    /// thinned, the most central first; falls back to arbitrary cells for
    /// thin components.
    #[serde(skip)]
    pub representatives: Vec<usize>,
}

/// Labeled complement of the marked cells.
#[derive(Debug, Clone)]
pub struct ComponentChart {
    raster: Arc<SphereRaster>,
    marked: Vec<bool>,
    labels: Vec<Option<usize>>,
    components: Vec<Component>,
    marked_area: f64,
    dilation: f64,
}

const MAX_REPRESENTATIVES: usize = 64;

pub fn label_components(raster: &Arc<SphereRaster>, marked: Vec<bool>) -> ComponentChart {
    label_components_with_dilation(raster, marked, 0.0)
}

/// As [`label_components`], recording the dilation radius used for marking.
pub fn label_components_with_dilation(raster: &Arc<SphereRaster>, marked: Vec<bool>, dilation: f64) -> ComponentChart {
    let mut labels: Vec<Option<usize>> = vec![None; raster.len()];
    let mut components = Vec::new();
    for start in 0..raster.len() {
        if marked[start] || labels[start].is_some() {
            continue;
        }
        let id = components.len();
        let mut cells = vec![start];
        labels[start] = Some(id);
        let mut head = 0;
        while head < cells.len() {
            let c = cells[head];
            head += 1;
            for &nb in raster.neighbors(c) {
                if !marked[nb] && labels[nb].is_none() {
                    labels[nb] = Some(id);
                    cells.push(nb);
                }
            }
        }
        cells.sort_unstable();
        components.push(Component {
            id,
            cell_count: cells.len(),
            area: 0.0,
            jordan: JordanFlag {
                state: JordanState::Uncertain,
                confidence: 0.0,
                euler_characteristic: 0,
                pinch_vertices: 0,
                boundary_loops: 0,
            },
            cells,
            boundary_cells: Vec::new(),
            representatives: Vec::new(),
        });
    }
    for comp in &mut components {
        comp.area = comp.cells.iter().map(|&c| raster.cell(c).area).sum();
        comp.boundary_cells = comp
            .cells
            .iter()
            .copied()
            .filter(|&c| raster.neighbors(c).iter().any(|&nb| labels[nb] != Some(comp.id)))
            .collect();
        comp.jordan = jordan_of(raster, &labels, comp);
        comp.representatives = representatives(raster, &labels, comp);
    }
    let marked_area = marked
        .iter()
        .zip(raster.cells())
        .filter(|(m, _)| **m)
        .map(|(_, c)| c.area)
        .sum();
    ComponentChart {
        raster: Arc::clone(raster),
        marked,
        labels,
        components,
        marked_area,
        dilation,
    }
}

fn jordan_of(raster: &SphereRaster, labels: &[Option<usize>], comp: &Component) -> JordanFlag {
    let id = comp.id;
    let mut verts: HashMap<usize, usize> = HashMap::new();
    let mut edge_count = 0i64;
    let mut boundary: HashMap<usize, Vec<usize>> = HashMap::new();
    for &c in &comp.cells {
        let vs = raster.cell_vertices(c);
        for &v in vs {
            let next = verts.len();
            verts.entry(v).or_insert(next);
        }
        for k in 0..4 {
            let nb = raster.neighbors(c)[k];
            let (a, b) = (vs[k], vs[(k + 1) % 4]);
            if labels[nb] == Some(id) {
                // interior edges are seen twice
                if c < nb {
                    edge_count += 1;
                }
            } else {
                edge_count += 1;
                boundary.entry(a).or_default().push(b);
                boundary.entry(b).or_default().push(a);
            }
        }
    }
    let chi = verts.len() as i64 - edge_count + comp.cells.len() as i64;
    let pinch_vertices = boundary.values().filter(|nbrs| nbrs.len() > 2).count();
    // connected loops of the boundary edge graph
    let mut seen: HashMap<usize, bool> = HashMap::new();
    let mut loops = 0;
    for &v in boundary.keys() {
        if seen.contains_key(&v) {
            continue;
        }
        loops += 1;
        let mut stack = vec![v];
        seen.insert(v, true);
        while let Some(u) = stack.pop() {
            for &w in &boundary[&u] {
                if seen.insert(w, true).is_none() {
                    stack.push(w);
                }
            }
        }
    }
    let boundary_len = boundary.len().max(1);
    let (state, confidence) = if comp.cells.len() < 4 {
        (JordanState::Uncertain, 0.25)
    } else if chi == 1 && loops == 1 {
        let pinch_fraction = pinch_vertices as f64 / boundary_len as f64;
        if pinch_fraction > 0.05 {
            (JordanState::Uncertain, 1.0 - pinch_fraction)
        } else {
            (JordanState::Jordan, 1.0 - pinch_fraction)
        }
    } else if pinch_vertices == 0 {
        (JordanState::NotJordan, 1.0)
    } else {
        (JordanState::Uncertain, 0.5)
    };
    JordanFlag {
        state,
        confidence,
        euler_characteristic: chi,
        pinch_vertices,
        boundary_loops: loops,
    }
}

fn representatives(raster: &SphereRaster, labels: &[Option<usize>], comp: &Component) -> Vec<usize> {
    let deep: Vec<usize> = comp
        .cells
        .iter()
        .copied()
        .filter(|&c| {
            raster.neighbors(c).iter().all(|&nb| {
                labels[nb] == Some(comp.id) && raster.neighbors(nb).iter().all(|&n2| labels[n2] == Some(comp.id))
            })
        })
        .collect();
    let pool = if deep.is_empty() { &comp.cells } else { &deep };
    let step = pool.len().div_ceil(MAX_REPRESENTATIVES).max(1);
    let mut reps: Vec<usize> = pool.iter().step_by(step).copied().collect();
    // the cell nearest the mean direction goes first
    let mean = comp
        .cells
        .iter()
        .fold([0.0; 3], |acc, &c| vec3::add(acc, vec3::scale(raster.cell(c).center, raster.cell(c).area)));
    if vec3::norm(mean) > 1e-9 {
        let anchor = *pool
            .iter()
            .max_by(|&&a, &&b| {
                vec3::dot(raster.cell(a).center, mean).total_cmp(&vec3::dot(raster.cell(b).center, mean))
            })
            .expect("nonempty component");
        reps.retain(|&c| c != anchor);
        reps.insert(0, anchor);
        reps.truncate(MAX_REPRESENTATIVES);
    }
    reps
}

/// Where a component goes under a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageOutcome {
    Label(usize),
    /// Too many representative images landed in marked cells.
    Marked,
    /// The images split across labels without a clear winner.
    Ambiguous,
}

impl ComponentChart {
    pub fn raster(&self) -> &Arc<SphereRaster> {
        &self.raster
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, label: usize) -> Option<&Component> {
        self.components.get(label)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn marked(&self) -> &[bool] {
        &self.marked
    }

    pub fn marked_area(&self) -> f64 {
        self.marked_area
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    /// Label of a cell, `None` if marked.
    pub fn label_of_cell(&self, cell: usize) -> Option<usize> {
        self.labels[cell]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label_of(&self, p: &SpherePoint) -> Option<usize> {
        self.labels[self.raster.locate(p.unit())]
    }

    pub fn jordan_flag(&self, label: usize) -> Option<JordanFlag> {
        self.components.get(label).map(|c| c.jordan)
    }

    /// Points spanning the convex hull of the marked region: vertices and
    /// centers of marked cells.
    pub fn marked_hull_points(&self) -> Vec<Vec3> {
        let mut used = vec![false; self.raster.vertex_count()];
        let mut pts = Vec::new();
        for (c, &m) in self.marked.iter().enumerate() {
            if !m {
                continue;
            }
            pts.push(self.raster.cell(c).center);
            for &v in self.raster.cell_vertices(c) {
                if !used[v] {
                    used[v] = true;
                    pts.push(self.raster.vertex(v));
                }
            }
        }
        pts
    }

    /// Cells within `steps` graph steps of `start`, paired with their step
    /// count, in breadth-first order.
    fn ball_of_cells(&self, start: usize, steps: usize, mut visit: impl FnMut(usize, usize) -> bool) {
        let mut dist: HashMap<usize, usize> = HashMap::from([(start, 0)]);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            if !visit(c, d) {
                return;
            }
            if d == steps {
                continue;
            }
            for &nb in self.raster.neighbors(c) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(nb) {
                    e.insert(d + 1);
                    queue.push_back(nb);
                }
            }
        }
    }

    /// Graph distance from the cell containing `p` to the nearest cell of
    /// `label`, if within `limit` steps.
    pub fn steps_to_label(&self, p: &SpherePoint, label: usize, limit: usize) -> Option<usize> {
        let start = self.raster.locate(p.unit());
        let mut found = None;
        self.ball_of_cells(start, limit, |c, d| {
            if self.labels[c] == Some(label) {
                found = Some(d);
                false
            } else {
                true
            }
        });
        found
    }

    /// How many steps the cell containing `p` sits inside its own label
    /// (capped at `limit`); `None` for marked cells.
    pub fn depth_in_own_label(&self, p: &SpherePoint, limit: usize) -> Option<usize> {
        let start = self.raster.locate(p.unit());
        let own = self.labels[start]?;
        let mut depth = limit;
        self.ball_of_cells(start, limit, |c, d| {
            if self.labels[c] != Some(own) {
                depth = d.saturating_sub(1);
                false
            } else {
                true
            }
        });
        Some(depth)
    }

    /// Label-level action of `f`.
    pub fn component_image(&self, f: &MoebiusMap) -> Vec<ImageOutcome> {
        self.components
            .iter()
            .map(|comp| {
                let mut tally: HashMap<usize, usize> = HashMap::new();
                let mut marked = 0usize;
                for &c in &comp.representatives {
                    let img = f.apply(&SpherePoint::from_unit(self.raster.cell(c).center));
                    match self.label_of(&img) {
                        Some(l) => *tally.entry(l).or_default() += 1,
                        None => marked += 1,
                    }
                }
                let total = comp.representatives.len().max(1) as f64;
                let best = tally.iter().max_by_key(|(l, n)| (**n, std::cmp::Reverse(**l)));
                match best {
                    Some((&l, &n)) if n as f64 >= IMAGE_AGREEMENT * total => ImageOutcome::Label(l),
                    _ if marked as f64 > (1.0 - IMAGE_AGREEMENT) * total && tally.len() <= 1 => ImageOutcome::Marked,
                    _ => ImageOutcome::Ambiguous,
                }
            })
            .collect()
    }

    /// Whether every point lies in the closure of component `label`, up to
    /// `slack` cells.
    pub fn closure_contains(&self, label: usize, points: &[SpherePoint], slack: usize) -> Verdict {
        let mut worst_steps = 0usize;
        let mut all_close = true;
        let mut deepest_elsewhere: Option<usize> = None;
        for p in points {
            match self.steps_to_label(p, label, slack) {
                Some(d) => worst_steps = worst_steps.max(d),
                None => {
                    all_close = false;
                    if let Some(depth) = self.depth_in_own_label(p, 2 * slack) {
                        deepest_elsewhere = Some(deepest_elsewhere.map_or(depth, |d: usize| d.max(depth)));
                    }
                }
            }
        }
        let inside = if all_close {
            slack as f64 - worst_steps as f64 + 0.5
        } else {
            -0.5
        };
        let outside = match deepest_elsewhere {
            Some(depth) if depth >= 2 * slack => depth as f64 - 2.0 * slack as f64 + 0.5,
            _ => -0.5,
        };
        Verdict::decide(inside, outside)
    }
}

/// Marks, labels and records the dilation in one step.
pub fn build_chart(raster: &Arc<SphereRaster>, samples: &[SpherePoint], dilation: f64) -> ComponentChart {
    let marked = mark_limit_cells(raster, samples, dilation);
    label_components_with_dilation(raster, marked, dilation)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartReport {
    pub resolution: usize,
    pub cells: usize,
    pub dilation: f64,
    pub marked_cells: usize,
    pub marked_area: f64,
    pub components: Vec<Component>,
}

impl ComponentChart {
    pub fn report(&self) -> ChartReport {
        ChartReport {
            resolution: self.raster.resolution(),
            cells: self.raster.len(),
            dilation: self.dilation,
            marked_cells: self.marked.iter().filter(|m| **m).count(),
            marked_area: self.marked_area,
            components: self.components.clone(),
        }
    }

    /// Equirectangular PPM (P6): marked cells black, labels palette colors.
    pub fn to_ppm(&self, height: usize) -> Vec<u8> {
        let width = 2 * height;
        let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
        for row in 0..height {
            let lat = FRAC_PI_2 - PI * (row as f64 + 0.5) / height as f64;
            for col in 0..width {
                let lon = -PI + 2.0 * PI * (col as f64 + 0.5) / width as f64;
                let v = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
                let rgb = match self.labels[self.raster.locate(v)] {
                    None => [0, 0, 0],
                    Some(l) => palette(l),
                };
                out.extend_from_slice(&rgb);
            }
        }
        out
    }
}

/// Distinct, deterministic label colors.
pub fn palette(label: usize) -> [u8; 3] {
    let h = (label as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.65, 0.95);
    let i = h.floor() as usize % 6;
    let f = h - h.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::Cx;

    fn equator_samples(count: usize) -> Vec<SpherePoint> {
        (0..count)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / count as f64;
                SpherePoint::from_unit([phi.cos(), phi.sin(), 0.0])
            })
            .collect()
    }

    fn equator_chart(n: usize) -> ComponentChart {
        let raster = SphereRaster::new(n).unwrap();
        let r = 2.0 * raster.cell_size();
        build_chart(&raster, &equator_samples(4000), r)
    }

    #[test]
    fn raster_sizes_and_area() {
        let r2 = SphereRaster::new(2).unwrap();
        assert_eq!(r2.len(), 24);
        let total: f64 = r2.cells().iter().map(|c| c.area).sum();
        assert!((total / (4.0 * PI) - 1.0).abs() < 1e-9);
        let r32 = SphereRaster::new(32).unwrap();
        assert_eq!(r32.len(), 6144);
        let total: f64 = r32.cells().iter().map(|c| c.area).sum();
        assert!((total / (4.0 * PI) - 1.0).abs() < 1e-9);
        assert!(SphereRaster::new(1).is_err());
    }

    #[test]
    fn area_distortion_is_bounded() {
        let r = SphereRaster::new(32).unwrap();
        let max = r.cells().iter().map(|c| c.area).fold(0.0, f64::max);
        let min = r.cells().iter().map(|c| c.area).fold(f64::INFINITY, f64::min);
        // equiangular cube sphere: ratio is about 1.41 independent of n
        assert!(max / min <= 2.2, "{}", max / min);
    }

    #[test]
    fn neighbors_are_symmetric_and_complete() {
        for n in [2, 3, 8] {
            let r = SphereRaster::new(n).unwrap();
            for c in 0..r.len() {
                let nbs = r.neighbors(c);
                assert!(nbs.iter().all(|&nb| nb != usize::MAX && nb != c));
                for &nb in nbs {
                    assert!(r.neighbors(nb).contains(&c));
                }
            }
            // closed quad mesh of a sphere: V - E + F = 2
            let f = r.len() as i64;
            assert_eq!(r.vertex_count() as i64 - 2 * f + f, 2);
        }
    }

    #[test]
    fn locate_finds_centers() {
        let r = SphereRaster::new(16).unwrap();
        for (id, c) in r.cells().iter().enumerate() {
            assert_eq!(r.locate(c.center), id);
            for node in &c.nodes {
                assert_eq!(r.locate(node.point), id);
            }
        }
    }

    #[test]
    fn sub_nodes_partition_cells() {
        let r = SphereRaster::new(8).unwrap();
        for id in [0, 17, 200, 383] {
            let nodes = r.sub_nodes(id, 4);
            let area: f64 = nodes.iter().map(|nd| nd.weight).sum();
            assert!((area - r.cell(id).area).abs() < 1e-14);
            assert!(nodes.iter().all(|nd| r.locate(nd.point) == id));
        }
    }

    #[test]
    fn single_sample_without_dilation() {
        let r = SphereRaster::new(8).unwrap();
        let p = SpherePoint::from_unit([0.3, 0.2, 0.9]);
        let marked = mark_limit_cells(&r, &[p], 0.0);
        assert_eq!(marked.iter().filter(|m| **m).count(), 1);
        assert!(marked[r.locate(p.unit())]);
    }

    #[test]
    fn everything_marked_gives_no_components() {
        let r = SphereRaster::new(4).unwrap();
        let samples: Vec<SpherePoint> = r.cells().iter().map(|c| SpherePoint::from_unit(c.center)).collect();
        let chart = build_chart(&r, &samples, 0.0);
        assert_eq!(chart.len(), 0);
    }

    #[test]
    fn no_marks_gives_one_sphere_component() {
        let r = SphereRaster::new(8).unwrap();
        let chart = label_components(&r, vec![false; r.len()]);
        assert_eq!(chart.len(), 1);
        assert!((chart.components()[0].area - 4.0 * PI).abs() < 1e-9);
        assert_eq!(chart.components()[0].jordan.euler_characteristic, 2);
        assert!(!chart.components()[0].jordan.is_jordan());
    }

    #[test]
    fn equator_band_separates_caps() {
        let chart = equator_chart(32);
        assert_eq!(chart.len(), 2);
        let (a0, a1) = (chart.components()[0].area, chart.components()[1].area);
        assert!((a0 - a1).abs() < 1e-9 * a0, "{a0} {a1}");
        let total = a0 + a1 + chart.marked_area();
        assert!((total - 4.0 * PI).abs() < 1e-9);
        for c in chart.components() {
            assert!(c.jordan.is_jordan(), "{:?}", c.jordan);
        }
    }

    #[test]
    fn two_bands_make_an_annulus() {
        let raster = SphereRaster::new(32).unwrap();
        let lat = |z: f64| {
            (0..3000)
                .map(move |k| {
                    let phi = 2.0 * PI * k as f64 / 3000.0;
                    let s = (1.0 - z * z).sqrt();
                    SpherePoint::from_unit([s * phi.cos(), s * phi.sin(), z])
                })
                .collect::<Vec<_>>()
        };
        let mut samples = lat(0.5);
        samples.extend(lat(-0.5));
        let chart = build_chart(&raster, &samples, 2.0 * raster.cell_size());
        assert_eq!(chart.len(), 3);
        let middle = chart.label_of(&SpherePoint::from_unit([1.0, 0.0, 0.0])).unwrap();
        let flag = chart.jordan_flag(middle).unwrap();
        assert_eq!(flag.euler_characteristic, 0);
        assert_eq!(flag.state, JordanState::NotJordan);
        let north = chart.label_of(&SpherePoint::INFINITY).unwrap();
        assert!(chart.jordan_flag(north).unwrap().is_jordan());
    }

    #[test]
    fn component_image_of_identity_and_rotation() {
        let chart = equator_chart(32);
        let id = chart.component_image(&MoebiusMap::IDENTITY);
        assert_eq!(id, vec![ImageOutcome::Label(0), ImageOutcome::Label(1)]);
        let rot = MoebiusMap::dilation(Cx::from_polar(1.0, 0.7)).unwrap();
        assert_eq!(chart.component_image(&rot), id);
        // z -> 1/z swaps the hemispheres
        let swap = MoebiusMap::from_real(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(chart.component_image(&swap), vec![ImageOutcome::Label(1), ImageOutcome::Label(0)]);
    }

    #[test]
    fn closure_containment() {
        let raster = SphereRaster::new(32).unwrap();
        let chart = build_chart(&raster, &equator_samples(4000), 1.5 * raster.cell_size());
        let north = chart.label_of(&SpherePoint::INFINITY).unwrap();
        let south = chart.label_of(&SpherePoint::from_complex(Cx::new(0.0, 0.0))).unwrap();
        let eq = equator_samples(64);
        let v = chart.closure_contains(north, &eq, 2);
        assert!(v.is_inside(), "{v:?}");
        let v = chart.closure_contains(south, &[SpherePoint::INFINITY], 2);
        assert!(v.is_outside(), "{v:?}");
        // points just across the band: too far for Inside, too shallow for Outside
        let near = SpherePoint::from_unit([1.0, 0.0, -0.12]);
        let v = chart.closure_contains(north, &[SpherePoint::INFINITY, near], 2);
        assert!(v.is_uncertain(), "{v:?}");
    }

    #[test]
    fn ppm_is_deterministic() {
        let chart = equator_chart(8);
        let a = chart.to_ppm(16);
        assert_eq!(a, chart.to_ppm(16));
        assert!(a.starts_with(b"P6\n32 16\n255\n"));
        assert_eq!(a.len(), b"P6\n32 16\n255\n".len() + 32 * 16 * 3);
    }
}
