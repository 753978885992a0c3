//! Membership in the visual hull and the convex hull, half-level root
//! finding, slice classification and the hull-comparison verifiers.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall, UnitDisc};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{self, HarmonicEstimate};
use crate::moebius::{BallPoint, HalfSpacePoint, MoebiusMap, SpherePoint};
use crate::sphere::{Cap, ComponentChart};
use crate::vec3::{self, Vec3};
use crate::verdict::{State, Verdict};

pub const DEFAULT_TAU: f64 = 0.02;
/// Leakage budget of the emptiness certificate.
pub const EMPTY_TOLERANCE: f64 = 0.1;
/// Radius of the Euclidean ball sampled by the emptiness probe.
pub const EMPTY_PROBE_RADIUS: f64 = 0.5;
/// Radius of the Euclidean ball sampled when searching for hull points.
pub const SAMPLING_RADIUS: f64 = 0.95;
/// Directions used to tabulate support functions.
pub const SUPPORT_DIRECTIONS: usize = 8000;
/// Bound on the angle from any unit vector to the nearest tabulated
/// direction (checked in tests).
pub const SUPPORT_COVERING: f64 = 0.03;
/// Grid step for thinning hull point sets.
pub const THINNING_STEP: f64 = 2e-3;
const BATCH: usize = 256;
/// Evaluation budget of one local direction search.
const REFINE_EVALS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentFilter {
    All,
    JordanOnly,
    Labels(Vec<usize>),
}

/// A visual-hull query: which components, and the decision band `τ`.
#[derive(Debug, Clone)]
pub struct HullQuery<'a> {
    chart: &'a ComponentChart,
    selected: Vec<usize>,
    pub tau: f64,
}

impl<'a> HullQuery<'a> {
    pub fn new(chart: &'a ComponentChart, filter: &ComponentFilter, tau: f64) -> Result<Self> {
        let selected = match filter {
            ComponentFilter::All => (0..chart.len()).collect(),
            ComponentFilter::JordanOnly => chart
                .components()
                .iter()
                .filter(|c| c.jordan.is_jordan())
                .map(|c| c.id)
                .collect(),
            ComponentFilter::Labels(list) => {
                if let Some(bad) = list.iter().find(|&&l| l >= chart.len()) {
                    return Err(Error::Precondition(format!(
                        "label {bad} does not exist (chart has {} components)",
                        chart.len()
                    )));
                }
                list.clone()
            }
        };
        Ok(HullQuery { chart, selected, tau })
    }

    pub fn chart(&self) -> &ComponentChart {
        self.chart
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }
}

/// Decides visual membership from per-label estimates.
pub fn visual_from_estimates(estimates: &[HarmonicEstimate], selected: &[usize], tau: f64) -> Verdict {
    if selected.is_empty() {
        return Verdict::decide(0.5 - tau, -1.0);
    }
    let worst_upper = selected.iter().map(|&l| estimates[l].upper()).fold(f64::NEG_INFINITY, f64::max);
    let best_lower = selected.iter().map(|&l| estimates[l].lower()).fold(f64::NEG_INFINITY, f64::max);
    // mass on marked cells belongs to no component; a point that mostly sees
    // the marked band is never Inside
    let unresolved = 1.0 - estimates.iter().map(|e| e.value).sum::<f64>() + estimates.iter().map(|e| e.error).sum::<f64>();
    let inside = ((0.5 - tau) - worst_upper).min((0.5 - tau) - unresolved);
    Verdict::decide(inside, best_lower - (0.5 + tau))
}

/// Visual hull membership by kernel quadrature.
pub fn visual_member(y: &BallPoint, q: &HullQuery) -> Result<Verdict> {
    let est = harmonic::measure_labels(y, q.chart)?;
    Ok(visual_from_estimates(&est, &q.selected, q.tau))
}

/// Visual membership that falls back to `rays` ray samples when `y` lies
/// beyond the quadrature range.
pub fn visual_member_any(y: &BallPoint, q: &HullQuery, rays: usize, seed: u64) -> Verdict {
    match harmonic::measure_labels(y, q.chart) {
        Ok(est) => visual_from_estimates(&est, &q.selected, q.tau),
        Err(_) => {
            let est = harmonic::measure_rays_labels(y, q.chart, rays, seed);
            visual_from_estimates(&est, &q.selected, q.tau)
        }
    }
}

/// Evenly spread unit vectors (spherical Fibonacci lattice).
pub fn fibonacci_directions(m: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Convex hull of a finite point set on the closed unit ball, queried in the
/// projective model through its support function.
#[derive(Debug, Clone)]
pub struct ConvexProbe {
    points: Vec<Vec3>,
    directions: Vec<Vec3>,
    support: Vec<f64>,
    planar: bool,
}

/// Smallest eigenvalue of a symmetric 3×3 matrix.
fn smallest_eigenvalue(m: [[f64; 3]; 3]) -> f64 {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return q;
    }
    let b: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (m[i][j] - if i == j { q } else { 0.0 }) / p).collect())
        .collect();
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
}

fn thin(points: &[Vec3], step: f64) -> Vec<Vec3> {
    let mut seen = std::collections::HashSet::new();
    points
        .iter()
        .copied()
        .filter(|p| seen.insert(p.map(|c| (c / step).round() as i64)))
        .collect()
}

impl ConvexProbe {
    /// Builds the probe. A rank-deficient point set is an error unless
    /// `planar` is set.
    pub fn new(points: &[Vec3], planar: bool) -> Result<Self> {
        let points = thin(points, THINNING_STEP);
        if points.len() < 3 {
            return Err(Error::Degenerate(format!("only {} distinct hull points", points.len())));
        }
        let n = points.len() as f64;
        let mean = points.iter().fold([0.0; 3], |a, p| vec3::add(a, *p)).map(|c| c / n);
        let mut cov = [[0.0; 3]; 3];
        for p in &points {
            let d = vec3::sub(*p, mean);
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += d[i] * d[j] / n;
                }
            }
        }
        let thickness = smallest_eigenvalue(cov).max(0.0).sqrt();
        if thickness < 1e-7 && !planar {
            return Err(Error::Degenerate(format!(
                "hull points span a set of thickness {thickness:e}; set the planar flag for coplanar samples"
            )));
        }
        if points.len() < 4 && !planar {
            return Err(Error::Degenerate("fewer than four hull points".into()));
        }
        let directions = fibonacci_directions(SUPPORT_DIRECTIONS);
        let support = directions
            .par_iter()
            .map(|u| points.iter().map(|p| vec3::dot(*u, *p)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(ConvexProbe {
            points,
            directions,
            support,
            planar,
        })
    }

    pub fn from_samples(samples: &[SpherePoint], planar: bool) -> Result<Self> {
        let pts: Vec<Vec3> = samples.iter().map(|p| p.unit()).collect();
        Self::new(&pts, planar)
    }

    /// Hull of the marked (dilated limit) region of a chart.
    pub fn from_chart(chart: &ComponentChart) -> Result<Self> {
        Self::new(&chart.marked_hull_points(), false)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn support_at(&self, u: Vec3) -> f64 {
        self.points.iter().map(|p| vec3::dot(u, *p)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Local pattern search on the sphere maximizing `f`.
    fn refine(&self, start: Vec3, f: impl Fn(Vec3) -> f64) -> f64 {
        let mut u = start;
        let mut best = f(u);
        let mut step = SUPPORT_COVERING;
        let mut evals = 0;
        while step > 1e-6 && evals < REFINE_EVALS {
            let e1 = vec3::orthogonal(u);
            let e2 = vec3::cross(u, e1);
            let mut improved = false;
            for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let cand = vec3::normalize(vec3::add(u, vec3::add(vec3::scale(e1, a * step), vec3::scale(e2, b * step))));
                let v = f(cand);
                evals += 1;
                if v > best {
                    best = v;
                    u = cand;
                    improved = true;
                    break;
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        best
    }

    fn best_directions(&self, score: &[f64], count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..score.len()).collect();
        idx.select_nth_unstable_by(count.min(score.len()) - 1, |&a, &b| score[b].total_cmp(&score[a]));
        idx.truncate(count);
        idx
    }

    /// Convex-hull membership of `y` in Klein coordinates, with decision band
    /// `τ` on both sides.
    pub fn member(&self, y: &BallPoint, tau: f64) -> Verdict {
        let yk = y.to_klein();
        let thin_slack = THINNING_STEP * 3f64.sqrt();
        let gaps: Vec<f64> = self
            .directions
            .iter()
            .zip(&self.support)
            .map(|(u, h)| vec3::dot(*u, yk) - h)
            .collect();
        let mut gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let band = 2.0 * SUPPORT_COVERING * (1.0 + vec3::norm(yk));
        if gap <= tau + thin_slack && gap > tau + thin_slack - band {
            for k in self.best_directions(&gaps, 4) {
                let g = self.refine(self.directions[k], |u| vec3::dot(u, yk) - self.support_at(u));
                gap = gap.max(g);
            }
        }
        let outside = gap - tau - thin_slack;
        if outside > 0.0 {
            return Verdict::decide(-1.0, outside);
        }
        // depth: min over u of h(u) - u·y
        let sampled_depth = -gap.max(gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let lipschitz = SUPPORT_COVERING * (1.0 + vec3::norm(yk));
        let mut depth = sampled_depth - lipschitz;
        if depth < tau && sampled_depth >= tau {
            let mut refined = sampled_depth;
            for k in self.best_directions(&gaps, 4) {
                let g = self.refine(self.directions[k], |u| vec3::dot(u, yk) - self.support_at(u));
                refined = refined.min(-g);
            }
            depth = refined;
        }
        Verdict::decide(depth - tau, outside)
    }
}

/// Result of bisecting for the half level of a component's measure.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HalfLevelPoint {
    pub point: Vec3,
    pub measure: HarmonicEstimate,
    /// Arclength parameter along the geodesic.
    pub s: f64,
}

/// Point on the geodesic from `xi2` to `xi1` where the measure of `label`
/// (the component containing `xi1`) equals one half to within `tol`.
pub fn half_level(xi1: &SpherePoint, xi2: &SpherePoint, label: usize, chart: &ComponentChart, tol: f64) -> Result<HalfLevelPoint> {
    let l1 = chart.label_of(xi1);
    let l2 = chart.label_of(xi2);
    if l1 != Some(label) {
        return Err(Error::Precondition(format!("first endpoint is not in component {label}")));
    }
    match l2 {
        None => return Err(Error::Precondition("second endpoint lies in a marked cell".into())),
        Some(l) if l == label => {
            return Err(Error::Precondition("both endpoints lie in the same component".into()));
        }
        _ => {}
    }
    let s_map = MoebiusMap::sending_zero_inf(*xi2, *xi1)?;
    let point_at = |s: f64| -> Result<BallPoint> {
        BallPoint::from_half_space(s_map.apply_half_space(&HalfSpacePoint {
            z: crate::moebius::Cx::new(0.0, 0.0),
            t: s.exp(),
        }))
    };
    let eval = |s: f64| -> Result<(BallPoint, HarmonicEstimate)> {
        let y = point_at(s)?;
        let est = harmonic::measure_labels(&y, chart)?[label];
        Ok((y, est))
    };
    let non_bracketing = |what: &str| Error::NonBracketing(format!("{what} within the quadrature range"));
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let (_, mut h_lo) = eval(lo)?;
    let mut h_hi = h_lo;
    while h_hi.value < 0.5 {
        hi += 1.0;
        h_hi = eval(hi).map_err(|_| non_bracketing("measure never exceeds one half"))?.1;
    }
    while h_lo.value > 0.5 {
        lo -= 1.0;
        h_lo = eval(lo).map_err(|_| non_bracketing("measure never drops below one half"))?.1;
    }
    let mut best: Option<(f64, BallPoint, HarmonicEstimate)> = None;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (y, est) = eval(mid)?;
        let off = (est.value - 0.5).abs();
        if best.as_ref().is_none_or(|b| off < (b.2.value - 0.5).abs()) {
            best = Some((mid, y, est));
        }
        if off <= tol {
            break;
        }
        if est.value < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s, y, measure) = best.expect("at least one bisection step");
    if (measure.value - 0.5).abs() > tol {
        return Err(Error::NonBracketing(format!(
            "bisection stalled at |h - 1/2| = {:e}",
            (measure.value - 0.5).abs()
        )));
    }
    Ok(HalfLevelPoint {
        point: y.coords(),
        measure,
        s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceState {
    V,
    COnly,
    Outside,
    Uncertain,
    /// Pixel center outside the usable ball.
    OffBall,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlicePixel {
    pub point: Vec3,
    pub state: SliceState,
    pub visual: Verdict,
    pub convex: Verdict,
}

/// A plane through `base` spanned by orthonormal `e1`, `e2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlicePlane {
    pub base: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl SlicePlane {
    pub fn new(base: Vec3, e1: Vec3, e2: Vec3) -> Result<Self> {
        if (vec3::norm(e1) - 1.0).abs() > 1e-9 || (vec3::norm(e2) - 1.0).abs() > 1e-9 || vec3::dot(e1, e2).abs() > 1e-9 {
            return Err(Error::Precondition("slice directions must be orthonormal".into()));
        }
        let normal = vec3::cross(e1, e2);
        if vec3::dot(base, normal).abs() >= 1.0 {
            return Err(Error::Precondition("slice plane misses the ball".into()));
        }
        Ok(SlicePlane { base, e1, e2 })
    }

    /// The equatorial plane `z = 0`.
    pub fn equatorial() -> Self {
        SlicePlane {
            base: [0.0; 3],
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 1.0, 0.0],
        }
    }

    /// The vertical plane `y = 0`.
    pub fn vertical() -> Self {
        SlicePlane {
            base: [0.0; 3],
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 0.0, 1.0],
        }
    }
}

fn combine(visual: Verdict, convex: Verdict) -> SliceState {
    match (visual.state, convex.state) {
        (State::Inside, State::Inside) => SliceState::V,
        (State::Outside, State::Inside) => SliceState::COnly,
        (_, State::Outside) => SliceState::Outside,
        _ => SliceState::Uncertain,
    }
}

/// Classifies a `resolution × resolution` grid over `[-window, window]²`,
/// row-major from the top (largest `e2` coordinate).
pub fn slice_classify(plane: &SlicePlane, window: f64, resolution: usize, q: &HullQuery, probe: &ConvexProbe) -> Vec<SlicePixel> {
    let step = 2.0 * window / resolution as f64;
    (0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let (row, col) = (k / resolution, k % resolution);
            let a = -window + (col as f64 + 0.5) * step;
            let b = window - (row as f64 + 0.5) * step;
            let p = vec3::add(plane.base, vec3::add(vec3::scale(plane.e1, a), vec3::scale(plane.e2, b)));
            let off = Verdict::decide(-1.0, -1.0);
            if vec3::norm(p) > harmonic::QUADRATURE_LIMIT {
                return SlicePixel {
                    point: p,
                    state: SliceState::OffBall,
                    visual: off,
                    convex: off,
                };
            }
            let y = BallPoint::new(p).expect("inside the ball");
            let visual = visual_member(&y, q).unwrap_or(off);
            let convex = probe.member(&y, q.tau);
            SlicePixel {
                point: p,
                state: combine(visual, convex),
                visual,
                convex,
            }
        })
        .collect()
}

pub(crate) fn uniform_ball(rng: &mut ChaCha8Rng, radius: f64) -> BallPoint {
    let v: [f64; 3] = UnitBall.sample(rng);
    BallPoint::new(vec3::scale(v, radius)).expect("inside the ball")
}

/// Runs `trial` on seeded batches of random ball points until `wanted`
/// successes or `max_attempts` draws; deterministic for a given seed.
pub(crate) fn rejection_sample<T: Send>(
    seed: u64,
    wanted: usize,
    max_attempts: usize,
    draw: impl Fn(&mut ChaCha8Rng) -> BallPoint + Sync,
    trial: impl Fn(&BallPoint) -> Option<T> + Sync,
) -> (Vec<T>, usize) {
    let mut found = Vec::new();
    let mut attempts = 0;
    let mut batch = 0u64;
    while found.len() < wanted && attempts < max_attempts {
        let len = BATCH.min(max_attempts - attempts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let pts: Vec<BallPoint> = (0..len).map(|_| draw(&mut rng)).collect();
        let results: Vec<Option<T>> = pts.par_iter().map(&trial).collect();
        for r in results {
            attempts += 1;
            if let Some(t) = r {
                found.push(t);
                if found.len() == wanted {
                    break;
                }
            }
        }
        batch += 1;
    }
    (found, attempts)
}

#[derive(Debug, Clone, Serialize)]
pub struct HullViolation {
    pub point: Vec3,
    pub visual_margin: f64,
    pub convex_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VSubsetCReport {
    pub requested: usize,
    pub found: usize,
    pub attempts: usize,
    /// No visual-Inside point was found.
    pub vacuous: bool,
    pub violations: Vec<HullViolation>,
    /// Smallest convex margin among the sampled points (negative: Uncertain).
    pub min_convex_margin: Option<f64>,
}

impl VSubsetCReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Visual membership that first tries to rule Inside out from inscribed
/// caps alone.
pub fn visual_member_screened(y: &BallPoint, q: &HullQuery, caps: &InscribedCaps) -> Result<Verdict> {
    let bounds = caps.lower_bounds(y);
    let best = q.selected.iter().map(|&l| bounds[l]).fold(f64::NEG_INFINITY, f64::max);
    if best > 0.5 + q.tau {
        return Ok(Verdict::decide(-1.0, best - (0.5 + q.tau)));
    }
    visual_member(y, q)
}

/// Draws allowed per requested point when searching for visual-Inside
/// points.
pub const ATTEMPTS_PER_POINT: usize = 50;

/// Samples visual-Inside points and checks none of them is convex-Outside.
pub fn check_v_subset_c(q: &HullQuery, probe: &ConvexProbe, count: usize, seed: u64) -> VSubsetCReport {
    let max_attempts = count.saturating_mul(ATTEMPTS_PER_POINT).max(2_000);
    let caps = InscribedCaps::new(q.chart, 16);
    let (pairs, attempts) = rejection_sample(
        seed,
        count,
        max_attempts,
        |rng| uniform_ball(rng, SAMPLING_RADIUS),
        |y| {
            let v = visual_member_screened(y, q, &caps).ok()?;
            v.is_inside().then(|| (y.coords(), v, probe.member(y, q.tau)))
        },
    );
    let violations = pairs
        .iter()
        .filter(|(_, _, c)| c.is_outside())
        .map(|(p, v, c)| HullViolation {
            point: *p,
            visual_margin: v.margin,
            convex_margin: c.margin,
        })
        .collect();
    VSubsetCReport {
        requested: count,
        found: pairs.len(),
        attempts,
        vacuous: pairs.is_empty(),
        violations,
        min_convex_margin: pairs.iter().map(|(_, _, c)| if c.is_outside() { -c.margin } else { c.margin }).reduce(f64::min),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Emptiness {
    /// No components: the visual hull is all of the ball.
    Full,
    /// A half-level point between two components.
    Witness { point: Vec3, measure: f64, error: f64, labels: [usize; 2] },
    /// One component whose measure stayed above `1 - EMPTY_TOLERANCE`.
    Empty { min_measure: f64, samples: usize },
    /// One component, but some sampled measure fell below the threshold.
    Inconclusive { min_measure: f64, samples: usize },
}

/// Constructive test of whether the visual hull is empty.
pub fn emptiness_probe(chart: &ComponentChart, count: usize, seed: u64) -> Result<Emptiness> {
    match chart.len() {
        0 => Ok(Emptiness::Full),
        1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<BallPoint> = (0..count).map(|_| uniform_ball(&mut rng, EMPTY_PROBE_RADIUS)).collect();
            let values: Vec<f64> = pts
                .par_iter()
                .map(|y| harmonic::measure_labels(y, chart).map(|e| e[0].lower()))
                .collect::<Result<_>>()?;
            let min_measure = values.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(if min_measure >= 1.0 - EMPTY_TOLERANCE {
                Emptiness::Empty {
                    min_measure,
                    samples: count,
                }
            } else {
                Emptiness::Inconclusive {
                    min_measure,
                    samples: count,
                }
            })
        }
        _ => {
            let mut order: Vec<usize> = (0..chart.len()).collect();
            order.sort_by(|&a, &b| chart.components()[b].area.total_cmp(&chart.components()[a].area));
            let (a, b) = (order[0], order[1]);
            let witness = half_level_between(chart, a, b, 1e-3)?;
            Ok(Emptiness::Witness {
                point: witness.point,
                measure: witness.measure.value,
                error: witness.measure.error,
                labels: [a, b],
            })
        }
    }
}

/// Representative interior point of a label.
pub fn representative_point(chart: &ComponentChart, label: usize) -> SpherePoint {
    let comp = &chart.components()[label];
    SpherePoint::from_unit(chart.raster().cell(comp.representatives[0]).center)
}

/// Half-level point on the geodesic joining representative points of two
/// labels; tries further representatives when bracketing fails.
pub fn half_level_between(chart: &ComponentChart, a: usize, b: usize, tol: f64) -> Result<HalfLevelPoint> {
    let ra = &chart.components()[a].representatives;
    let rb = &chart.components()[b].representatives;
    let mut last = None;
    for (i, j) in (0..ra.len().min(8)).zip(0..rb.len().min(8)) {
        let xi1 = SpherePoint::from_unit(chart.raster().cell(ra[i]).center);
        let xi2 = SpherePoint::from_unit(chart.raster().cell(rb[j]).center);
        match half_level(&xi1, &xi2, a, chart, tol) {
            Ok(p) => return Ok(p),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Precondition("components have no representatives".into())))
}

/// Round caps contained in the cells of each component. Their closed-form
/// measures bound the component measures from below.
///
/// A path leaving a component passes through a frontier cell (a foreign or
/// marked cell sharing a vertex with the component), so a cap around a
/// point of the component whose radius stays one cell diagonal short of
/// every frontier center lies in the component.
#[derive(Debug, Clone)]
pub struct InscribedCaps {
    raster: std::sync::Arc<crate::sphere::SphereRaster>,
    labels: Vec<Option<usize>>,
    frontier: Vec<Vec<Vec3>>,
    caps: Vec<Vec<Cap>>,
}

impl InscribedCaps {
    /// Up to `per_label` fixed caps per component on representative cells;
    /// [`lower_bounds`](Self::lower_bounds) adds one around the query
    /// direction.
    pub fn new(chart: &ComponentChart, per_label: usize) -> Self {
        let raster = chart.raster().clone();
        let mut by_vertex = vec![Vec::new(); raster.vertex_count()];
        for c in 0..raster.len() {
            for &v in raster.cell_vertices(c) {
                by_vertex[v].push(c);
            }
        }
        let frontier: Vec<Vec<Vec3>> = chart
            .components()
            .iter()
            .map(|comp| {
                let mut seen = HashSet::new();
                for &c in &comp.cells {
                    for &v in raster.cell_vertices(c) {
                        for &f in &by_vertex[v] {
                            if chart.label_of_cell(f) != Some(comp.id) {
                                seen.insert(f);
                            }
                        }
                    }
                }
                let mut cells: Vec<usize> = seen.into_iter().collect();
                cells.sort_unstable();
                cells.into_iter().map(|f| raster.cell(f).center).collect()
            })
            .collect();
        let mut out = InscribedCaps {
            raster,
            labels: chart.labels().to_vec(),
            frontier,
            caps: Vec::new(),
        };
        out.caps = chart
            .components()
            .iter()
            .map(|comp| {
                comp.representatives
                    .iter()
                    .take(per_label)
                    .filter_map(|&rep| out.cap_around(comp.id, out.raster.cell(rep).center))
                    .collect()
            })
            .collect();
        out
    }

    fn cap_around(&self, label: usize, v: Vec3) -> Option<Cap> {
        let nearest = self.frontier[label]
            .iter()
            .map(|f| vec3::angle(v, *f))
            .fold(std::f64::consts::PI, f64::min);
        let r = nearest - self.raster.cell_diagonal();
        (r > 0.0).then(|| Cap::new(v, r))
    }

    pub fn caps(&self, label: usize) -> &[Cap] {
        &self.caps[label]
    }

    /// Closed-form lower bound on each component measure at `y`.
    pub fn lower_bounds(&self, y: &BallPoint) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .caps
            .iter()
            .map(|caps| {
                caps.iter()
                    .filter_map(|c| harmonic::cap_measure(y, c).ok())
                    .map(|e| e.value)
                    .fold(0.0, f64::max)
            })
            .collect();
        if y.radius() > 0.0 {
            let v = vec3::normalize(y.coords());
            if let Some(l) = self.labels[self.raster.locate(v)] {
                if let Some(m) = self.cap_around(l, v).and_then(|c| harmonic::cap_measure(y, &c).ok()) {
                    out[l] = out[l].max(m.value);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EqualityCaseReport {
    pub plane_points: usize,
    /// Plane points classified Outside by either hull.
    pub plane_failures: Vec<Vec3>,
    pub off_points: usize,
    /// Off-plane points not Outside both hulls with positive margin.
    pub off_failures: Vec<Vec3>,
    pub min_off_visual_margin: f64,
    pub min_off_convex_margin: f64,
}

impl EqualityCaseReport {
    pub fn passed(&self) -> bool {
        self.plane_failures.is_empty() && self.off_failures.is_empty()
    }
}

/// Sampling of the totally geodesic case: the invariant plane is `z = 0`
/// (Klein and ball alike). Plane points are uniform in the Klein disk of
/// radius `klein_radius`; off-plane points sit above such plane points at
/// hyperbolic distance in `[standoff, standoff + 0.3]`.
pub fn check_equality_case(
    q: &HullQuery,
    probe: &ConvexProbe,
    count: usize,
    klein_radius: f64,
    standoff: f64,
    seed: u64,
) -> Result<EqualityCaseReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plane = Vec::with_capacity(count);
    let mut off = Vec::with_capacity(count);
    for k in 0..2 * count {
        let [a, b]: [f64; 2] = UnitDisc.sample(&mut rng);
        let (x, y) = (a * klein_radius, b * klein_radius);
        if k < count {
            plane.push(BallPoint::from_klein([x, y, 0.0])?);
        } else {
            let d = standoff + 0.3 * rng.random::<f64>();
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let z = side * (1.0 - x * x - y * y).sqrt() * d.tanh();
            off.push(BallPoint::from_klein([x, y, z])?);
        }
    }
    let judge = |y: &BallPoint| -> Result<(Verdict, Verdict)> { Ok((visual_member(y, q)?, probe.member(y, q.tau))) };
    let plane_v: Vec<(Verdict, Verdict)> = plane.par_iter().map(judge).collect::<Result<_>>()?;
    let off_v: Vec<(Verdict, Verdict)> = off.par_iter().map(judge).collect::<Result<_>>()?;
    let plane_failures = plane
        .iter()
        .zip(&plane_v)
        .filter(|(_, (v, c))| v.is_outside() || c.is_outside())
        .map(|(p, _)| p.coords())
        .collect();
    let off_failures = off
        .iter()
        .zip(&off_v)
        .filter(|(_, (v, c))| !(v.is_outside() && c.is_outside()))
        .map(|(p, _)| p.coords())
        .collect();
    let signed = |v: &Verdict| if v.is_outside() { v.margin } else { -v.margin.abs() };
    Ok(EqualityCaseReport {
        plane_points: count,
        plane_failures,
        off_points: count,
        off_failures,
        min_off_visual_margin: off_v.iter().map(|(v, _)| signed(v)).fold(f64::INFINITY, f64::min),
        min_off_convex_margin: off_v.iter().map(|(_, c)| signed(c)).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_chart, SphereRaster};
    use std::f64::consts::PI;

    fn equator(count: usize) -> Vec<SpherePoint> {
        (0..count)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / count as f64;
                SpherePoint::from_unit([phi.cos(), phi.sin(), 0.0])
            })
            .collect()
    }

    fn hemisphere_chart() -> ComponentChart {
        let raster = SphereRaster::new(32).unwrap();
        build_chart(&raster, &equator(4000), 2.0 * raster.cell_size())
    }

    fn ball(v: Vec3) -> BallPoint {
        BallPoint::new(v).unwrap()
    }

    #[test]
    fn covering_radius_bound_holds() {
        let dirs = fibonacci_directions(SUPPORT_DIRECTIONS);
        let probes = fibonacci_directions(3001);
        let worst = probes
            .iter()
            .map(|p| {
                let tilt = vec3::normalize(vec3::add(*p, [0.013, -0.007, 0.005]));
                dirs.iter().map(|d| vec3::angle(*d, tilt)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(worst < SUPPORT_COVERING, "{worst}");
    }

    #[test]
    fn smallest_eigenvalue_of_diagonal() {
        let m = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        assert!((smallest_eigenvalue(m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn visual_member_examples() {
        let chart = hemisphere_chart();
        let q = HullQuery::new(&chart, &ComponentFilter::All, DEFAULT_TAU).unwrap();
        let v = visual_member(&ball([0.0, 0.0, 0.3]), &q).unwrap();
        assert!(v.is_outside(), "{v:?}");
        // at n=32 the marked band takes a tenth of the sphere, so both halves
        // fall clearly below 1/2; a fine raster keeps the origin in the band
        assert!(visual_member(&BallPoint::ORIGIN, &q).unwrap().is_inside());
        let raster = SphereRaster::new(128).unwrap();
        let fine = build_chart(&raster, &equator(20_000), raster.default_dilation());
        let q = HullQuery::new(&fine, &ComponentFilter::All, DEFAULT_TAU).unwrap();
        let v = visual_member(&BallPoint::ORIGIN, &q).unwrap();
        assert!(v.is_uncertain(), "{v:?}");
    }

    #[test]
    fn unknown_label_is_rejected() {
        let chart = hemisphere_chart();
        assert!(HullQuery::new(&chart, &ComponentFilter::Labels(vec![7]), 0.02).is_err());
    }

    #[test]
    fn filter_monotonicity() {
        let chart = hemisphere_chart();
        let all = HullQuery::new(&chart, &ComponentFilter::All, 0.02).unwrap();
        let one = HullQuery::new(&chart, &ComponentFilter::Labels(vec![0]), 0.02).unwrap();
        let none = HullQuery::new(&chart, &ComponentFilter::Labels(vec![]), 0.02).unwrap();
        for y in [[0.0, 0.0, 0.01], [0.2, 0.1, -0.4], [0.0, 0.3, 0.6], [0.5, 0.0, 0.0]] {
            let y = ball(y);
            if visual_member(&y, &all).unwrap().is_inside() {
                assert!(visual_member(&y, &one).unwrap().is_inside());
            }
            assert!(visual_member(&y, &none).unwrap().is_inside());
        }
    }

    #[test]
    fn convex_member_examples() {
        let circle = ConvexProbe::from_samples(&equator(720), true).unwrap();
        assert!(!circle.member(&BallPoint::ORIGIN, 0.0).is_outside());
        assert!(circle.member(&ball([0.0, 0.0, 0.5]), 0.02).is_outside());
        assert!(ConvexProbe::from_samples(&equator(720), false).is_err());
        let s = 1.0 / 3f64.sqrt();
        let tetra = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        let probe = ConvexProbe::new(&tetra, false).unwrap();
        let v = probe.member(&BallPoint::ORIGIN, 0.02);
        assert!(v.is_inside(), "{v:?}");
        // inradius of the inscribed regular tetrahedron is 1/3
        assert!((v.margin + 0.02 - 1.0 / 3.0).abs() < SUPPORT_COVERING * 2.0);
        assert!(probe.member(&ball([-0.7, -0.7, -0.0]), 0.02).is_outside());
    }

    #[test]
    fn half_level_on_hemispheres_is_origin() {
        let chart = hemisphere_chart();
        let north = chart.label_of(&SpherePoint::INFINITY).unwrap();
        let south = SpherePoint::from_unit([0.0, 0.0, -1.0]);
        let p = half_level(&SpherePoint::INFINITY, &south, north, &chart, 1e-4).unwrap();
        assert!((p.measure.value - 0.5).abs() <= 1e-4);
        // on the axis, pushed toward the north pole by the marked band
        assert!(p.point[0].abs() < 1e-12 && p.point[1].abs() < 1e-12);
        assert!(p.point[2] > 0.0 && p.point[2] < 0.06, "{:?}", p.point);
        let raster = SphereRaster::new(128).unwrap();
        let fine = build_chart(&raster, &equator(20_000), raster.default_dilation());
        let north_fine = fine.label_of(&SpherePoint::INFINITY).unwrap();
        let q = half_level(&SpherePoint::INFINITY, &south, north_fine, &fine, 1e-4).unwrap();
        assert!(q.point[2] > 0.0 && q.point[2] < p.point[2] / 2.0, "{:?}", q.point);
        assert!(matches!(
            half_level(&SpherePoint::INFINITY, &SpherePoint::from_unit([0.1, 0.0, 1.0]), north, &chart, 1e-3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn emptiness_on_synthetic_charts() {
        let chart = hemisphere_chart();
        match emptiness_probe(&chart, 10, 1).unwrap() {
            Emptiness::Witness { point, .. } => assert!(vec3::norm(point) < 0.06, "{point:?}"),
            other => panic!("{other:?}"),
        }
        let raster = SphereRaster::new(4).unwrap();
        let everything: Vec<SpherePoint> = raster.cells().iter().map(|c| SpherePoint::from_unit(c.center)).collect();
        let full = build_chart(&raster, &everything, 0.0);
        assert!(matches!(emptiness_probe(&full, 10, 1).unwrap(), Emptiness::Full));
    }

    #[test]
    fn slice_counts_are_consistent() {
        let chart = hemisphere_chart();
        let q = HullQuery::new(&chart, &ComponentFilter::All, DEFAULT_TAU).unwrap();
        let probe = ConvexProbe::from_chart(&chart).unwrap();
        let px = slice_classify(&SlicePlane::vertical(), 1.0, 12, &q, &probe);
        assert_eq!(px.len(), 144);
        let v = px.iter().filter(|p| p.state == SliceState::V).count();
        let c = px.iter().filter(|p| p.state == SliceState::COnly).count();
        assert!(v <= v + c);
        assert!(px.iter().any(|p| p.state == SliceState::OffBall));
        // far above the band everything is outside both hulls
        let top = px[5];
        assert!(top.point[2] > 0.8 && matches!(top.state, SliceState::Outside | SliceState::OffBall));
    }

    #[test]
    fn v_subset_c_on_hemispheres() {
        let chart = hemisphere_chart();
        let q = HullQuery::new(&chart, &ComponentFilter::All, DEFAULT_TAU).unwrap();
        let probe = ConvexProbe::from_chart(&chart).unwrap();
        let report = check_v_subset_c(&q, &probe, 30, 11);
        assert!(!report.vacuous);
        assert!(report.passed(), "{:?}", report.violations);
        let again = check_v_subset_c(&q, &probe, 30, 11);
        assert_eq!(report.attempts, again.attempts);
    }
}
