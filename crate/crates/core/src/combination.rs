//! Klein combinations with ping-pong certificates, hypothesis checks for
//! amalgamated and HNN combinations along component subgroups, QF-embedding
//! predicates, and sampled checks of the embedding conclusions.
//!
//! Quantifiers over `Γ − Γ'` run over words of length at most `depth`, and
//! every report records the depth it used.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cores::{self, HullQuery, InscribedCaps};
use crate::error::{Error, Result};
use crate::group::{self, Construction, EnumConfig, GroupElement, GroupSpec, Summand};
use crate::harmonic;
use crate::moebius::{BallPoint, MoebiusMap, SpherePoint};
use crate::sphere::{mark_limit_cells, Cap, ComponentChart, ImageOutcome, JordanState};
use crate::vec3::{self, Vec3};
use crate::verdict::{State, Verdict};

pub const DEFAULT_DEPTH: usize = 3;
/// Ray count used when an image point is too close to the sphere for
/// quadrature.
pub const IMAGE_RAYS: usize = 20_000;
/// Boundary points checked per certified element.
pub const CERT_BOUNDARY_SAMPLES: usize = 64;
/// Caps per component used for closed-form lower bounds.
const CAPS_PER_LABEL: usize = 16;
/// Thinning step for subgroup limit samples, in cell sizes.
const THIN_CELLS: f64 = 0.25;
const HALF_LEVEL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn all(items: impl IntoIterator<Item = Outcome>) -> Outcome {
        let mut out = Outcome::Pass;
        for o in items {
            match o {
                Outcome::Fail => return Outcome::Fail,
                Outcome::Inconclusive => out = Outcome::Inconclusive,
                Outcome::Pass => {}
            }
        }
        out
    }
}

/// Number of cells a point of the limit set may sit away from a component
/// and still count as lying in its closure.
pub fn containment_slack(chart: &ComponentChart) -> usize {
    (chart.dilation() / chart.raster().cell_size()).ceil() as usize + 1
}

fn thin(points: &[SpherePoint], step: f64) -> Vec<SpherePoint> {
    let mut seen = HashSet::new();
    points
        .iter()
        .filter(|p| {
            let v = p.unit();
            seen.insert([0, 1, 2].map(|i| (v[i] / step).round() as i64))
        })
        .copied()
        .collect()
}

fn sub_samples(chart: &ComponentChart, samples: &[SpherePoint]) -> Vec<SpherePoint> {
    thin(samples, THIN_CELLS * chart.raster().cell_size())
}

// ---------------------------------------------------------------------------
// ping-pong certificates

#[derive(Debug, Clone, Serialize)]
pub struct SummandCertificate {
    pub group: String,
    pub cap: Cap,
    pub elements_checked: usize,
    pub limit_samples: usize,
    /// Smallest `half_angle - distance(center, λ)` over limit samples.
    pub limit_margin: f64,
    pub boundary_samples: usize,
    /// Smallest room left by an image of the complementary cap.
    pub worst_margin: f64,
    pub worst_word: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PingPongCertificate {
    pub depth: usize,
    pub separation: f64,
    pub summands: [SummandCertificate; 2],
}

fn certify_summand(g: &GroupSpec, cap: &Cap, depth: usize) -> Result<SummandCertificate> {
    let elements = group::enumerate_elements(g, depth, &EnumConfig::default())?;
    let limit = group::sample_from_elements(g, &elements, depth, group::DEFAULT_POINT_CAP)?.all();
    let limit_margin = limit.iter().map(|p| cap.margin(p)).fold(f64::INFINITY, f64::min);
    if limit_margin < 0.0 {
        return Err(Error::Precondition(format!(
            "limit set of '{}' leaves its cap by {:.3e}",
            g.name, -limit_margin
        )));
    }
    let outside = cap.complement();
    let probes = outside.boundary_points(CERT_BOUNDARY_SAMPLES);
    let mut worst = (f64::INFINITY, String::new());
    for e in elements.iter().filter(|e| !e.is_empty()) {
        let img = outside.image(&e.matrix)?;
        let room = cap.half_angle - vec3::angle(cap.center, img.center) - img.half_angle;
        let boundary = probes.iter().map(|p| cap.margin(&e.matrix.apply(p))).fold(f64::INFINITY, f64::min);
        let margin = room.min(boundary);
        if margin < worst.0 {
            worst = (margin, g.display_word(&e.word));
        }
        if margin < 0.0 {
            return Err(Error::CertificateDenied(format!(
                "{} of '{}' moves the complement of its cap outside the cap (margin {margin:.3e})",
                g.display_word(&e.word),
                g.name
            )));
        }
    }
    Ok(SummandCertificate {
        group: g.name.clone(),
        cap: *cap,
        elements_checked: elements.len().saturating_sub(1),
        limit_samples: limit.len(),
        limit_margin,
        boundary_samples: CERT_BOUNDARY_SAMPLES,
        worst_margin: worst.0,
        worst_word: worst.1,
    })
}

/// Free product of `g1` and `g2` with a ping-pong certificate over disjoint
/// caps `b1`, `b2`, checked on all elements of length at most `depth`.
pub fn klein_combine_free(
    name: &str,
    g1: GroupSpec,
    g2: GroupSpec,
    b1: Cap,
    b2: Cap,
    depth: usize,
) -> Result<(GroupSpec, PingPongCertificate)> {
    let separation = b1.separation(&b2);
    if separation <= 0.0 {
        return Err(Error::Precondition(format!("caps overlap (separation {separation:.3e})")));
    }
    let c1 = certify_summand(&g1, &b1, depth)?;
    let c2 = certify_summand(&g2, &b2, depth)?;
    let spec = GroupSpec::free_product(name, g1, g2)?;
    Ok((
        spec,
        PingPongCertificate {
            depth,
            separation,
            summands: [c1, c2],
        },
    ))
}

// ---------------------------------------------------------------------------
// hypothesis checks

#[derive(Debug, Clone, Serialize)]
pub struct SideReport {
    /// Component whose closure holds the samples, if any.
    pub label: Option<usize>,
    pub per_label: Vec<Verdict>,
}

fn locate(chart: &ComponentChart, points: &[SpherePoint], slack: usize) -> SideReport {
    let per_label: Vec<Verdict> = (0..chart.len()).map(|l| chart.closure_contains(l, points, slack)).collect();
    SideReport {
        label: per_label.iter().position(Verdict::is_inside),
        per_label,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinationIReport {
    pub components: usize,
    pub jordan: Vec<JordanState>,
    pub two_jordan: bool,
    pub side1: SideReport,
    pub side2: SideReport,
    pub passed: bool,
}

/// Checks that the amalgamated subgroup's chart consists of two Jordan
/// components and that the two limit sets sit in the closures of different
/// ones.
pub fn check_combination_i(chart_phi: &ComponentChart, lambda1: &[SpherePoint], lambda2: &[SpherePoint]) -> CombinationIReport {
    let slack = containment_slack(chart_phi);
    let jordan: Vec<JordanState> = chart_phi.components().iter().map(|c| c.jordan.state).collect();
    let two_jordan = jordan.len() == 2 && jordan.iter().all(|s| *s == JordanState::Jordan);
    let side1 = locate(chart_phi, lambda1, slack);
    let side2 = locate(chart_phi, lambda2, slack);
    let passed = two_jordan && matches!((side1.label, side2.label), (Some(a), Some(b)) if a != b);
    CombinationIReport {
        components: chart_phi.len(),
        jordan,
        two_jordan,
        side1,
        side2,
        passed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinationIIReport {
    pub depth: usize,
    /// Words mapping `Δ'` onto `Δ`; empty when no conjugator was found.
    pub conjugators: Vec<String>,
    pub non_conjugate: bool,
    pub stabilizer_elements: usize,
    /// Stabilizer elements of `Δ'` whose `γ`-conjugate does not keep `Δ`.
    pub stabilizer_mismatches: Vec<String>,
    pub side: Verdict,
    pub passed: bool,
}

/// Hypotheses of the HNN combination for components `delta`, `delta_p` of
/// the chart of `g1`, stable letter `gamma`.
pub fn check_combination_ii(
    g1: &GroupSpec,
    chart1: &ComponentChart,
    lambda1: &[SpherePoint],
    delta: usize,
    delta_p: usize,
    gamma: &MoebiusMap,
    depth: usize,
) -> Result<CombinationIIReport> {
    if delta == delta_p {
        return Err(Error::Precondition("the two components must differ".into()));
    }
    for l in [delta, delta_p] {
        let flag = chart1
            .jordan_flag(l)
            .ok_or_else(|| Error::Precondition(format!("label {l} does not exist")))?;
        if !flag.is_jordan() {
            return Err(Error::Precondition(format!("component {l} is not flagged Jordan")));
        }
    }
    let elements = group::enumerate_elements(g1, depth, &EnumConfig::default())?;
    let mut conjugators = Vec::new();
    let mut stabilizer = 0;
    let mut mismatches = Vec::new();
    let gamma_inv = gamma.inverse();
    for e in elements.iter().filter(|e| !e.is_empty()) {
        let images = chart1.component_image(&e.matrix);
        if images[delta_p] == ImageOutcome::Label(delta) {
            conjugators.push(g1.display_word(&e.word));
        }
        if images[delta_p] == ImageOutcome::Label(delta_p) {
            stabilizer += 1;
            let conj = gamma.compose(&e.matrix).compose(&gamma_inv);
            if chart1.component_image(&conj)[delta] != ImageOutcome::Label(delta) {
                mismatches.push(g1.display_word(&e.word));
            }
        }
    }
    let images: Vec<SpherePoint> = lambda1.iter().map(|p| gamma.apply(p)).collect();
    let side = chart1.closure_contains(delta, &images, containment_slack(chart1));
    let non_conjugate = conjugators.is_empty();
    let passed = non_conjugate && mismatches.is_empty() && side.is_inside();
    Ok(CombinationIIReport {
        depth,
        conjugators,
        non_conjugate,
        stabilizer_elements: stabilizer,
        stabilizer_mismatches: mismatches,
        side,
        passed,
    })
}

// ---------------------------------------------------------------------------
// QF-embedding predicates

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryMiss {
    /// Inside when the witness clears twice the dilation radius.
    pub verdict: Verdict,
    pub witness_cell: Option<usize>,
    /// Angular distance from the witness cell center to the nearest image
    /// sample.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRecord {
    pub word: String,
    pub length: usize,
    pub label: Option<usize>,
    pub containment: Vec<Verdict>,
    pub jordan: Option<JordanState>,
    pub boundary_miss: Option<BoundaryMiss>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Precisely,
    Nicely,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub group: String,
    pub summand: String,
    pub predicate: Predicate,
    pub depth: usize,
    pub resolution: usize,
    pub slack: usize,
    pub representatives: usize,
    pub vacuous: bool,
    pub outcome: Outcome,
    /// Words whose record failed.
    pub violations: Vec<String>,
    pub records: Vec<GammaRecord>,
}

impl EmbeddingReport {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

fn representatives(g: &GroupSpec, summand: Summand, depth: usize) -> Result<Vec<GroupElement>> {
    if summand != Summand::Whole && matches!(g.construction(), Construction::Raw) {
        return Err(Error::Unsupported(format!(
            "group '{}' was built without provenance; coset representatives are unavailable",
            g.name
        )));
    }
    group::coset_representatives(g, summand, depth)
}

fn boundary_miss(chart: &ComponentChart, label: usize, images: &[SpherePoint]) -> BoundaryMiss {
    let raster = chart.raster();
    let radius = 2.0 * chart.dilation();
    let near = mark_limit_cells(raster, images, radius);
    let comp = &chart.components()[label];
    let dist = |c: usize| {
        let v = raster.cell(c).center;
        images.iter().map(|p| vec3::angle(v, p.unit())).fold(f64::INFINITY, f64::min)
    };
    let witness = comp.boundary_cells.iter().copied().find(|&c| !near[c]);
    let (cell, distance) = match witness {
        Some(c) => (Some(c), dist(c)),
        None => {
            let best = comp.boundary_cells.iter().map(|&c| (c, dist(c))).max_by(|a, b| a.1.total_cmp(&b.1));
            (best.map(|b| b.0), best.map_or(0.0, |b| b.1))
        }
    };
    let margin = distance - radius;
    BoundaryMiss {
        verdict: Verdict::decide(margin, -margin),
        witness_cell: cell,
        distance,
    }
}

fn embedding(
    g: &GroupSpec,
    summand: Summand,
    depth: usize,
    chart_sub: &ComponentChart,
    samples: &[SpherePoint],
    predicate: Predicate,
) -> Result<EmbeddingReport> {
    let reps = representatives(g, summand, depth)?;
    let slack = containment_slack(chart_sub);
    let base = sub_samples(chart_sub, samples);
    let records: Vec<GammaRecord> = reps
        .par_iter()
        .map(|rep| {
            let images: Vec<SpherePoint> = base.iter().map(|p| rep.matrix.apply(p)).collect();
            let side = locate(chart_sub, &images, slack);
            let jordan = side.label.map(|l| chart_sub.components()[l].jordan.state);
            let mut outcome = match (side.label, jordan) {
                (Some(_), Some(JordanState::Jordan)) => Outcome::Pass,
                (Some(_), Some(JordanState::NotJordan)) => Outcome::Fail,
                (None, _) if side.per_label.iter().all(Verdict::is_outside) => Outcome::Fail,
                _ => Outcome::Inconclusive,
            };
            let mut miss = None;
            if predicate == Predicate::Nicely {
                if let Some(l) = side.label {
                    let m = boundary_miss(chart_sub, l, &images);
                    if outcome == Outcome::Pass {
                        outcome = match m.verdict.state {
                            State::Inside => Outcome::Pass,
                            State::Outside => Outcome::Fail,
                            State::Uncertain => Outcome::Inconclusive,
                        };
                    }
                    miss = Some(m);
                }
            }
            GammaRecord {
                word: g.display_word(&rep.word),
                length: rep.len(),
                label: side.label,
                containment: side.per_label,
                jordan,
                boundary_miss: miss,
                outcome,
            }
        })
        .collect();
    let outcome = Outcome::all(records.iter().map(|r| r.outcome));
    Ok(EmbeddingReport {
        group: g.name.clone(),
        summand: format!("{summand:?}").to_lowercase(),
        predicate,
        depth,
        resolution: chart_sub.raster().resolution(),
        slack,
        representatives: records.len(),
        vacuous: records.is_empty(),
        outcome,
        violations: records
            .iter()
            .filter(|r| r.outcome == Outcome::Fail)
            .map(|r| r.word.clone())
            .collect(),
        records,
    })
}

/// For each coset representative `γ` up to `depth`: locate a component `Δ`
/// of the subgroup chart whose closure holds `γ(Λ')` and require it to be
/// Jordan.
pub fn precisely_qf_embedded(
    g: &GroupSpec,
    summand: Summand,
    depth: usize,
    chart_sub: &ComponentChart,
    samples: &[SpherePoint],
) -> Result<EmbeddingReport> {
    embedding(g, summand, depth, chart_sub, samples, Predicate::Precisely)
}

/// [`precisely_qf_embedded`] plus a boundary cell of `Δ` at distance at
/// least two dilation radii from `γ(Λ')`.
pub fn nicely_qf_embedded(
    g: &GroupSpec,
    summand: Summand,
    depth: usize,
    chart_sub: &ComponentChart,
    samples: &[SpherePoint],
) -> Result<EmbeddingReport> {
    embedding(g, summand, depth, chart_sub, samples, Predicate::Nicely)
}

// ---------------------------------------------------------------------------
// sampled embedding conclusions

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImageCheck {
    pub visual: Verdict,
    /// Lower and upper bounds on `|h_label - 1/2|` at the image point.
    pub level_gap: f64,
    pub level_gap_upper: f64,
    /// Decided from inscribed caps alone.
    pub closed_form: bool,
}

struct ImageJudge<'a> {
    q: &'a HullQuery<'a>,
    caps: InscribedCaps,
}

impl<'a> ImageJudge<'a> {
    fn new(q: &'a HullQuery<'a>) -> Self {
        ImageJudge {
            q,
            caps: InscribedCaps::new(q.chart(), CAPS_PER_LABEL),
        }
    }

    fn check(&self, y: &BallPoint, label: usize, seed: u64) -> ImageCheck {
        let tau = self.q.tau;
        let bounds = self.caps.lower_bounds(y);
        let best = self
            .q
            .selected()
            .iter()
            .map(|&l| bounds[l])
            .fold(f64::NEG_INFINITY, f64::max);
        let overall = bounds.iter().copied().fold(0.0, f64::max);
        if best >= 0.5 + tau && overall >= 0.5 + tau {
            return ImageCheck {
                visual: Verdict::decide(-(best - (0.5 - tau)), best - (0.5 + tau)),
                level_gap: overall - 0.5,
                level_gap_upper: 0.5,
                closed_form: true,
            };
        }
        let est = harmonic::measure_labels(y, self.q.chart())
            .unwrap_or_else(|_| harmonic::measure_rays_labels(y, self.q.chart(), IMAGE_RAYS, seed));
        // marked mass may belong to the component
        let unresolved = (1.0 - est.iter().map(|e| e.value).sum::<f64>()).max(0.0);
        let e = est[label];
        let (lo, hi) = (e.lower() - 0.5, e.upper() + unresolved - 0.5);
        let level_gap = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
        ImageCheck {
            visual: cores::visual_from_estimates(&est, self.q.selected(), tau),
            level_gap,
            level_gap_upper: lo.abs().max(hi.abs()),
            closed_form: false,
        }
    }
}

fn pair_seed(seed: u64, sample: usize, rep: usize) -> u64 {
    seed ^ (sample as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (rep as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingViolation {
    pub point: Vec3,
    pub word: String,
    pub image: Vec3,
    pub visual: Verdict,
    pub level_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConclusionReport {
    pub depth: usize,
    pub representatives: usize,
    pub requested: usize,
    pub found: usize,
    pub attempts: usize,
    /// Sample-representative pairs evaluated.
    pub checks: usize,
    /// Pairs where some component exceeds one half at the image.
    pub outside: usize,
    pub closed_form: usize,
    /// Pairs whose image could not be represented in the ball.
    pub unevaluated: usize,
    /// Pairs whose distance from the half level could not be resolved.
    pub undecided: usize,
    pub bracketing_failures: usize,
    pub vacuous: bool,
    pub partial: bool,
    pub outcome: Outcome,
    pub violations: Vec<EmbeddingViolation>,
}

fn run_images(
    q: &HullQuery,
    g: &GroupSpec,
    reps: &[GroupElement],
    points: &[(BallPoint, usize)],
    seed: u64,
    level_check: bool,
) -> (usize, usize, usize, usize, usize, Vec<EmbeddingViolation>) {
    let judge = ImageJudge::new(q);
    let pairs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..reps.len()).map(move |j| (i, j))).collect();
    let results: Vec<Option<(ImageCheck, BallPoint)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, label) = &points[i];
            let y = reps[j].matrix.apply_ball(x).ok()?;
            Some((judge.check(&y, *label, pair_seed(seed, i, j)), y))
        })
        .collect();
    let (mut checks, mut outside, mut closed, mut unevaluated, mut undecided) = (0, 0, 0, 0, 0);
    let mut violations = Vec::new();
    for (&(i, j), r) in pairs.iter().zip(results) {
        let Some((c, y)) = r else {
            unevaluated += 1;
            continue;
        };
        checks += 1;
        outside += c.visual.is_outside() as usize;
        closed += c.closed_form as usize;
        // a level violation needs the whole error interval inside the band
        let bad = c.visual.is_inside() || (level_check && c.level_gap_upper <= q.tau);
        undecided += (level_check && !bad && c.level_gap <= q.tau) as usize;
        if bad {
            violations.push(EmbeddingViolation {
                point: points[i].0.coords(),
                word: g.display_word(&reps[j].word),
                image: y.coords(),
                visual: c.visual,
                level_gap: c.level_gap,
            });
        }
    }
    (checks, outside, closed, unevaluated, undecided, violations)
}

/// Samples points of the visual hull interior of the subgroup and checks
/// that no coset representative moves one back into it.
pub fn verify_interior_embedding(
    q: &HullQuery,
    g: &GroupSpec,
    summand: Summand,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<ConclusionReport> {
    let reps = representatives(g, summand, depth)?;
    let (points, attempts) = if reps.is_empty() {
        (Vec::new(), 0)
    } else {
        let caps = InscribedCaps::new(q.chart(), CAPS_PER_LABEL);
        cores::rejection_sample(
            seed,
            count,
            count.saturating_mul(cores::ATTEMPTS_PER_POINT).max(2_000),
            |rng| cores::uniform_ball(rng, cores::SAMPLING_RADIUS),
            |y| cores::visual_member_screened(y, q, &caps).ok().filter(Verdict::is_inside).map(|_| (*y, 0)),
        )
    };
    let (checks, outside, closed_form, unevaluated, undecided, violations) = run_images(q, g, &reps, &points, seed, false);
    let outcome = if !violations.is_empty() {
        Outcome::Fail
    } else if points.is_empty() && !reps.is_empty() {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    Ok(ConclusionReport {
        depth,
        representatives: reps.len(),
        requested: count,
        found: points.len(),
        attempts,
        checks,
        outside,
        closed_form,
        unevaluated,
        undecided,
        bracketing_failures: 0,
        vacuous: reps.is_empty(),
        partial: !reps.is_empty() && points.len() < count,
        outcome,
        violations,
    })
}

/// Samples half-level points of the subgroup chart along random geodesics
/// between distinct components and checks that no coset representative
/// moves one into the visual hull or onto the same half level. Requires a
/// passing [`nicely_qf_embedded`] report.
pub fn verify_core_embedding(
    q: &HullQuery,
    g: &GroupSpec,
    summand: Summand,
    depth: usize,
    nicely: &EmbeddingReport,
    count: usize,
    seed: u64,
) -> Result<ConclusionReport> {
    if nicely.predicate != Predicate::Nicely || !nicely.passed() {
        return Err(Error::Precondition("the subgroup is not nicely QF-embedded at this depth".into()));
    }
    let reps = representatives(g, summand, depth)?;
    let chart = q.chart();
    let mut points = Vec::new();
    let mut failures = 0;
    let mut attempts = 0;
    if chart.len() >= 2 && !reps.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = chart.components();
        let raster = chart.raster();
        while points.len() < count && attempts < 10 * count {
            attempts += 1;
            let a = rng.random_range(0..comps.len());
            let mut b = rng.random_range(0..comps.len() - 1);
            if b >= a {
                b += 1;
            }
            let ca = comps[a].cells[rng.random_range(0..comps[a].cells.len())];
            let cb = comps[b].cells[rng.random_range(0..comps[b].cells.len())];
            let xi1 = SpherePoint::from_unit(raster.cell(ca).center);
            let xi2 = SpherePoint::from_unit(raster.cell(cb).center);
            match cores::half_level(&xi1, &xi2, a, chart, HALF_LEVEL_TOL) {
                Ok(p) => points.push((BallPoint::new(p.point)?, a)),
                Err(_) => failures += 1,
            }
        }
    }
    let (checks, outside, closed_form, unevaluated, undecided, violations) = run_images(q, g, &reps, &points, seed, true);
    let outcome = if !violations.is_empty() {
        Outcome::Fail
    } else if points.is_empty() && !reps.is_empty() {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    Ok(ConclusionReport {
        depth,
        representatives: reps.len(),
        requested: count,
        found: points.len(),
        attempts,
        checks,
        outside,
        closed_form,
        unevaluated,
        undecided,
        bracketing_failures: failures,
        vacuous: reps.is_empty(),
        partial: !reps.is_empty() && points.len() < count,
        outcome,
        violations,
    })
}
