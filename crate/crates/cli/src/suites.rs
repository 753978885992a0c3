use serde::Serialize;
use serde_json::{json, Value};
use visual_core::combination::{self, ConclusionReport, Outcome, DEFAULT_DEPTH};
use visual_core::cores::{self, ComponentFilter, ConvexProbe, Emptiness, HullQuery};
use visual_core::group::{self, Construction, GroupSpec, Summand};
use visual_core::io::LoadedGroup;
use visual_core::moebius::SpherePoint;
use visual_core::sphere::ComponentChart;

use crate::commands::{self, chart_of, limit_samples, load};
use crate::{Common, Status, Suite, UsageError};

/// Fixtures run when `verify` is given no `--config`.
pub const DEFAULT_FIXTURES: [&str; 4] = ["octagon", "schottky", "lifted_octagon", "free_combination"];
pub const DEFAULT_SAMPLES: usize = 200;
/// Klein-disk radius of plane points in the totally geodesic check.
pub const EQUALITY_KLEIN_RADIUS: f64 = 0.3;
/// Minimal hyperbolic distance of off-plane points.
pub const EQUALITY_STANDOFF: f64 = 0.2;
/// Tolerance on `|h - 1/2|` for half-level witnesses.
pub const WITNESS_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

impl From<Outcome> for CheckStatus {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Pass => CheckStatus::Pass,
            Outcome::Fail => CheckStatus::Fail,
            Outcome::Inconclusive => CheckStatus::Inconclusive,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckRecord {
    pub fixture: String,
    pub suite: &'static str,
    pub check: String,
    pub status: CheckStatus,
    pub summary: String,
    pub detail: Value,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub resolution: usize,
    pub depth: usize,
    pub limit_depth: usize,
    pub dilation: Option<f64>,
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    pub status: CheckStatus,
    pub checks: Vec<CheckRecord>,
}

struct Settings {
    depth: usize,
    samples: usize,
    seed: u64,
}

struct Fixture {
    name: String,
    group: LoadedGroup,
    chart: ComponentChart,
}

struct Recorder<'a> {
    fixture: &'a str,
    suite: &'static str,
    out: &'a mut Vec<CheckRecord>,
}

impl Recorder<'_> {
    fn push(&mut self, check: impl Into<String>, status: CheckStatus, summary: impl Into<String>, detail: Value) {
        self.out.push(CheckRecord {
            fixture: self.fixture.to_string(),
            suite: self.suite,
            check: check.into(),
            status,
            summary: summary.into(),
            detail,
        });
    }
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

/// True when every generator maps the equator to itself.
fn preserves_equator(g: &GroupSpec) -> bool {
    g.generators().iter().all(|gen| {
        (0..8).all(|k| {
            let t = 0.3 + k as f64 * std::f64::consts::PI / 4.0;
            let p = SpherePoint::from_unit([t.cos(), t.sin(), 0.0]);
            gen.map.apply(&p).unit()[2].abs() < 1e-9
        })
    })
}

fn cores_suite(fx: &Fixture, s: &Settings, tau: f64, rec: &mut Recorder) -> Result<(), UsageError> {
    let q = HullQuery::new(&fx.chart, &ComponentFilter::All, tau)?;
    let probe = match ConvexProbe::from_chart(&fx.chart) {
        Ok(p) => p,
        Err(e) => {
            rec.push("v_subset_c", CheckStatus::Inconclusive, format!("no convex probe: {e}"), Value::Null);
            return Ok(());
        }
    };
    let r = cores::check_v_subset_c(&q, &probe, s.samples, s.seed);
    let status = if r.passed() { CheckStatus::Pass } else { CheckStatus::Fail };
    let summary = if r.vacuous {
        format!("visual hull empty in {} draws; inclusion holds vacuously", r.attempts)
    } else {
        format!("{} of {} visual points, {} outside the convex hull", r.found, r.requested, r.violations.len())
    };
    rec.push("v_subset_c", status, summary, value(&r));
    if preserves_equator(&fx.group.spec) {
        let n = (s.samples / 2).max(1);
        let r = cores::check_equality_case(&q, &probe, n, EQUALITY_KLEIN_RADIUS, EQUALITY_STANDOFF, s.seed)?;
        let status = if r.passed() { CheckStatus::Pass } else { CheckStatus::Fail };
        let summary = format!(
            "{} plane failures, {} off-plane failures; off-plane margins {:.3e} visual, {:.3e} convex",
            r.plane_failures.len(),
            r.off_failures.len(),
            r.min_off_visual_margin,
            r.min_off_convex_margin
        );
        rec.push("equality_case", status, summary, value(&r));
    }
    Ok(())
}

fn emptiness_suite(fx: &Fixture, s: &Settings, rec: &mut Recorder) {
    let n = (s.samples / 2).max(1);
    match cores::emptiness_probe(&fx.chart, n, s.seed) {
        Err(e) => rec.push("emptiness", CheckStatus::Inconclusive, format!("no bracketing geodesic: {e}"), Value::Null),
        Ok(r) => {
            let (status, summary) = match &r {
                Emptiness::Full => (CheckStatus::Inconclusive, "no components".to_string()),
                Emptiness::Witness { measure, labels, .. } => {
                    let gap = (measure - 0.5).abs();
                    let status = if gap <= WITNESS_TOLERANCE {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Inconclusive
                    };
                    (status, format!("half-level witness between labels {labels:?}, |h - 1/2| = {gap:.2e}"))
                }
                Emptiness::Empty { min_measure, samples } => {
                    (CheckStatus::Pass, format!("empty: min measure {min_measure:.4} over {samples} points"))
                }
                Emptiness::Inconclusive { min_measure, samples } => (
                    CheckStatus::Inconclusive,
                    format!("single component, min measure {min_measure:.4} over {samples} points"),
                ),
            };
            rec.push("emptiness", status, summary, value(&r));
        }
    }
}

fn summands(g: &GroupSpec) -> Option<[(Summand, &GroupSpec); 2]> {
    match g.construction() {
        Construction::FreeProduct { left, right } => Some([(Summand::Left, left), (Summand::Right, right)]),
        _ => None,
    }
}

fn conclusion(rec: &mut Recorder, check: String, r: &ConclusionReport) {
    let summary = format!(
        "{} of {} points x {} representatives: {} checks, {} violations, {} undecided",
        r.found,
        r.requested,
        r.representatives,
        r.checks,
        r.violations.len(),
        r.undecided
    );
    rec.push(check, r.outcome.into(), summary, value(r));
}

fn embedding_suite(fx: &Fixture, c: &Common, s: &Settings, rec: &mut Recorder) -> Result<(), UsageError> {
    let g = &fx.group.spec;
    let Some(parts) = summands(g) else {
        rec.push("embedding", CheckStatus::Skipped, "not a free product", Value::Null);
        return Ok(());
    };
    for (which, sub) in parts {
        let tag = format!("{which:?}").to_lowercase();
        if group::check_nonelementary(sub).is_err() {
            rec.push(format!("{tag}/precisely"), CheckStatus::Skipped, format!("summand '{}' is elementary", sub.name), Value::Null);
            continue;
        }
        let samples = limit_samples(sub, c.limit_depth)?;
        let chart = chart_of(c, fx.chart.raster(), &samples);
        let precisely = combination::precisely_qf_embedded(g, which, s.depth, &chart, &samples)?;
        let located = if precisely.violations.is_empty() {
            String::new()
        } else {
            let shown: Vec<&str> = precisely.violations.iter().take(6).map(String::as_str).collect();
            let more = precisely.violations.len() - shown.len();
            let tail = if more > 0 { format!(" and {more} more") } else { String::new() };
            format!(", violated by {}{tail}", shown.join(" "))
        };
        rec.push(
            format!("{tag}/precisely"),
            precisely.outcome.into(),
            format!("{} representatives at depth {}{located}", precisely.representatives, s.depth),
            value(&precisely),
        );
        if !precisely.passed() {
            continue;
        }
        let nicely = combination::nicely_qf_embedded(g, which, s.depth, &chart, &samples)?;
        let nicely_status = match nicely.outcome {
            Outcome::Fail => CheckStatus::Inconclusive,
            o => o.into(),
        };
        rec.push(
            format!("{tag}/nicely"),
            nicely_status,
            format!("boundary-miss witnesses for {} representatives", nicely.representatives),
            value(&nicely),
        );
        let q = HullQuery::new(&chart, &ComponentFilter::All, c.tau)?;
        let interior = combination::verify_interior_embedding(&q, g, which, s.depth, s.samples, s.seed)?;
        conclusion(rec, format!("{tag}/interior"), &interior);
        if nicely.passed() {
            let core = combination::verify_core_embedding(&q, g, which, s.depth, &nicely, (s.samples / 4).max(1), s.seed)?;
            conclusion(rec, format!("{tag}/core"), &core);
        } else {
            rec.push(format!("{tag}/core"), CheckStatus::Skipped, "summand not nicely embedded", Value::Null);
        }
    }
    Ok(())
}

fn combination_suite(fx: &Fixture, rec: &mut Recorder) {
    if summands(&fx.group.spec).is_none() {
        rec.push("certificate", CheckStatus::Skipped, "not a free product", Value::Null);
        return;
    }
    match &fx.group.certificate {
        Some(cert) => rec.push(
            "certificate",
            CheckStatus::Pass,
            format!(
                "ping-pong over caps {:.3} apart, checked to depth {}",
                cert.separation, cert.depth
            ),
            value(cert),
        ),
        None => rec.push("certificate", CheckStatus::Inconclusive, "no separating caps supplied", Value::Null),
    }
    rec.push(
        "product_chart",
        if fx.chart.is_empty() { CheckStatus::Inconclusive } else { CheckStatus::Pass },
        format!("{} components", fx.chart.len()),
        json!({ "components": fx.chart.len() }),
    );
}

fn overall(checks: &[CheckRecord]) -> CheckStatus {
    if checks.iter().any(|c| c.status == CheckStatus::Fail) {
        CheckStatus::Fail
    } else if checks.iter().any(|c| c.status == CheckStatus::Inconclusive) {
        CheckStatus::Inconclusive
    } else {
        CheckStatus::Pass
    }
}

pub fn verify(suite: Suite, c: &Common) -> Result<Status, UsageError> {
    commands::validate(c)?;
    let seed = commands::require_seed(c)?;
    let settings = Settings {
        depth: c.depth.unwrap_or(DEFAULT_DEPTH),
        samples: c.samples.unwrap_or(DEFAULT_SAMPLES),
        seed,
    };
    if settings.depth == 0 {
        return Err(UsageError("--depth must be positive".into()));
    }
    let names: Vec<String> = match &c.config {
        Some(s) => vec![s.clone()],
        None => DEFAULT_FIXTURES.iter().map(|s| s.to_string()).collect(),
    };
    let raster = commands::raster(c)?;
    let mut checks = Vec::new();
    for name in &names {
        let group = load(name)?;
        let samples = limit_samples(&group.spec, c.limit_depth)?;
        let chart = chart_of(c, &raster, &samples);
        let fx = Fixture {
            name: group.spec.name.clone(),
            group,
            chart,
        };
        let run = |s: Suite| suite == Suite::All || suite == s;
        if run(Suite::Cores) {
            cores_suite(&fx, &settings, c.tau, &mut Recorder { fixture: &fx.name, suite: "cores", out: &mut checks })?;
        }
        if run(Suite::Emptiness) {
            emptiness_suite(&fx, &settings, &mut Recorder { fixture: &fx.name, suite: "emptiness", out: &mut checks });
        }
        if run(Suite::Embedding) {
            embedding_suite(&fx, c, &settings, &mut Recorder { fixture: &fx.name, suite: "embedding", out: &mut checks })?;
        }
        if run(Suite::Combination) {
            combination_suite(&fx, &mut Recorder { fixture: &fx.name, suite: "combination", out: &mut checks });
        }
    }
    let status = overall(&checks);
    for r in &checks {
        eprintln!("{:<13} {:<18} {:<20} {:<12} {}", format!("{:?}", r.status).to_lowercase(), r.fixture, r.suite, r.check, r.summary);
    }
    let report = VerifyReport {
        suite: format!("{suite:?}").to_lowercase(),
        resolution: c.res,
        depth: settings.depth,
        limit_depth: c.limit_depth,
        dilation: c.dilation,
        tau: c.tau,
        samples: settings.samples,
        seed,
        status,
        checks,
    };
    let bytes = commands::to_json(&report);
    match &c.out {
        Some(p) => commands::write(&p.with_extension("json"), &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(match status {
        CheckStatus::Fail => Status::Violation,
        CheckStatus::Inconclusive => Status::Inconclusive,
        _ => Status::Pass,
    })
}
