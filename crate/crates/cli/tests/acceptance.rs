//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always reach the output.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::path::Path;
use std::process::{exit, Command};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use visual_core::combination::{self, Outcome};
use visual_core::cores::{self, ComponentFilter, ConvexProbe, Emptiness, HullQuery};
use visual_core::fixtures;
use visual_core::group::{self, Summand};
use visual_core::harmonic::{self, HarmonicEstimate};
use visual_core::moebius::{BallPoint, Cx, Kind, MoebiusMap, SpherePoint};
use visual_core::sphere::{self, Cap, ComponentChart, SphereRaster};
use visual_core::vec3::{self, Vec3};

const LIMIT_DEPTH: usize = 6;

struct Outcomes {
    failed: usize,
}

impl Outcomes {
    fn report(&mut self, id: usize, title: &str, bound: Option<Duration>, run: impl FnOnce() -> Result<String, String>) {
        let t0 = Instant::now();
        let result = run();
        let elapsed = t0.elapsed();
        let result = match (result, bound) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, bound {b:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  criterion {id:>2} {title}: {detail} [{elapsed:.1?}]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  criterion {id:>2} {title}: {detail} [{elapsed:.1?}]");
            }
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chart(name: &str, n: usize) -> ComponentChart {
    let g = fixtures::by_name(name).expect("fixture");
    let pts = group::sample_limit_set(&g, LIMIT_DEPTH, group::DEFAULT_POINT_CAP).expect("limit set").all();
    let raster = SphereRaster::new(n).expect("raster");
    sphere::build_chart(&raster, &pts, raster.default_dilation())
}

fn random_ball(rng: &mut ChaCha8Rng, radius: f64) -> BallPoint {
    loop {
        let v: Vec3 = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
        if vec3::norm(v) < 1.0 {
            return BallPoint::new(vec3::scale(v, radius)).expect("inside");
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
        let n = vec3::norm(v);
        if n > 0.1 && n < 1.0 {
            return vec3::scale(v, 1.0 / n);
        }
    }
}

fn normalization() -> Result<String, String> {
    let raster = SphereRaster::new(32).map_err(|e| e.to_string())?;
    let origin = BallPoint::new([0.0; 3]).unwrap();
    let all: Vec<usize> = (0..raster.len()).collect();
    let full = harmonic::measure_kernel(&origin, &all, &raster).map_err(|e| e.to_string())?;
    let north = |theta: f64| raster.cells_in_cap(&Cap::new([0.0, 0.0, 1.0], theta));
    let hemi = harmonic::measure_kernel(&origin, &north(FRAC_PI_2), &raster).map_err(|e| e.to_string())?;
    let cap = harmonic::measure_kernel(&origin, &north(FRAC_PI_3), &raster).map_err(|e| e.to_string())?;
    check((full.value - 1.0).abs() <= 1e-6, || format!("full sphere {}", full.value))?;
    check((hemi.value - 0.5).abs() <= 2e-3, || format!("hemisphere {}", hemi.value))?;
    check((cap.value - 0.25).abs() <= 2e-3, || format!("cap {}", cap.value))?;
    Ok(format!("full {:.9}, hemisphere {:.6}, cap {:.6}", full.value, hemi.value, cap.value))
}

fn cross_agreement() -> Result<String, String> {
    let charts: Vec<ComponentChart> = ["octagon", "schottky", "free_combination"].iter().map(|n| chart(n, 32)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let ch = &charts[rng.random_range(0..charts.len())];
        let label = rng.random_range(0..ch.len());
        let y = random_ball(&mut rng, 0.8);
        let kernel = harmonic::measure_labels(&y, ch).map_err(|e| e.to_string())?[label];
        let rays = harmonic::measure_rays_labels(&y, ch, n, 100 + k)[label];
        let sigma = (rays.value * (1.0 - rays.value) / n as f64).sqrt();
        let gap = (kernel.value - rays.value).abs();
        worst = worst.max(gap / (kernel.error + 3.0 * sigma).max(f64::MIN_POSITIVE));
        good += (gap <= kernel.error + 3.0 * sigma) as usize;
    }
    check(good >= 19, || format!("{good}/20 pairs agree"))?;
    Ok(format!("{good}/20 pairs agree, worst gap/bound {worst:.2}"))
}

fn random_loxodromic(rng: &mut ChaCha8Rng) -> MoebiusMap {
    loop {
        let e: [Cx; 4] = [0, 1, 2, 3].map(|_| Cx::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)));
        let det = e[0] * e[3] - e[1] * e[2];
        if det.norm() < 0.2 {
            continue;
        }
        let s = det.sqrt();
        let Ok(m) = MoebiusMap::new(e[0] / s, e[1] / s, e[2] / s, e[3] / s) else {
            continue;
        };
        if m.classify() == Kind::Loxodromic && m.norm() < 4.0 {
            return m;
        }
    }
}

/// Kernel estimate of the raster cells centered in `cap`, with an error
/// widened by the mass of the cells straddling the cap boundary.
fn raster_cap(y: &BallPoint, cap: &Cap, raster: &SphereRaster) -> Result<HarmonicEstimate, String> {
    let inner = raster.cells_in_cap(cap);
    let half = raster.cell_diagonal() / 2.0;
    let straddle: Vec<usize> = (0..raster.len())
        .filter(|&c| (vec3::angle(raster.cell(c).center, cap.center) - cap.half_angle).abs() <= half)
        .collect();
    let mut est = harmonic::measure_kernel(y, &inner, raster).map_err(|e| e.to_string())?;
    let edge = harmonic::measure_kernel(y, &straddle, raster).map_err(|e| e.to_string())?;
    est.error += edge.upper();
    Ok(est)
}

fn isometry_invariance() -> Result<String, String> {
    let raster: Arc<SphereRaster> = SphereRaster::new(32).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut closed_worst, mut kernel_good) = (0.0f64, 0);
    let mut done = 0;
    while done < 50 {
        let g = random_loxodromic(&mut rng);
        let cap = Cap::new(random_unit(&mut rng), rng.random_range(0.3..1.3));
        let y = random_ball(&mut rng, 0.7);
        let Ok(gy) = g.apply_ball(&y) else { continue };
        let Ok(gcap) = cap.image(&g) else { continue };
        if gy.radius() > 0.9 || gcap.half_angle < 0.15 || gcap.half_angle > std::f64::consts::PI - 0.15 {
            continue;
        }
        done += 1;
        let a = harmonic::cap_measure(&y, &cap).map_err(|e| e.to_string())?.value;
        let b = harmonic::cap_measure(&gy, &gcap).map_err(|e| e.to_string())?.value;
        closed_worst = closed_worst.max((a - b).abs());
        let ka = raster_cap(&y, &cap, &raster)?;
        let kb = raster_cap(&gy, &gcap, &raster)?;
        kernel_good += ((ka.value - kb.value).abs() <= ka.error + kb.error) as usize;
    }
    check(closed_worst <= 1e-8, || format!("closed-form deviation {closed_worst:.2e}"))?;
    check(kernel_good >= 45, || format!("kernel invariance {kernel_good}/50"))?;
    Ok(format!("closed form within {closed_worst:.1e}, kernel {kernel_good}/50"))
}

fn schottky_empty() -> Result<String, String> {
    let mut mins = Vec::new();
    for n in [32, 64] {
        match cores::emptiness_probe(&chart("schottky", n), 100, 4).map_err(|e| e.to_string())? {
            Emptiness::Empty { min_measure, .. } if min_measure >= 0.9 => mins.push(min_measure),
            other => return Err(format!("n={n}: {other:?}")),
        }
    }
    Ok(format!("empty at n=32 (min {:.4}) and n=64 (min {:.4})", mins[0], mins[1]))
}

fn witnesses() -> Result<String, String> {
    let mut seen = Vec::new();
    for name in fixtures::NAMES {
        let g = fixtures::by_name(name).unwrap();
        if group::check_nonelementary(&g).is_err() {
            continue;
        }
        let ch = chart(name, 32);
        if ch.len() < 2 {
            continue;
        }
        match cores::emptiness_probe(&ch, 10, 5).map_err(|e| format!("{name}: {e}"))? {
            Emptiness::Witness { measure, .. } if (measure - 0.5).abs() <= 1e-3 => {
                seen.push(format!("{name} {:.1e}", (measure - 0.5).abs()))
            }
            other => return Err(format!("{name}: {other:?}")),
        }
    }
    check(seen.len() >= 4, || format!("only {} multi-component fixtures", seen.len()))?;
    Ok(seen.join(", "))
}

fn inclusion() -> Result<String, String> {
    let mut out = Vec::new();
    for name in ["octagon", "free_combination"] {
        let ch = chart(name, 32);
        let q = HullQuery::new(&ch, &ComponentFilter::All, 0.02).map_err(|e| e.to_string())?;
        let probe = ConvexProbe::from_chart(&ch).map_err(|e| e.to_string())?;
        let r = cores::check_v_subset_c(&q, &probe, 200, 6);
        check(r.found == 200, || format!("{name}: only {} visual points", r.found))?;
        check(r.violations.is_empty(), || format!("{name}: {} violations", r.violations.len()))?;
        out.push(format!("{name} 200/200 in {} draws", r.attempts));
    }
    Ok(out.join(", "))
}

fn equality_case() -> Result<String, String> {
    let ch = chart("octagon", 32);
    let q = HullQuery::new(&ch, &ComponentFilter::All, 0.02).map_err(|e| e.to_string())?;
    let probe = ConvexProbe::from_chart(&ch).map_err(|e| e.to_string())?;
    let r = cores::check_equality_case(&q, &probe, 100, 0.3, 0.2, 7).map_err(|e| e.to_string())?;
    check(r.plane_failures.is_empty(), || format!("{} plane points Outside", r.plane_failures.len()))?;
    check(r.off_failures.is_empty(), || format!("{} off-plane points not Outside", r.off_failures.len()))?;
    check(r.min_off_visual_margin > 0.0 && r.min_off_convex_margin > 0.0, || "nonpositive margin".into())?;
    Ok(format!(
        "off-plane margins {:.3e} visual, {:.3e} convex",
        r.min_off_visual_margin, r.min_off_convex_margin
    ))
}

fn embedding() -> Result<String, String> {
    let g = fixtures::free_combination();
    let sub = fixtures::lifted_octagon();
    let samples: Vec<SpherePoint> = group::sample_limit_set(&sub, LIMIT_DEPTH, group::DEFAULT_POINT_CAP).unwrap().all();
    let raster = SphereRaster::new(32).unwrap();
    let ch = sphere::build_chart(&raster, &samples, raster.default_dilation());
    let nicely = combination::nicely_qf_embedded(&g, Summand::Left, 3, &ch, &samples).map_err(|e| e.to_string())?;
    check(nicely.passed(), || format!("nicely: {:?} {:?}", nicely.outcome, nicely.violations))?;
    let q = HullQuery::new(&ch, &ComponentFilter::All, 0.02).map_err(|e| e.to_string())?;
    let interior = combination::verify_interior_embedding(&q, &g, Summand::Left, 3, 200, 8).map_err(|e| e.to_string())?;
    check(interior.found == 200 && interior.violations.is_empty(), || {
        format!("interior: {} found, {} violations", interior.found, interior.violations.len())
    })?;
    let core = combination::verify_core_embedding(&q, &g, Summand::Left, 3, &nicely, 50, 9).map_err(|e| e.to_string())?;
    check(core.found == 50 && core.violations.is_empty(), || {
        format!("core: {} found, {} violations", core.found, core.violations.len())
    })?;

    let bad = fixtures::corrupted();
    let base = fixtures::octagon();
    let bs = group::sample_limit_set(&base, LIMIT_DEPTH, group::DEFAULT_POINT_CAP).unwrap().all();
    let bch = sphere::build_chart(&raster, &bs, raster.default_dilation());
    let neg = combination::precisely_qf_embedded(&bad, Summand::Left, 1, &bch, &bs).map_err(|e| e.to_string())?;
    check(neg.outcome == Outcome::Fail, || "corrupted fixture passed at L=1".into())?;
    Ok(format!(
        "{} representatives; interior {} checks, core {} checks ({} undecided); corrupted fails on {}",
        nicely.representatives,
        interior.checks,
        core.checks,
        core.undecided,
        neg.violations.join(" ")
    ))
}

fn vcore(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_vcore"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("vcore runs");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn verify_all(dir: &Path, res: &str, extra: &[&str], stem: &str) -> Result<Vec<u8>, String> {
    let mut args = vec!["verify", "all", "--seed", "11", "--res", res, "--out", stem];
    args.extend_from_slice(extra);
    let (code, _) = vcore(&args, dir);
    let bytes = std::fs::read(dir.join(format!("{stem}.json"))).map_err(|e| e.to_string())?;
    let expect = if extra.contains(&"corrupted") { 1 } else { 0 };
    check(code == expect, || format!("verify {res} {extra:?} exited {code}"))?;
    Ok(bytes)
}

fn determinism(dir: &Path, first: &mut Option<Vec<u8>>) -> Result<String, String> {
    let a = verify_all(dir, "32", &[], "a")?;
    let b = verify_all(dir, "32", &[], "b")?;
    check(a == b, || "verify reports differ".into())?;
    let slice = |stem: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let (code, _) = vcore(&["slice", "--config", "free_combination", "--plane", "vertical", "--pixels", "48", "--out", stem], dir);
        check(code == 0, || format!("slice exited {code}"))?;
        let read = |ext: &str| std::fs::read(dir.join(format!("{stem}.{ext}"))).map_err(|e| e.to_string());
        Ok((read("ppm")?, read("csv")?))
    };
    check(slice("s1")? == slice("s2")?, || "slice outputs differ".into())?;
    let len = a.len();
    *first = Some(a);
    Ok(format!("two verify reports ({len} bytes) and two slices identical"))
}

fn verdicts(report: &[u8]) -> Result<BTreeMap<String, String>, String> {
    let v: Value = serde_json::from_slice(report).map_err(|e| e.to_string())?;
    Ok(v["checks"]
        .as_array()
        .ok_or("no checks")?
        .iter()
        .map(|c| {
            (
                format!("{}/{}/{}", c["fixture"].as_str().unwrap_or(""), c["suite"].as_str().unwrap_or(""), c["check"].as_str().unwrap_or("")),
                c["status"].as_str().unwrap_or("").to_string(),
            )
        })
        .collect())
}

fn refinement(dir: &Path, coarse: Option<Vec<u8>>) -> Result<String, String> {
    let coarse = match coarse {
        Some(c) => c,
        None => verify_all(dir, "32", &[], "c32")?,
    };
    let fine = verify_all(dir, "64", &[], "c64")?;
    let (a, b) = (verdicts(&coarse)?, verdicts(&fine)?);
    check(a == b, || format!("verdicts changed: {a:?} vs {b:?}"))?;
    let bad32 = verdicts(&verify_all(dir, "32", &["--config", "corrupted"], "x32")?)?;
    let bad64 = verdicts(&verify_all(dir, "64", &["--config", "corrupted"], "x64")?)?;
    check(bad32 == bad64, || "corrupted verdicts changed".into())?;
    let mut counts = Vec::new();
    for name in ["octagon", "schottky", "lifted_octagon", "free_combination"] {
        let (c32, c64) = (chart(name, 32).len(), chart(name, 64).len());
        check(c32 == c64, || format!("{name}: {c32} vs {c64} components"))?;
        counts.push(format!("{name} {c32}"));
    }
    Ok(format!("{} verdicts stable; components {}", a.len() + bad32.len(), counts.join(", ")))
}

fn main() {
    let mut out = Outcomes { failed: 0 };
    let secs = Duration::from_secs;
    out.report(1, "measure normalization", Some(secs(5)), normalization);
    out.report(2, "estimator cross-agreement", Some(secs(60)), cross_agreement);
    out.report(3, "isometry invariance", Some(secs(60)), isometry_invariance);
    out.report(4, "empty visual hull (Schottky)", Some(secs(120)), schottky_empty);
    out.report(5, "half-level witnesses", Some(secs(30)), witnesses);
    out.report(6, "visual hull inside convex hull", Some(secs(180)), inclusion);
    out.report(7, "equality on the invariant plane", Some(secs(120)), equality_case);
    out.report(8, "embedding predicates and conclusions", Some(secs(300)), embedding);
    let dir = tempfile::tempdir().expect("temp dir");
    let mut report32 = None;
    out.report(9, "determinism", None, || determinism(dir.path(), &mut report32));
    out.report(10, "refinement stability", None, || refinement(dir.path(), report32.take()));
    if out.failed > 0 {
        println!("{} acceptance criteria failed", out.failed);
        exit(1);
    }
    println!("all acceptance criteria passed");
}
