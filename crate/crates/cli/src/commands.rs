use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use visual_core::combination::{klein_combine_free, DEFAULT_DEPTH};
use visual_core::cores::{self, ComponentFilter, ConvexProbe, HullQuery, SlicePlane, SliceState};
use visual_core::group::{self, GroupSpec};
use visual_core::harmonic::{self, HarmonicEstimate};
use visual_core::io::{self, LoadedGroup};
use visual_core::moebius::{BallPoint, SpherePoint};
use visual_core::sphere::{self, Cap, ComponentChart, SphereRaster};
use visual_core::vec3::Vec3;
use visual_core::fixtures;

use crate::{Common, MethodArg, PlaneArg, Status, UsageError};

type CmdResult = Result<Status, UsageError>;

pub const DEFAULT_RAYS: usize = 100_000;

/// Resolves `--config` as a file path, falling back to a shipped fixture.
pub fn load(spec: &str) -> Result<LoadedGroup, UsageError> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(io::load_group(path)?);
    }
    if spec == "free_combination" {
        let (b1, b2) = fixtures::combination_caps();
        let (spec, cert) = klein_combine_free(spec, fixtures::lifted_octagon(), fixtures::cyclic_north(), b1, b2, DEFAULT_DEPTH)?;
        return Ok(LoadedGroup {
            spec,
            certificate: Some(cert),
        });
    }
    match fixtures::by_name(spec) {
        Some(g) => Ok(LoadedGroup {
            spec: g,
            certificate: None,
        }),
        None => Err(UsageError(format!("'{spec}' is neither a readable file nor a fixture name"))),
    }
}

pub fn require_config(c: &Common) -> Result<LoadedGroup, UsageError> {
    match &c.config {
        Some(s) => load(s),
        None => Err(UsageError("--config is required".into())),
    }
}

pub fn validate(c: &Common) -> Result<(), UsageError> {
    if c.tau <= 0.0 || !c.tau.is_finite() || c.tau >= 0.5 {
        return Err(UsageError(format!("--tau must lie in (0, 1/2), got {}", c.tau)));
    }
    if let Some(r) = c.dilation {
        if r <= 0.0 || !r.is_finite() {
            return Err(UsageError(format!("--dilation must be positive, got {r}")));
        }
    }
    if c.samples == Some(0) {
        return Err(UsageError("--samples must be positive".into()));
    }
    if c.limit_depth == 0 {
        return Err(UsageError("--limit-depth must be positive".into()));
    }
    if c.res < sphere::MIN_RESOLUTION {
        return Err(UsageError(format!(
            "resolution {} is below the minimum {}",
            c.res,
            sphere::MIN_RESOLUTION
        )));
    }
    Ok(())
}

pub fn require_seed(c: &Common) -> Result<u64, UsageError> {
    c.seed.ok_or_else(|| UsageError("--seed is required for sampled computations".into()))
}

pub fn parse_vec3(s: &str) -> Result<Vec3, UsageError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| UsageError(format!("bad vector '{s}': {e}")))?;
    match parts[..] {
        [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Ok([x, y, z]),
        _ => Err(UsageError(format!("expected three finite components, got '{s}'"))),
    }
}

pub fn out_path(c: &Common, default: &str, ext: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from(default)).with_extension(ext)
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), UsageError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s.into_bytes()
}

pub fn limit_samples(g: &GroupSpec, depth: usize) -> Result<Vec<SpherePoint>, UsageError> {
    Ok(group::sample_limit_set(g, depth, group::DEFAULT_POINT_CAP)?.all())
}

pub fn raster(c: &Common) -> Result<Arc<SphereRaster>, UsageError> {
    Ok(SphereRaster::new(c.res)?)
}

pub fn chart_of(c: &Common, raster: &Arc<SphereRaster>, samples: &[SpherePoint]) -> ComponentChart {
    let dilation = c.dilation.unwrap_or_else(|| raster.default_dilation());
    sphere::build_chart(raster, samples, dilation)
}

pub fn limitset(c: &Common, view: &str, pixels: usize) -> CmdResult {
    validate(c)?;
    let g = require_config(c)?.spec;
    let view = parse_vec3(view)?;
    if visual_core::vec3::norm(view) == 0.0 {
        return Err(UsageError("--view must be nonzero".into()));
    }
    let depth = c.depth.unwrap_or(c.limit_depth);
    let points = group::sample_limit_set(&g, depth, group::DEFAULT_POINT_CAP)?.all();
    if points.is_empty() {
        eprintln!("warning: no limit points at depth {depth}");
    }
    let csv = out_path(c, "limitset", "csv");
    let img = out_path(c, "limitset", "ppm");
    write(&csv, io::points_csv(&points).as_bytes())?;
    write(&img, &io::limit_set_ppm(&points, pixels.max(1), view))?;
    println!("{} limit points -> {}, {}", points.len(), csv.display(), img.display());
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct ComponentsFile {
    group: String,
    limit_depth: usize,
    limit_samples: usize,
    chart: sphere::ChartReport,
}

pub fn components(c: &Common, pixels: usize) -> CmdResult {
    validate(c)?;
    let g = require_config(c)?.spec;
    let raster = raster(c)?;
    let samples = limit_samples(&g, c.limit_depth)?;
    let chart = chart_of(c, &raster, &samples);
    let report = ComponentsFile {
        group: g.name.clone(),
        limit_depth: c.limit_depth,
        limit_samples: samples.len(),
        chart: chart.report(),
    };
    let json = out_path(c, "components", "json");
    let img = out_path(c, "components", "ppm");
    write(&json, &to_json(&report))?;
    write(&img, &chart.to_ppm(pixels.max(1)))?;
    println!("{} components", chart.len());
    for comp in chart.components() {
        println!(
            "  label {:>3}: {:>7} cells, area {:.6}, {:?}",
            comp.id, comp.cell_count, comp.area, comp.jordan.state
        );
    }
    Ok(Status::Pass)
}

/// Which part of the sphere a measure is taken of.
enum Selection {
    Whole,
    Labels(Vec<usize>),
}

/// `cap:x,y,z,angle`: raster cells whose centers lie in a round cap.
fn parse_cap(s: &str) -> Result<Option<Cap>, UsageError> {
    let Some(rest) = s.strip_prefix("cap:") else {
        return Ok(None);
    };
    let v: Vec<f64> = rest
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| UsageError(format!("bad cap '{s}': {e}")))?;
    match v[..] {
        [x, y, z, a] if visual_core::vec3::norm([x, y, z]) > 0.0 && a > 0.0 && a < std::f64::consts::PI => {
            Ok(Some(Cap::new(visual_core::vec3::normalize([x, y, z]), a)))
        }
        _ => Err(UsageError(format!("expected cap:x,y,z,angle with angle in (0, pi), got '{s}'"))),
    }
}

fn parse_selection(s: &str) -> Result<Option<Vec<usize>>, UsageError> {
    match s {
        "whole" => Ok(None),
        "all" => Ok(Some(Vec::new())),
        _ => s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| UsageError(format!("bad label '{p}': {e}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
    }
}

fn resolve_selection(parsed: Option<Vec<usize>>, chart: &ComponentChart) -> Result<Selection, UsageError> {
    match parsed {
        None => Ok(Selection::Whole),
        Some(v) if v.is_empty() => Ok(Selection::Labels((0..chart.len()).collect())),
        Some(v) => {
            if let Some(bad) = v.iter().find(|&&l| l >= chart.len()) {
                return Err(UsageError(format!("label {bad} not in chart with {} components", chart.len())));
            }
            Ok(Selection::Labels(v))
        }
    }
}

fn filter_of(parsed: &Option<Vec<usize>>) -> ComponentFilter {
    match parsed {
        Some(v) if !v.is_empty() => ComponentFilter::Labels(v.clone()),
        _ => ComponentFilter::All,
    }
}

#[derive(Serialize)]
struct MeasureFile {
    point: Vec3,
    selection: String,
    kernel: Option<HarmonicEstimate>,
    rays: Option<HarmonicEstimate>,
    difference: Option<f64>,
}

fn print_estimate(e: &HarmonicEstimate) {
    let seed = e.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
    println!(
        "method={} value={:.6} error={:.3e} samples={}{seed}",
        serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        e.value,
        e.error,
        e.samples
    );
}

pub fn hmeasure(c: &Common, point: &str, component: &str, method: MethodArg) -> CmdResult {
    validate(c)?;
    let y = BallPoint::new(parse_vec3(point)?).map_err(|e| UsageError(format!("point {point}: {e}")))?;
    let cap = parse_cap(component)?;
    let parsed = if cap.is_some() { None } else { parse_selection(component)? };
    let raster = raster(c)?;
    let chart = match (&parsed, &c.config) {
        (None, _) => None,
        _ => {
            let g = require_config(c)?.spec;
            Some(chart_of(c, &raster, &limit_samples(&g, c.limit_depth)?))
        }
    };
    let selection = match &chart {
        Some(ch) => resolve_selection(parsed, ch)?,
        None => Selection::Whole,
    };
    let cells: Vec<usize> = match (&selection, &chart, &cap) {
        (_, _, Some(cap)) => raster.cells_in_cap(cap),
        (Selection::Labels(ls), Some(ch), _) => ls.iter().flat_map(|&l| ch.components()[l].cells.iter().copied()).collect(),
        _ => (0..raster.len()).collect(),
    };
    let kernel = match method {
        MethodArg::Rays => None,
        _ => Some(harmonic::measure_kernel(&y, &cells, &raster)?),
    };
    let rays = match method {
        MethodArg::Kernel => None,
        _ => {
            let seed = require_seed(c)?;
            let n = c.samples.unwrap_or(DEFAULT_RAYS);
            let mut member = vec![false; raster.len()];
            cells.iter().for_each(|&k| member[k] = true);
            let r = &raster;
            Some(harmonic::measure_rays(&y, |v| member[r.locate(v)], n, seed))
        }
    };
    for e in kernel.iter().chain(rays.iter()) {
        print_estimate(e);
    }
    let difference = match (&kernel, &rays) {
        (Some(k), Some(r)) => {
            let d = k.value - r.value;
            let bound = k.error + r.error;
            println!("difference={d:.6} combined_error={bound:.3e} within={}", d.abs() <= bound);
            Some(d)
        }
        _ => None,
    };
    if let Some(out) = &c.out {
        let file = MeasureFile {
            point: y.coords(),
            selection: component.to_string(),
            kernel,
            rays,
            difference,
        };
        write(&out.with_extension("json"), &to_json(&file))?;
    }
    Ok(Status::Pass)
}

pub fn slice(c: &Common, plane: PlaneArg, custom: [Option<String>; 3], window: f64, pixels: usize, component: &str) -> CmdResult {
    validate(c)?;
    if window <= 0.0 || !window.is_finite() || pixels == 0 {
        return Err(UsageError("--window and --pixels must be positive".into()));
    }
    let plane = match plane {
        PlaneArg::Equatorial => SlicePlane::equatorial(),
        PlaneArg::Vertical => SlicePlane::vertical(),
        PlaneArg::Custom => {
            let [base, e1, e2] = custom;
            let get = |v: Option<String>, name: &str| -> Result<Vec3, UsageError> {
                parse_vec3(&v.ok_or_else(|| UsageError(format!("--plane custom needs --{name}")))?)
            };
            SlicePlane::new(get(base, "base")?, get(e1, "e1")?, get(e2, "e2")?)?
        }
    };
    let g = require_config(c)?.spec;
    let raster = raster(c)?;
    let chart = chart_of(c, &raster, &limit_samples(&g, c.limit_depth)?);
    let parsed = parse_selection(component)?;
    if parsed.is_none() || component.starts_with("cap:") {
        return Err(UsageError("slices classify against components; 'whole' is not a hull".into()));
    }
    resolve_selection(parsed.clone(), &chart)?;
    let q = HullQuery::new(&chart, &filter_of(&parsed), c.tau)?;
    let probe = ConvexProbe::from_chart(&chart)?;
    let px = cores::slice_classify(&plane, window, pixels, &q, &probe);
    let img = out_path(c, "slice", "ppm");
    let csv = out_path(c, "slice", "csv");
    write(&img, &io::slice_ppm(&px, pixels))?;
    write(&csv, io::slice_csv(&px, pixels).as_bytes())?;
    let count = |s: SliceState| px.iter().filter(|p| p.state == s).count();
    println!(
        "V {} C_only {} outside {} uncertain {} off_ball {}",
        count(SliceState::V),
        count(SliceState::COnly),
        count(SliceState::Outside),
        count(SliceState::Uncertain),
        count(SliceState::OffBall)
    );
    Ok(Status::Pass)
}
