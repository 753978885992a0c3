//! Group files (JSON), point and slice tables (CSV) and images (PPM).
//!
//! Group file layout:
//!
//! ```json
//! { "name": "pair",
//!   "generators": [{ "label": "a", "matrix": [[1,0],[2,0],[0,0],[1,0]] }],
//!   "construction": "raw" }
//! ```
//!
//! A free product replaces `"raw"` by
//! `{ "free_product": [left, right], "caps": [cap, cap] }`, where each
//! summand is a path relative to the file or an inline group object and the
//! optional caps (`{ "center": [x,y,z], "half_angle": a }`) request a
//! ping-pong certificate. The generators of a free product are those of its
//! summands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::combination::{klein_combine_free, PingPongCertificate, DEFAULT_DEPTH};
use crate::cores::{SlicePixel, SliceState};
use crate::error::{Error, Result};
use crate::group::{Construction, Generator, GroupSpec};
use crate::moebius::{Cx, MoebiusMap, SpherePoint};
use crate::sphere::Cap;
use crate::vec3::{self, Vec3};

/// Accepted deviation of a file matrix determinant from 1.
pub const DET_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorFile {
    pub label: String,
    /// Entries `a, b, c, d` as `[re, im]` pairs.
    pub matrix: [[f64; 2]; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SummandRef {
    Path(String),
    Inline(Box<GroupFile>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstructionFile {
    Tag(String),
    FreeProduct {
        free_product: [SummandRef; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        caps: Option<[Cap; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        certificate_depth: Option<usize>,
    },
}

impl Default for ConstructionFile {
    fn default() -> Self {
        ConstructionFile::Tag("raw".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorFile>,
    #[serde(default)]
    pub construction: ConstructionFile,
}

/// A group read from disk together with the certificate its caps earned.
#[derive(Debug, Clone)]
pub struct LoadedGroup {
    pub spec: GroupSpec,
    pub certificate: Option<PingPongCertificate>,
}

fn matrix_from_file(g: &GeneratorFile) -> Result<MoebiusMap> {
    let [a, b, c, d] = g.matrix.map(|[re, im]| Cx::new(re, im));
    let det = a * d - b * c;
    if !det.is_finite() || (det - Cx::new(1.0, 0.0)).norm() > DET_TOLERANCE {
        return Err(Error::Determinant(format!("{det} of generator '{}'", g.label)));
    }
    MoebiusMap::new(a, b, c, d)
}

fn matrix_to_file(label: &str, m: &MoebiusMap) -> GeneratorFile {
    GeneratorFile {
        label: label.into(),
        matrix: m.entries().map(|e| [e.re, e.im]),
    }
}

fn build(file: &GroupFile, base: &Path) -> Result<LoadedGroup> {
    match &file.construction {
        ConstructionFile::Tag(tag) if tag == "raw" => {
            let gens = file
                .generators
                .iter()
                .map(|g| {
                    Ok(Generator {
                        label: g.label.clone(),
                        map: matrix_from_file(g)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if gens.is_empty() {
                return Err(Error::Format(format!("group '{}' has no generators", file.name)));
            }
            Ok(LoadedGroup {
                spec: GroupSpec::raw(file.name.clone(), gens)?,
                certificate: None,
            })
        }
        ConstructionFile::Tag(tag) => Err(Error::Format(format!("unknown construction '{tag}'"))),
        ConstructionFile::FreeProduct {
            free_product: [l, r],
            caps,
            certificate_depth,
        } => {
            let left = load_summand(l, base)?.spec;
            let right = load_summand(r, base)?.spec;
            if !file.generators.is_empty() {
                return Err(Error::Format(format!(
                    "free product '{}' takes its generators from its summands",
                    file.name
                )));
            }
            match caps {
                Some([b1, b2]) => {
                    let depth = certificate_depth.unwrap_or(DEFAULT_DEPTH);
                    let (spec, cert) = klein_combine_free(&file.name, left, right, *b1, *b2, depth)?;
                    Ok(LoadedGroup {
                        spec,
                        certificate: Some(cert),
                    })
                }
                None => Ok(LoadedGroup {
                    spec: GroupSpec::free_product(file.name.clone(), left, right)?,
                    certificate: None,
                }),
            }
        }
    }
}

fn load_summand(r: &SummandRef, base: &Path) -> Result<LoadedGroup> {
    match r {
        SummandRef::Path(p) => load_group(&base.join(p)),
        SummandRef::Inline(f) => build(f, base),
    }
}

/// Parses a group file; relative summand paths resolve against `base`.
pub fn parse_group(json: &str, base: &Path) -> Result<LoadedGroup> {
    let file: GroupFile = serde_json::from_str(json)?;
    build(&file, base)
}

pub fn load_group(path: &Path) -> Result<LoadedGroup> {
    let text = fs::read_to_string(path)?;
    parse_group(&text, path.parent().unwrap_or(Path::new(".")))
}

/// File form of a group with summands inlined.
pub fn group_file(g: &GroupSpec) -> GroupFile {
    match g.construction() {
        Construction::FreeProduct { left, right } => GroupFile {
            name: g.name.clone(),
            generators: Vec::new(),
            construction: ConstructionFile::FreeProduct {
                free_product: [
                    SummandRef::Inline(Box::new(group_file(left))),
                    SummandRef::Inline(Box::new(group_file(right))),
                ],
                caps: None,
                certificate_depth: None,
            },
        },
        _ => GroupFile {
            name: g.name.clone(),
            generators: g.generators().iter().map(|x| matrix_to_file(&x.label, &x.map)).collect(),
            construction: ConstructionFile::default(),
        },
    }
}

/// Largest entrywise distance between the generator matrices of two groups
/// with matching labels, up to sign; `None` if the labels differ.
pub fn generator_distance(a: &GroupSpec, b: &GroupSpec) -> Option<f64> {
    if a.generators().len() != b.generators().len() {
        return None;
    }
    let mut worst = 0.0f64;
    for (x, y) in a.generators().iter().zip(b.generators()) {
        if x.label != y.label {
            return None;
        }
        worst = worst.max(x.map.distance(&y.map));
    }
    Some(worst)
}

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub const POINTS_HEADER: &str = "x,y,z";

pub fn points_csv(points: &[SpherePoint]) -> String {
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for p in points {
        let v = p.unit();
        out.push_str(&format!("{},{},{}\n", num(v[0]), num(v[1]), num(v[2])));
    }
    out
}

pub const SLICE_HEADER: &str = "row,col,x,y,z,state,visual_margin,convex_margin";

pub fn slice_state_name(s: SliceState) -> &'static str {
    match s {
        SliceState::V => "v",
        SliceState::COnly => "c_only",
        SliceState::Outside => "outside",
        SliceState::Uncertain => "uncertain",
        SliceState::OffBall => "off_ball",
    }
}

/// Signed margin: positive Inside, negative Outside, `-|m|` fixed to zero
/// for Uncertain.
fn signed_margin(v: &crate::verdict::Verdict) -> f64 {
    match v.state {
        crate::verdict::State::Inside => v.margin,
        crate::verdict::State::Outside => -v.margin,
        crate::verdict::State::Uncertain => 0.0,
    }
}

pub fn slice_csv(pixels: &[SlicePixel], resolution: usize) -> String {
    let mut out = String::from(SLICE_HEADER);
    out.push('\n');
    for (k, p) in pixels.iter().enumerate() {
        let (row, col) = (k / resolution, k % resolution);
        let (v, c) = if p.state == SliceState::OffBall {
            (String::new(), String::new())
        } else {
            (num(signed_margin(&p.visual)), num(signed_margin(&p.convex)))
        };
        out.push_str(&format!(
            "{row},{col},{},{},{},{},{v},{c}\n",
            num(p.point[0]),
            num(p.point[1]),
            num(p.point[2]),
            slice_state_name(p.state)
        ));
    }
    out
}

pub fn slice_color(s: SliceState) -> [u8; 3] {
    match s {
        SliceState::V => [40, 80, 220],
        SliceState::COnly => [60, 180, 80],
        SliceState::Outside => [255, 255, 255],
        SliceState::Uncertain => [150, 150, 150],
        SliceState::OffBall => [0, 0, 0],
    }
}

/// Binary PPM (P6).
pub fn ppm(width: usize, height: usize, pixels: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for p in pixels {
        out.extend_from_slice(p);
    }
    out
}

pub fn slice_ppm(pixels: &[SlicePixel], resolution: usize) -> Vec<u8> {
    let colors: Vec<[u8; 3]> = pixels.iter().map(|p| slice_color(p.state)).collect();
    ppm(resolution, resolution, &colors)
}

/// Orthographic view of sphere points from direction `view`: the visible
/// hemisphere in black, the far side in light gray, on a pale disk.
pub fn limit_set_ppm(points: &[SpherePoint], size: usize, view: Vec3) -> Vec<u8> {
    let w = vec3::normalize(view);
    let e1 = vec3::orthogonal(w);
    let e2 = vec3::cross(w, e1);
    let half = size as f64 / 2.0;
    let mut img = vec![[255u8, 255, 255]; size * size];
    for row in 0..size {
        for col in 0..size {
            let (a, b) = ((col as f64 + 0.5 - half) / half, (half - row as f64 - 0.5) / half);
            if a * a + b * b <= 1.0 {
                img[row * size + col] = [235, 235, 245];
            }
        }
    }
    let mut depth = vec![f64::NEG_INFINITY; size * size];
    for p in points {
        let v = p.unit();
        let (a, b, d) = (vec3::dot(v, e1), vec3::dot(v, e2), vec3::dot(v, w));
        let col = ((a + 1.0) * half).floor().clamp(0.0, size as f64 - 1.0) as usize;
        let row = ((1.0 - b) * half).floor().clamp(0.0, size as f64 - 1.0) as usize;
        let k = row * size + col;
        if d > depth[k] {
            depth[k] = d;
            img[k] = if d >= 0.0 { [0, 0, 0] } else { [180, 180, 190] };
        }
    }
    ppm(size, size, &img)
}
