//! Finitely generated groups of Möbius maps: generator lists with optional
//! free-product or HNN provenance, word enumeration, limit-set sampling and
//! coset representatives relative to a distinguished subgroup.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::moebius::{Kind, MoebiusMap, SpherePoint};

/// Relative matrix tolerance for identifying two words as the same element.
pub const MATRIX_DEDUP_TOL: f64 = 1e-8;
/// Angular resolution for deduplicating limit-set samples.
pub const ANGULAR_DEDUP_TOL: f64 = 1e-6;
pub const DEFAULT_ELEMENT_CAP: usize = 2_000_000;
pub const DEFAULT_POINT_CAP: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct Generator {
    pub label: String,
    pub map: MoebiusMap,
}

#[derive(Debug, Clone)]
pub enum Construction {
    Raw,
    FreeProduct { left: Box<GroupSpec>, right: Box<GroupSpec> },
    Hnn { base: Box<GroupSpec> },
}

#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub name: String,
    generators: Vec<Generator>,
    construction: Construction,
}

/// Which subgroup plays the role of the distinguished subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summand {
    Left,
    Right,
    /// The base group of an HNN extension.
    Base,
    Whole,
}

impl GroupSpec {
    pub fn raw(name: impl Into<String>, generators: Vec<Generator>) -> Result<Self> {
        let spec = GroupSpec {
            name: name.into(),
            generators,
            construction: Construction::Raw,
        };
        spec.check_labels()?;
        Ok(spec)
    }

    /// Free product with generator list `left ++ right`.
    pub fn free_product(name: impl Into<String>, left: GroupSpec, right: GroupSpec) -> Result<Self> {
        let generators = left.generators.iter().chain(&right.generators).cloned().collect();
        let spec = GroupSpec {
            name: name.into(),
            generators,
            construction: Construction::FreeProduct {
                left: Box::new(left),
                right: Box::new(right),
            },
        };
        spec.check_labels()?;
        Ok(spec)
    }

    /// HNN extension of `base` with stable letter `stable` (appended last).
    pub fn hnn(name: impl Into<String>, base: GroupSpec, stable: Generator) -> Result<Self> {
        let mut generators = base.generators.clone();
        generators.push(stable);
        let spec = GroupSpec {
            name: name.into(),
            generators,
            construction: Construction::Hnn { base: Box::new(base) },
        };
        spec.check_labels()?;
        Ok(spec)
    }

    fn check_labels(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for g in &self.generators {
            if !seen.insert(g.label.as_str()) {
                return Err(Error::Format(format!("duplicate generator label '{}'", g.label)));
            }
        }
        if self.generators.is_empty() {
            return Err(Error::Format("a group needs at least one generator".into()));
        }
        Ok(())
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    /// Generator indices belonging to the selected subgroup.
    pub fn summand_letters(&self, summand: Summand) -> Result<Vec<bool>> {
        let n = self.generators.len();
        match (&self.construction, summand) {
            (_, Summand::Whole) => Ok(vec![true; n]),
            (Construction::FreeProduct { left, .. }, Summand::Left) => {
                let k = left.generators.len();
                Ok((0..n).map(|i| i < k).collect())
            }
            (Construction::FreeProduct { left, .. }, Summand::Right) => {
                let k = left.generators.len();
                Ok((0..n).map(|i| i >= k).collect())
            }
            (Construction::Hnn { base }, Summand::Base) => {
                let k = base.generators.len();
                Ok((0..n).map(|i| i < k).collect())
            }
            (Construction::Raw, _) => Err(Error::Unsupported(format!(
                "group '{}' has no construction provenance; subgroup membership is not decidable",
                self.name
            ))),
            (_, s) => Err(Error::Unsupported(format!(
                "summand {s:?} does not match the construction of '{}'",
                self.name
            ))),
        }
    }

    /// The subgroup selected by `summand` as a group in its own right.
    pub fn summand(&self, summand: Summand) -> Result<&GroupSpec> {
        match (&self.construction, summand) {
            (_, Summand::Whole) => Ok(self),
            (Construction::FreeProduct { left, .. }, Summand::Left) => Ok(left),
            (Construction::FreeProduct { right, .. }, Summand::Right) => Ok(right),
            (Construction::Hnn { base }, Summand::Base) => Ok(base),
            _ => Err(Error::Unsupported(format!("summand {summand:?} of '{}'", self.name))),
        }
    }

    fn letter_map(&self, l: Letter) -> MoebiusMap {
        let m = self.generators[l.gen].map;
        if l.inv {
            m.inverse()
        } else {
            m
        }
    }

    pub fn evaluate(&self, word: &[Letter]) -> MoebiusMap {
        word.iter()
            .fold(MoebiusMap::IDENTITY, |acc, l| acc.compose(&self.letter_map(*l)))
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.generators.len())
            .flat_map(|gen| [Letter { gen, inv: false }, Letter { gen, inv: true }])
            .collect()
    }

    pub fn display_word(&self, word: &[Letter]) -> String {
        if word.is_empty() {
            return "1".into();
        }
        word.iter()
            .map(|l| {
                let label = &self.generators[l.gen].label;
                if l.inv {
                    format!("{label}^-1")
                } else {
                    label.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A generator or its inverse. Ordered by generator index, positive first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: usize,
    pub inv: bool,
}

impl Letter {
    pub fn inverse(self) -> Letter {
        Letter {
            gen: self.gen,
            inv: !self.inv,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupElement {
    pub word: Vec<Letter>,
    pub matrix: MoebiusMap,
}

impl GroupElement {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}{}", self.gen, if self.inv { "^-1" } else { "" })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnumConfig {
    pub max_elements: usize,
    pub matrix_tol: f64,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            max_elements: DEFAULT_ELEMENT_CAP,
            matrix_tol: MATRIX_DEDUP_TOL,
        }
    }
}

/// Matrix index with bucketed lookup on the `a` entry; `±` is handled by
/// probing both signs.
struct MatrixIndex {
    buckets: HashMap<(i64, i64), Vec<usize>>,
    tol: f64,
}

const BUCKET: f64 = 1e-3;

impl MatrixIndex {
    fn new(tol: f64) -> Self {
        MatrixIndex {
            buckets: HashMap::new(),
            tol,
        }
    }

    fn key(re: f64, im: f64) -> (i64, i64) {
        ((re / BUCKET).floor() as i64, (im / BUCKET).floor() as i64)
    }

    fn find(&self, m: &MoebiusMap, store: &[GroupElement]) -> Option<usize> {
        let limit = self.tol * m.norm().max(1.0);
        let reach = (limit / BUCKET).ceil() as i64;
        for sign in [1.0, -1.0] {
            let (kr, ki) = Self::key(sign * m.a.re, sign * m.a.im);
            for dr in -reach..=reach {
                for di in -reach..=reach {
                    if let Some(ids) = self.buckets.get(&(kr + dr, ki + di)) {
                        for &id in ids {
                            if store[id].matrix.distance(m) <= limit {
                                return Some(id);
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, m: &MoebiusMap, id: usize) {
        self.buckets.entry(Self::key(m.a.re, m.a.im)).or_default().push(id);
    }
}

/// All distinct elements represented by freely reduced words of length at
/// most `max_len`, in shortlex order; each element keeps its least word.
pub fn enumerate_elements(group: &GroupSpec, max_len: usize, cfg: &EnumConfig) -> Result<Vec<GroupElement>> {
    let letters = group.letters();
    let letter_maps: Vec<MoebiusMap> = letters.iter().map(|l| group.letter_map(*l)).collect();
    let mut out = vec![GroupElement {
        word: Vec::new(),
        matrix: MoebiusMap::IDENTITY,
    }];
    let mut index = MatrixIndex::new(cfg.matrix_tol);
    index.insert(&MoebiusMap::IDENTITY, 0);
    let mut frontier = vec![0usize];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for &parent in &frontier {
            let last = out[parent].word.last().copied();
            for (li, &letter) in letters.iter().enumerate() {
                if last == Some(letter.inverse()) {
                    continue;
                }
                let matrix = out[parent].matrix.compose(&letter_maps[li]);
                if index.find(&matrix, &out).is_some() {
                    continue;
                }
                if out.len() >= cfg.max_elements {
                    return Err(Error::BudgetExceeded { cap: cfg.max_elements });
                }
                let mut word = out[parent].word.clone();
                word.push(letter);
                let id = out.len();
                index.insert(&matrix, id);
                out.push(GroupElement { word, matrix });
                next.push(id);
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Finite sample of the limit set.
#[derive(Debug, Clone, Default)]
pub struct LimitSample {
    /// Attracting fixed points of loxodromic elements.
    pub fixed: Vec<SpherePoint>,
    /// Orbit of a base limit point under the longest words.
    pub orbit: Vec<SpherePoint>,
}

impl LimitSample {
    pub fn all(&self) -> Vec<SpherePoint> {
        self.fixed.iter().chain(&self.orbit).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.fixed.len() + self.orbit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct PointDedup {
    seen: HashSet<[i64; 3]>,
    tol: f64,
}

impl PointDedup {
    fn new(tol: f64) -> Self {
        PointDedup {
            seen: HashSet::new(),
            tol,
        }
    }

    fn insert(&mut self, p: &SpherePoint) -> bool {
        let v = p.unit();
        let key = [
            (v[0] / self.tol).round() as i64,
            (v[1] / self.tol).round() as i64,
            (v[2] / self.tol).round() as i64,
        ];
        self.seen.insert(key)
    }
}

/// Checks that at least two loxodromic generators have distinct fixed-point
/// pairs.
pub fn check_nonelementary(group: &GroupSpec) -> Result<()> {
    let mut pairs: Vec<(SpherePoint, SpherePoint)> = Vec::new();
    for g in group.generators() {
        if g.map.classify() != Kind::Loxodromic {
            continue;
        }
        if let Ok(crate::moebius::FixedPoints::Two(p, q)) = g.map.fixed_points() {
            let new = pairs.iter().all(|(a, b)| {
                let same = (a.angle_to(&p) < 1e-9 && b.angle_to(&q) < 1e-9) || (a.angle_to(&q) < 1e-9 && b.angle_to(&p) < 1e-9);
                !same
            });
            if new {
                pairs.push((p, q));
            }
        }
    }
    if pairs.len() < 2 {
        return Err(Error::Elementary(group.name.clone()));
    }
    Ok(())
}

pub fn sample_limit_set(group: &GroupSpec, max_len: usize, cap: usize) -> Result<LimitSample> {
    check_nonelementary(group)?;
    let elements = enumerate_elements(group, max_len, &EnumConfig::default())?;
    sample_from_elements(group, &elements, max_len, cap)
}

/// Limit-set sample from an already enumerated element list.
pub fn sample_from_elements(
    group: &GroupSpec,
    elements: &[GroupElement],
    max_len: usize,
    cap: usize,
) -> Result<LimitSample> {
    let base = group
        .generators()
        .iter()
        .find_map(|g| g.map.attracting_fixed_point())
        .ok_or_else(|| Error::Elementary(group.name.clone()))?;
    let mut dedup = PointDedup::new(ANGULAR_DEDUP_TOL);
    let mut sample = LimitSample::default();
    for e in elements {
        if e.word.is_empty() {
            continue;
        }
        if let Some(p) = e.matrix.attracting_fixed_point() {
            if dedup.insert(&p) {
                sample.fixed.push(p);
            }
        }
        if sample.len() > cap {
            return Err(Error::BudgetExceeded { cap });
        }
    }
    if max_len > 0 {
        for e in elements.iter().filter(|e| e.word.len() == max_len) {
            let p = e.matrix.apply(&base);
            if dedup.insert(&p) {
                sample.orbit.push(p);
            }
            if sample.len() > cap {
                return Err(Error::BudgetExceeded { cap });
            }
        }
    }
    Ok(sample)
}

/// Elements of length at most `max_len` outside the selected subgroup, one
/// per left coset `γΓ'`: words containing a non-subgroup letter whose final
/// syllable is not a subgroup syllable. The identity is never included.
pub fn coset_representatives(group: &GroupSpec, summand: Summand, max_len: usize) -> Result<Vec<GroupElement>> {
    let in_sub = group.summand_letters(summand)?;
    let elements = enumerate_elements(group, max_len, &EnumConfig::default())?;
    Ok(elements
        .into_iter()
        .filter(|e| match e.word.last() {
            Some(l) => !in_sub[l.gen],
            None => false,
        })
        .collect())
}
