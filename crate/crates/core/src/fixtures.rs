//! Shipped example groups.
//!
//! * `octagon`: the genus-two Fuchsian group of the regular octagon with
//!   interior angles `π/4`, acting on the unit disk; its limit set is the
//!   equator.
//! * `schottky`: a classical Schottky group of rank two with pairing disks
//!   centered at `±e_x` and `±e_z`.
//! * `free_combination`: the octagon group freely combined with a cyclic
//!   loxodromic group whose ping-pong disks sit inside a cap around the north
//!   pole that no nontrivial octagon element moves back onto itself. The
//!   whole configuration is conjugated by `z ↦ z / LIFT`, which shrinks the
//!   octagon circle toward the south pole and enlarges the cyclic images of
//!   the lower disk enough to survive raster dilation.
//! * `corrupted`: the octagon group with a cyclic factor whose fixed points
//!   straddle the equator; used as a negative control.

use std::f64::consts::PI;

use crate::error::Result;
use crate::group::{Generator, GroupSpec};
use crate::moebius::{Cx, MoebiusMap, SpherePoint};
use crate::sphere::Cap;

/// Translation length of the octagon side pairings: `cosh(ℓ/2) = 1 + √2`.
pub fn octagon_translation_length() -> f64 {
    2.0 * (1.0 + 2f64.sqrt()).acosh()
}

pub const SCHOTTKY_TAU: f64 = 5.0;
pub const SCHOTTKY_TWIST: f64 = 1.0;

/// Half-angle of the north cap used as the octagon-side combination disk.
pub const COMBINATION_CAP: f64 = 1.1;
/// Angular gap between the two combination caps.
pub const COMBINATION_GAP: f64 = 0.02;
/// Angular distance of the cyclic factor's fixed points from the north pole.
pub const CYCLIC_OFFSET: f64 = 0.45;
pub const CYCLIC_TAU: f64 = 1.7;
pub const LIFT: f64 = 2.5;

fn generator(label: &str, map: MoebiusMap) -> Generator {
    Generator {
        label: label.into(),
        map,
    }
}

pub fn octagon() -> GroupSpec {
    let ch = 1.0 + 2f64.sqrt();
    let sh = (ch * ch - 1.0).sqrt();
    let g0 = MoebiusMap::from_real(ch, sh, sh, ch).expect("det 1");
    let rot = MoebiusMap::dilation(Cx::from_polar(1.0, PI / 4.0)).expect("unit multiplier");
    let mut gens = Vec::new();
    let mut conj = MoebiusMap::IDENTITY;
    for label in ["a", "b", "c", "d"] {
        gens.push(generator(label, conj.compose(&g0).compose(&conj.inverse())));
        conj = rot.compose(&conj);
    }
    GroupSpec::raw("octagon", gens).expect("distinct labels")
}

fn axis_point(v: [f64; 3]) -> SpherePoint {
    SpherePoint::from_unit(v)
}

pub fn schottky() -> GroupSpec {
    let k = Cx::new(SCHOTTKY_TAU.exp(), 0.0);
    let a = MoebiusMap::with_fixed_points(axis_point([1.0, 0.0, 0.0]), axis_point([-1.0, 0.0, 0.0]), k)
        .expect("distinct fixed points");
    let b = MoebiusMap::with_fixed_points(
        SpherePoint::INFINITY,
        axis_point([0.0, 0.0, -1.0]),
        Cx::from_polar(SCHOTTKY_TAU.exp(), SCHOTTKY_TWIST),
    )
    .expect("distinct fixed points");
    GroupSpec::raw("schottky", vec![generator("A", a), generator("B", b)]).expect("distinct labels")
}

/// The four pairing disks of [`schottky`]: `D_A^+, D_A^-, D_B^+, D_B^-`.
pub fn schottky_disks() -> Vec<Cap> {
    let r = (SCHOTTKY_TAU / 2.0).tanh().acos();
    [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
        .into_iter()
        .map(|c| Cap::new(c, r))
        .collect()
}

/// Conjugating map of the combination fixture.
pub fn lift() -> MoebiusMap {
    MoebiusMap::dilation(Cx::new(1.0 / LIFT, 0.0)).expect("nonzero multiplier")
}

fn lifted(m: &MoebiusMap) -> MoebiusMap {
    let h = lift();
    h.compose(m).compose(&h.inverse())
}

fn lifted_cap(c: &Cap) -> Cap {
    c.image(&lift()).expect("round caps map to round caps")
}

/// Fixed points of the cyclic factor before lifting: attracting, repelling.
fn cyclic_fixed_points_unlifted() -> (SpherePoint, SpherePoint) {
    let (s, c) = CYCLIC_OFFSET.sin_cos();
    (axis_point([s, 0.0, c]), axis_point([-s, 0.0, c]))
}

pub fn cyclic_fixed_points() -> (SpherePoint, SpherePoint) {
    let (att, rep) = cyclic_fixed_points_unlifted();
    let h = lift();
    (h.apply(&att), h.apply(&rep))
}

pub fn cyclic_generator() -> MoebiusMap {
    let (att, rep) = cyclic_fixed_points_unlifted();
    lifted(&MoebiusMap::with_fixed_points(att, rep, Cx::new(CYCLIC_TAU.exp(), 0.0)).expect("distinct fixed points"))
}

/// Ping-pong disks `(D+, D-)` of the cyclic factor: the generator maps the
/// closure of the complement of `D-` onto `D+`.
pub fn cyclic_disks() -> Result<(Cap, Cap)> {
    let (att, rep) = cyclic_fixed_points_unlifted();
    let m = MoebiusMap::sending_zero_inf(rep, att)?;
    let circle = |radius: f64, inside: SpherePoint| -> Result<Cap> {
        let pts = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0].map(|t| m.apply_complex(Cx::from_polar(radius, t)).unit());
        Cap::through(pts, inside.unit())?.image(&lift())
    };
    let half = (CYCLIC_TAU / 2.0).exp();
    Ok((circle(half, att)?, circle(1.0 / half, rep)?))
}

pub fn cyclic_north() -> GroupSpec {
    GroupSpec::raw("cyclic_north", vec![generator("t", cyclic_generator())]).expect("one label")
}

/// The octagon group conjugated by [`lift`].
pub fn lifted_octagon() -> GroupSpec {
    let gens = octagon()
        .generators()
        .iter()
        .map(|g| generator(&g.label, lifted(&g.map)))
        .collect();
    GroupSpec::raw("lifted_octagon", gens).expect("distinct labels")
}

/// Disjoint caps `(B1, B2)` for the free combination: `B1` holds the
/// octagon limit set, `B2` the cyclic one.
pub fn combination_caps() -> (Cap, Cap) {
    let b2 = Cap::new([0.0, 0.0, 1.0], COMBINATION_CAP);
    let b1 = Cap::new([0.0, 0.0, -1.0], PI - COMBINATION_CAP - COMBINATION_GAP);
    (lifted_cap(&b1), lifted_cap(&b2))
}

pub fn free_combination() -> GroupSpec {
    GroupSpec::free_product("free_combination", lifted_octagon(), cyclic_north()).expect("distinct labels")
}

pub fn corrupted_generator() -> MoebiusMap {
    MoebiusMap::with_fixed_points(
        axis_point([0.0, 1.0, 0.0]),
        axis_point([0.0, -1.0, 0.0]),
        Cx::from_polar(CYCLIC_TAU.exp(), PI / 2.0),
    )
    .expect("distinct fixed points")
}

pub fn corrupted() -> GroupSpec {
    let partner = GroupSpec::raw("straddler", vec![generator("t", corrupted_generator())]).expect("one label");
    GroupSpec::free_product("corrupted", octagon(), partner).expect("distinct labels")
}

/// All shipped fixtures by name.
pub fn by_name(name: &str) -> Option<GroupSpec> {
    match name {
        "octagon" => Some(octagon()),
        "schottky" => Some(schottky()),
        "cyclic_north" => Some(cyclic_north()),
        "lifted_octagon" => Some(lifted_octagon()),
        "free_combination" => Some(free_combination()),
        "corrupted" => Some(corrupted()),
        _ => None,
    }
}

pub const NAMES: [&str; 6] = [
    "octagon",
    "schottky",
    "lifted_octagon",
    "cyclic_north",
    "free_combination",
    "corrupted",
];
