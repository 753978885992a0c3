//! Visual (harmonic) measure `h_X(y)` of a region `X` of the sphere at
//! infinity seen from a point `y` of the ball.
//!
//! Three evaluators: quadrature of the Poisson kernel over raster cells,
//! Monte Carlo over geodesic rays, and an exact value for round caps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moebius::{BallPoint, BallTranslation};
use crate::sphere::{Cap, ComponentChart, SphereRaster};
use crate::vec3::{self, Vec3};

/// Largest `|y|` accepted by the quadrature.
pub const QUADRATURE_LIMIT: f64 = 1.0 - 1e-6;
/// Directions per independently seeded stream of the ray estimator.
pub const RAY_CHUNK: usize = 4096;
/// Relative per-cell variation that triggers subdivision.
pub const VARIATION_THRESHOLD: f64 = 0.05;
/// Floor added to every kernel error bound (accumulated rounding).
const ROUNDING_FLOOR: f64 = 1e-12;
/// Largest per-side subdivision of a cell near the kernel peak.
pub const MAX_SUBDIVISION: usize = 128;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kernel,
    Rays,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicEstimate {
    pub value: f64,
    pub method: Method,
    pub error: f64,
    /// Quadrature nodes or ray count.
    pub samples: usize,
    pub seed: Option<u64>,
}

impl HarmonicEstimate {
    pub fn lower(&self) -> f64 {
        self.value - self.error
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error
    }
}

/// Poisson kernel of the ball, normalized so that it integrates to `4π`.
pub fn poisson_kernel(y: Vec3, zeta: Vec3) -> f64 {
    let r = vec3::norm(y);
    let num = (1.0 - r) * (1.0 + r);
    let d2 = vec3::norm2(vec3::sub(y, zeta));
    let q = num / d2;
    q * q
}

fn check_range(y: &BallPoint) -> Result<()> {
    let r = y.radius();
    if r > QUADRATURE_LIMIT {
        return Err(Error::Range(format!(
            "|y| = {r} exceeds the quadrature limit {QUADRATURE_LIMIT}; use the ray or closed-form estimator"
        )));
    }
    Ok(())
}

/// Per-cell kernel masses `h_{cell}(y)` and their error bounds, reusable
/// across regions.
#[derive(Debug, Clone)]
pub struct CellMasses {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub nodes: usize,
}

pub fn cell_masses(y: &BallPoint, raster: &SphereRaster) -> Result<CellMasses> {
    check_range(y)?;
    let yv = y.coords();
    let r = y.radius();
    let pole = if r > 0.0 { Some(vec3::scale(yv, 1.0 / r)) } else { None };
    let near = 2.0 * (1.0 - r);
    let pole_cell = pole.map(|p| raster.locate(p));
    // subdivision near the pole resolving the kernel width 1 - |y|
    let spacing = 0.5 * (1.0 - r);
    let fine = ((raster.cell_size() / spacing).ceil() as usize)
        .next_power_of_two()
        .clamp(4, MAX_SUBDIVISION);
    let per_cell: Vec<(f64, f64, usize)> = (0..raster.len())
        .into_par_iter()
        .map(|id| {
            let cell = raster.cell(id);
            let q1 = poisson_kernel(yv, cell.center) * cell.area;
            let q4: f64 = cell.nodes.iter().map(|nd| poisson_kernel(yv, nd.point) * nd.weight).sum();
            let close = match pole {
                Some(p) => pole_cell == Some(id) || vec3::angle(cell.center, p) <= near,
                None => false,
            };
            let quad = |m: usize| -> f64 {
                raster
                    .sub_nodes(id, m)
                    .iter()
                    .map(|nd| poisson_kernel(yv, nd.point) * nd.weight)
                    .sum()
            };
            if close {
                let (lo, hi) = if fine == 4 { (q4, quad(4)) } else { (quad(fine / 2), quad(fine)) };
                (hi, (hi - lo).abs(), fine * fine)
            } else if (q4 - q1).abs() > VARIATION_THRESHOLD * q4 {
                let q16 = quad(4);
                (q16, (q16 - q4).abs(), 16)
            } else {
                (q4, (q4 - q1).abs(), 4)
            }
        })
        .collect();
    let nodes = per_cell.iter().map(|c| c.2).sum();
    Ok(CellMasses {
        value: per_cell.iter().map(|c| c.0 / FOUR_PI).collect(),
        error: per_cell.iter().map(|c| c.1 / FOUR_PI).collect(),
        nodes,
    })
}

impl CellMasses {
    pub fn estimate(&self, region: impl IntoIterator<Item = usize>) -> HarmonicEstimate {
        let (mut value, mut error) = (0.0, ROUNDING_FLOOR);
        for c in region {
            value += self.value[c];
            error += self.error[c];
        }
        HarmonicEstimate {
            value,
            method: Method::Kernel,
            error,
            samples: self.nodes,
            seed: None,
        }
    }
}

/// Kernel quadrature of `h_X(y)` for `X` a set of raster cells.
pub fn measure_kernel(y: &BallPoint, region: &[usize], raster: &SphereRaster) -> Result<HarmonicEstimate> {
    Ok(cell_masses(y, raster)?.estimate(region.iter().copied()))
}

/// Kernel estimates of every chart label in one pass.
pub fn measure_labels(y: &BallPoint, chart: &ComponentChart) -> Result<Vec<HarmonicEstimate>> {
    let masses = cell_masses(y, chart.raster())?;
    let k = chart.len();
    let mut value = vec![0.0; k];
    let mut error = vec![ROUNDING_FLOOR; k];
    for (c, label) in chart.labels().iter().enumerate() {
        if let Some(l) = label {
            value[*l] += masses.value[c];
            error[*l] += masses.error[c];
        }
    }
    Ok((0..k)
        .map(|l| HarmonicEstimate {
            value: value[l],
            method: Method::Kernel,
            error: error[l],
            samples: masses.nodes,
            seed: None,
        })
        .collect())
}

/// Counts, per class, of ray endpoints from `y`; `classify` returns a class
/// index below `classes` or `None`.
fn ray_counts<F>(y: &BallPoint, n: usize, seed: u64, classes: usize, classify: F) -> Vec<usize>
where
    F: Fn(Vec3) -> Option<usize> + Sync,
{
    let t = BallTranslation::new(y);
    let chunks = n.div_ceil(RAY_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = RAY_CHUNK.min(n - chunk * RAY_CHUNK);
            let mut counts = vec![0usize; classes];
            for _ in 0..len {
                let v: [f64; 3] = UnitSphere.sample(&mut rng);
                if let Some(k) = classify(t.apply_boundary(v)) {
                    counts[k] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0usize; classes],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn ray_estimate(hits: usize, n: usize, seed: u64) -> HarmonicEstimate {
    let p = hits as f64 / n as f64;
    HarmonicEstimate {
        value: p,
        method: Method::Rays,
        error: (3.0 * (p * (1.0 - p) / n as f64).sqrt()).max(1.0 / n as f64),
        samples: n,
        seed: Some(seed),
    }
}

/// Fraction of `n` uniformly distributed geodesic rays from `y` whose
/// endpoint satisfies `member`.
pub fn measure_rays<F>(y: &BallPoint, member: F, n: usize, seed: u64) -> HarmonicEstimate
where
    F: Fn(Vec3) -> bool + Sync,
{
    assert!(n > 0, "ray count must be positive");
    let hits = ray_counts(y, n, seed, 1, |v| member(v).then_some(0))[0];
    ray_estimate(hits, n, seed)
}

/// Ray estimates of every chart label from one set of rays.
pub fn measure_rays_labels(y: &BallPoint, chart: &ComponentChart, n: usize, seed: u64) -> Vec<HarmonicEstimate> {
    assert!(n > 0, "ray count must be positive");
    let raster = chart.raster();
    let counts = ray_counts(y, n, seed, chart.len(), |v| chart.label_of_cell(raster.locate(v)));
    counts.into_iter().map(|c| ray_estimate(c, n, seed)).collect()
}

/// Pulls `cap` back along the ball translation taking the origin to `y`.
pub fn pullback_cap(y: &BallPoint, cap: &Cap) -> Result<Cap> {
    let t = BallTranslation::new(y);
    let pts = cap.boundary_points(3);
    let img = [0, 1, 2].map(|k| t.inverse_boundary(pts[k].unit()));
    Cap::through(img, t.inverse_boundary(cap.center))
}

/// Exact visual measure of a round cap.
pub fn cap_measure(y: &BallPoint, cap: &Cap) -> Result<HarmonicEstimate> {
    let back = pullback_cap(y, cap)?;
    Ok(HarmonicEstimate {
        value: (1.0 - back.half_angle.cos()) / 2.0,
        method: Method::ClosedForm,
        error: 0.0,
        samples: 0,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{Cx, MoebiusMap};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Measure of the cap `{polar angle from north ≤ θ}` seen from
    /// `(0, 0, a)`, by integrating the kernel in closed form.
    fn axial_cap_oracle(a: f64, theta: f64) -> f64 {
        if a == 0.0 {
            return (1.0 - theta.cos()) / 2.0;
        }
        let s = (1.0 - a * a).powi(2) / (4.0 * a);
        s * (1.0 / (1.0 - a).powi(2) - 1.0 / (1.0 + a * a - 2.0 * a * theta.cos()))
    }

    fn north_cap(theta: f64) -> Cap {
        Cap::new([0.0, 0.0, 1.0], theta)
    }

    fn ball(v: Vec3) -> BallPoint {
        BallPoint::new(v).unwrap()
    }

    #[test]
    fn full_sphere_from_origin() {
        let r = SphereRaster::new(32).unwrap();
        let all: Vec<usize> = (0..r.len()).collect();
        let h = measure_kernel(&BallPoint::ORIGIN, &all, &r).unwrap();
        assert!((h.value - 1.0).abs() < 1e-6);
        assert!(h.error > 0.0);
    }

    #[test]
    fn full_sphere_off_center() {
        let r = SphereRaster::new(32).unwrap();
        let all: Vec<usize> = (0..r.len()).collect();
        for y in [[0.3, -0.2, 0.5], [0.0, 0.0, 0.9], [0.6, 0.6, 0.0]] {
            let h = measure_kernel(&ball(y), &all, &r).unwrap();
            assert!((h.value - 1.0).abs() <= h.error, "{h:?}");
        }
    }

    #[test]
    fn hemisphere_and_cap_from_origin() {
        let r = SphereRaster::new(32).unwrap();
        let upper = r.cells_in_cap(&north_cap(PI / 2.0));
        let h = measure_kernel(&BallPoint::ORIGIN, &upper, &r).unwrap();
        assert!((h.value - 0.5).abs() < 2e-3);
        let cap = r.cells_in_cap(&north_cap(PI / 3.0));
        let h = measure_kernel(&BallPoint::ORIGIN, &cap, &r).unwrap();
        assert!((h.value - 0.25).abs() < 2e-3, "{}", h.value);
    }

    #[test]
    fn kernel_tracks_axial_oracle() {
        let r = SphereRaster::new(32).unwrap();
        let cells = r.cells_in_cap(&north_cap(PI / 2.0));
        for a in [0.2, 0.5, -0.7] {
            let h = measure_kernel(&ball([0.0, 0.0, a]), &cells, &r).unwrap();
            assert!((h.value - axial_cap_oracle(a, PI / 2.0)).abs() < h.error + 1e-3, "{a} {h:?}");
        }
    }

    #[test]
    fn boundary_points_are_refused() {
        let r = SphereRaster::new(8).unwrap();
        let y = ball([0.0, 0.0, 1.0 - 1e-7]);
        assert!(matches!(measure_kernel(&y, &[0], &r), Err(Error::Range(_))));
    }

    #[test]
    fn complement_sums_to_one() {
        let r = SphereRaster::new(32).unwrap();
        let cap = r.cells_in_cap(&Cap::new([0.3, 0.4, 0.5], 1.1));
        let mut inside = vec![false; r.len()];
        cap.iter().for_each(|&c| inside[c] = true);
        let rest: Vec<usize> = (0..r.len()).filter(|&c| !inside[c]).collect();
        let y = ball([0.2, -0.5, 0.4]);
        let a = measure_kernel(&y, &cap, &r).unwrap();
        let b = measure_kernel(&y, &rest, &r).unwrap();
        assert!((a.value + b.value - 1.0).abs() <= a.error + b.error);
    }

    #[test]
    fn rays_basics() {
        let y = ball([0.1, 0.2, -0.3]);
        assert_eq!(measure_rays(&y, |_| true, 5000, 1).value, 1.0);
        let h = measure_rays(&BallPoint::ORIGIN, |v| v[2] >= 0.0, 100_000, 7);
        assert!((h.value - 0.5).abs() <= h.error, "{h:?}");
        assert!(h.error < 0.005);
    }

    #[test]
    fn rays_are_reproducible_and_chunk_independent() {
        let y = ball([0.3, 0.0, 0.4]);
        let a = measure_rays(&y, |v| v[0] > 0.2, 3 * RAY_CHUNK + 17, 99);
        let b = measure_rays(&y, |v| v[0] > 0.2, 3 * RAY_CHUNK + 17, 99);
        assert_eq!(a, b);
        let c = measure_rays(&y, |v| v[0] > 0.2, 3 * RAY_CHUNK + 17, 100);
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn cap_measure_examples() {
        let h = cap_measure(&BallPoint::ORIGIN, &north_cap(PI / 2.0)).unwrap();
        assert!((h.value - 0.5).abs() < 1e-12);
        let h = cap_measure(&BallPoint::ORIGIN, &north_cap(PI / 3.0)).unwrap();
        assert!((h.value - 0.25).abs() < 1e-12);
        let y = ball([0.0, 0.0, 0.5]);
        let h = cap_measure(&y, &north_cap(PI / 2.0)).unwrap();
        assert!(h.value > 0.5);
        assert!((h.value - axial_cap_oracle(0.5, PI / 2.0)).abs() < 1e-10);
        let rays = measure_rays(&y, |v| v[2] >= 0.0, 100_000, 3);
        assert!((rays.value - h.value).abs() <= rays.error);
    }

    #[test]
    fn cap_measure_matches_axial_oracle() {
        for a in [-0.9, -0.3, 0.1, 0.6, 0.95] {
            for theta in [0.2, 1.0, 2.0, 3.0] {
                let h = cap_measure(&ball([0.0, 0.0, a]), &north_cap(theta)).unwrap();
                assert!((h.value - axial_cap_oracle(a, theta)).abs() < 1e-10, "{a} {theta}");
            }
        }
    }

    // Hyperbolic mean-value property: average over a hyperbolic sphere of
    // radius ρ about y, built as the translate of a Euclidean sphere of
    // radius tanh(ρ/2) about the origin.
    #[test]
    fn mean_value_property() {
        let cap = Cap::new([0.2, -0.1, 1.0], 0.8);
        let y = ball([0.1, 0.3, 0.2]);
        let t = BallTranslation::new(&y);
        let s = (0.3f64 / 2.0).tanh();
        let count = 4000;
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut sum = 0.0;
        for k in 0..count {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let x = ball([s * rho * phi.cos(), s * rho * phi.sin(), s * z]);
            sum += cap_measure(&t.apply_interior(&x), &cap).unwrap().value;
        }
        let centre = cap_measure(&y, &cap).unwrap().value;
        assert!((sum / count as f64 - centre).abs() < 1e-4);
    }

    #[test]
    fn labels_match_regions() {
        let raster = SphereRaster::new(16).unwrap();
        let samples: Vec<_> = (0..2000)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 2000.0;
                crate::moebius::SpherePoint::from_unit([phi.cos(), phi.sin(), 0.0])
            })
            .collect();
        let chart = crate::sphere::build_chart(&raster, &samples, 2.0 * raster.cell_size());
        let y = ball([0.1, 0.0, 0.3]);
        let by_label = measure_labels(&y, &chart).unwrap();
        for (l, comp) in chart.components().iter().enumerate() {
            let direct = measure_kernel(&y, &comp.cells, &raster).unwrap();
            assert!((direct.value - by_label[l].value).abs() < 1e-12);
        }
        let rays = measure_rays_labels(&y, &chart, 20_000, 5);
        for l in 0..chart.len() {
            assert!((rays[l].value - by_label[l].value).abs() <= rays[l].error + by_label[l].error);
        }
    }

    fn arb_ball() -> impl Strategy<Value = BallPoint> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..0.95).prop_map(|(x, y, z, r)| {
            let v = vec3::normalize([x + 1e-3, y, z]);
            BallPoint::new(vec3::scale(v, r)).unwrap()
        })
    }

    fn arb_cap() -> impl Strategy<Value = Cap> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.05f64..3.0).prop_map(|(x, y, z, t)| Cap::new([x + 1e-3, y, z], t))
    }

    fn arb_map() -> impl Strategy<Value = MoebiusMap> {
        proptest::array::uniform8(-2.0f64..2.0).prop_filter_map("singular", |e| {
            MoebiusMap::new(Cx::new(e[0], e[1]), Cx::new(e[2], e[3]), Cx::new(e[4], e[5]), Cx::new(e[6], e[7])).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cap_measure_is_isometry_invariant(y in arb_ball(), cap in arb_cap(), g in arb_map()) {
            let gy = g.apply_ball(&y).unwrap();
            prop_assume!(gy.radius() < 0.999);
            let g_cap = cap.image(&g).unwrap();
            let a = cap_measure(&y, &cap).unwrap().value;
            let b = cap_measure(&gy, &g_cap).unwrap().value;
            prop_assert!((a - b).abs() < 1e-8, "{} {}", a, b);
        }

        #[test]
        fn cap_measure_complement(y in arb_ball(), cap in arb_cap()) {
            let a = cap_measure(&y, &cap).unwrap().value;
            let b = cap_measure(&y, &cap.complement()).unwrap().value;
            prop_assert!((a + b - 1.0).abs() < 1e-10);
        }

        #[test]
        fn cap_measure_is_monotone(y in arb_ball(), cap in arb_cap(), shrink in 0.1f64..1.0) {
            let inner = Cap::new(cap.center, cap.half_angle * shrink);
            let a = cap_measure(&y, &inner).unwrap().value;
            let b = cap_measure(&y, &cap).unwrap().value;
            prop_assert!(a <= b + 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
