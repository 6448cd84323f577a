//! Sunny nonexpansive retractions onto a catalog of convex sets.
//!
//! Outside Hilbert space the metric projection onto a convex set is in
//! general not sunny, and there is no general recipe for the sunny
//! nonexpansive retraction. The catalog is therefore restricted to sets whose
//! retraction acts coordinate by coordinate (boxes, the nonnegative orthant,
//! coordinate subspaces, the whole space). For those, `x - Qx` and `y - Qx`
//! have opposite signs on every moved coordinate whenever `y ∈ C`, and the
//! Giles semi-inner product is a positively weighted coordinate sum, so
//! `[x - Qx, y - Qx] ≤ 0` holds in every ℓ^p. Euclidean balls are admitted
//! only in ℓ², where the radial projection is the metric projection.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp_space::LpSpace;

/// Description of a closed convex set. Validated against a host space by
/// [`Retraction::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    WholeSpace,
    /// `lower ≤ x ≤ upper` componentwise; bounds may be infinite.
    Box {
        #[serde(with = "extended_reals")]
        lower: Vec<f64>,
        #[serde(with = "extended_reals")]
        upper: Vec<f64>,
    },
    NonnegativeOrthant,
    /// Coordinates with `mask[i] == true` are forced to zero.
    CoordinateSubspace { mask: Vec<bool> },
    /// Closed Euclidean ball; ℓ² hosts only.
    EuclideanBall { center: Vec<f64>, radius: f64 },
}

impl ConvexSet {
    /// Retracts `x` onto this set inside `space`.
    pub fn retract(&self, space: LpSpace, x: &DVector<f64>) -> Result<DVector<f64>> {
        Retraction::new(self.clone(), space)?.retract(x)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvexSet::WholeSpace => "whole_space",
            ConvexSet::Box { .. } => "box",
            ConvexSet::NonnegativeOrthant => "nonnegative_orthant",
            ConvexSet::CoordinateSubspace { .. } => "coordinate_subspace",
            ConvexSet::EuclideanBall { .. } => "euclidean_ball",
        }
    }
}

/// A sunny nonexpansive retraction `Q_C : E → C` for a catalog set.
#[derive(Debug, Clone, PartialEq)]
pub struct Retraction {
    set: ConvexSet,
    space: LpSpace,
}

impl Retraction {
    pub fn new(set: ConvexSet, space: LpSpace) -> Result<Self> {
        let dim = space.dim();
        let check_len = |len: usize| {
            if len == dim {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: dim, found: len })
            }
        };
        match &set {
            ConvexSet::WholeSpace | ConvexSet::NonnegativeOrthant => {}
            ConvexSet::Box { lower, upper } => {
                check_len(lower.len())?;
                check_len(upper.len())?;
                for (i, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
                    if l.is_nan() || u.is_nan() {
                        return Err(Error::InvalidSet(format!("box bound {i} is NaN")));
                    }
                    if l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                        return Err(Error::InvalidSet(format!(
                            "box coordinate {i} has empty range [{l}, {u}]"
                        )));
                    }
                }
            }
            ConvexSet::CoordinateSubspace { mask } => check_len(mask.len())?,
            ConvexSet::EuclideanBall { center, radius } => {
                if !space.is_hilbert() {
                    return Err(Error::InvalidSet(format!(
                        "euclidean ball needs a p = 2 host, got p = {}",
                        space.p()
                    )));
                }
                check_len(center.len())?;
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("ball center"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(Self { set, space })
    }

    pub fn set(&self) -> &ConvexSet {
        &self.set
    }

    pub fn space(&self) -> LpSpace {
        self.space
    }

    /// Exact membership test.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.space.dim() {
            return false;
        }
        match &self.set {
            ConvexSet::WholeSpace => true,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(&v, (&l, &u))| l <= v && v <= u),
            ConvexSet::NonnegativeOrthant => x.iter().all(|&v| v >= 0.0),
            ConvexSet::CoordinateSubspace { mask } => {
                x.iter().zip(mask.iter()).all(|(&v, &m)| !m || v == 0.0)
            }
            ConvexSet::EuclideanBall { center, radius } => {
                let c = DVector::from_column_slice(center);
                (x - c).norm() <= *radius
            }
        }
    }

    /// `‖x - Qx‖`, zero exactly on `C`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> Result<f64> {
        let q = self.retract(x)?;
        self.space.distance(x, &q)
    }

    /// `Q_C x`. Idempotent, and returns points of `C` unchanged.
    pub fn retract(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.space.check(x)?;
        let out = match &self.set {
            ConvexSet::WholeSpace => x.clone(),
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                x.len(),
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&v, (&l, &u))| v.max(l).min(u)),
            ),
            ConvexSet::NonnegativeOrthant => x.map(|v| if v < 0.0 { 0.0 } else { v }),
            ConvexSet::CoordinateSubspace { mask } => DVector::from_iterator(
                x.len(),
                x.iter().zip(mask.iter()).map(|(&v, &m)| if m { 0.0 } else { v }),
            ),
            ConvexSet::EuclideanBall { center, radius } => {
                let c = DVector::from_column_slice(center);
                let d = x - &c;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    // shrink until the rounded result is inside, so a second
                    // application is a no-op
                    let mut s = *radius / n;
                    let mut z = &c + &d * s;
                    for _ in 0..16 {
                        if (&z - &c).norm() <= *radius {
                            break;
                        }
                        s *= 1.0 - f64::EPSILON;
                        z = &c + &d * s;
                    }
                    z
                }
            }
        };
        Ok(out)
    }

    /// Draws a point of `C`, with coordinates of magnitude up to about `scale`.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> DVector<f64> {
        let dim = self.space.dim();
        match &self.set {
            ConvexSet::WholeSpace => DVector::from_fn(dim, |_, _| rng.gen_range(-scale..=scale)),
            ConvexSet::Box { lower, upper } => DVector::from_fn(dim, |i, _| {
                let (l, u) = (lower[i], upper[i]);
                match (l.is_finite(), u.is_finite()) {
                    (true, true) if l == u => l,
                    (true, true) => rng.gen_range(l..=u),
                    (true, false) => l + rng.gen_range(0.0..=scale),
                    (false, true) => u - rng.gen_range(0.0..=scale),
                    (false, false) => rng.gen_range(-scale..=scale),
                }
            }),
            ConvexSet::NonnegativeOrthant => DVector::from_fn(dim, |_, _| rng.gen_range(0.0..=scale)),
            ConvexSet::CoordinateSubspace { mask } => {
                DVector::from_fn(dim, |i, _| if mask[i] { 0.0 } else { rng.gen_range(-scale..=scale) })
            }
            ConvexSet::EuclideanBall { center, radius } => {
                let c = DVector::from_column_slice(center);
                let dir = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..=1.0));
                let n = dir.norm();
                let r = radius * rng.gen_range(0.0..=1.0);
                let z = if n == 0.0 { c } else { c + dir * (r / n) };
                self.retract(&z).expect("sample has the space dimension")
            }
        }
    }

    /// Samples the defining inequalities of a sunny nonexpansive retraction
    /// and reports the worst violation of each.
    ///
    /// Inequalities are measured relative to the natural scale of the sample
    /// (floored at 1), so the tolerance reads as an absolute one on unit-scale
    /// data.
    pub fn verify_sunny_nonexpansive<R: Rng + ?Sized>(
        &self,
        trials: usize,
        tol: f64,
        rng: &mut R,
    ) -> Result<RetractionReport> {
        let space = self.space;
        let dim = space.dim();
        let mut report = RetractionReport {
            set: self.set.name().to_string(),
            p: space.p(),
            trials,
            tolerance: tol,
            ..RetractionReport::default()
        };
        let spread = 3.0;
        for _ in 0..trials {
            let x = sample_around(rng, dim, spread, &self.set);
            let y = sample_around(rng, dim, spread, &self.set);
            let qx = self.retract(&x)?;
            let qy = self.retract(&y)?;

            let d = &qx - &qy;
            let nd = space.norm(&d)?;
            let nxy = space.norm(&(&x - &y))?;
            let firm = nd * nd - space.sip(&(&x - &y), &d)?;
            report.max_firm_violation = report.max_firm_violation.max(firm / (nxy * nxy).max(1.0));
            report.max_nonexpansive_violation =
                report.max_nonexpansive_violation.max((nd - nxy) / nxy.max(1.0));

            let z = self.sample_member(rng, spread);
            let u = &x - &qx;
            let w = &z - &qx;
            let var = space.sip(&u, &w)?;
            let scale = (space.norm(&u)? * space.norm(&w)?).max(1.0);
            report.max_variational_violation = report.max_variational_violation.max(var / scale);

            for t in SUNNY_STEPS {
                let ray = &qx + &u * t;
                let back = self.retract(&ray)?;
                let gap = space.distance(&back, &qx)? / space.norm(&qx)?.max(1.0);
                report.max_sunny_violation = report.max_sunny_violation.max(gap);
            }

            if self.retract(&qx)? != qx {
                report.idempotence_failures += 1;
            }
            if self.retract(&z)? != z {
                report.fixed_point_failures += 1;
            }
        }
        Ok(report)
    }
}

const SUNNY_STEPS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 10.0];

/// Points spread around the set so that a fair share of coordinates gets
/// clipped.
fn sample_around<R: Rng + ?Sized>(rng: &mut R, dim: usize, spread: f64, set: &ConvexSet) -> DVector<f64> {
    match set {
        ConvexSet::EuclideanBall { center, radius } => DVector::from_fn(dim, |i, _| {
            center[i] + rng.gen_range(-2.0 * radius..=2.0 * radius)
        }),
        ConvexSet::Box { lower, upper } => DVector::from_fn(dim, |i, _| {
            let mid = match (lower[i].is_finite(), upper[i].is_finite()) {
                (true, true) => 0.5 * (lower[i] + upper[i]),
                (true, false) => lower[i],
                (false, true) => upper[i],
                (false, false) => 0.0,
            };
            mid + rng.gen_range(-spread..=spread)
        }),
        _ => DVector::from_fn(dim, |_, _| rng.gen_range(-spread..=spread)),
    }
}

/// Worst observed violations from [`Retraction::verify_sunny_nonexpansive`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetractionReport {
    pub set: String,
    pub p: f64,
    pub trials: usize,
    pub tolerance: f64,
    /// `‖Qx - Qy‖² - [x - y, Qx - Qy]`
    pub max_firm_violation: f64,
    /// `[x - Qx, z - Qx]` for `z ∈ C`
    pub max_variational_violation: f64,
    /// `‖Qx - Qy‖ - ‖x - y‖`
    pub max_nonexpansive_violation: f64,
    /// `‖Q(Qx + t(x - Qx)) - Qx‖`
    pub max_sunny_violation: f64,
    pub idempotence_failures: usize,
    pub fixed_point_failures: usize,
}

impl RetractionReport {
    pub fn max_violation(&self) -> f64 {
        self.max_firm_violation
            .max(self.max_variational_violation)
            .max(self.max_nonexpansive_violation)
            .max(self.max_sunny_violation)
    }

    pub fn passed(&self) -> bool {
        self.max_violation() <= self.tolerance && self.idempotence_failures == 0 && self.fixed_point_failures == 0
    }
}

/// Serializes `f64` vectors allowing `"inf"` and `"-inf"` entries.
mod extended_reals {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = v
            .iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    Entry::Named("inf".into())
                } else if x == f64::NEG_INFINITY {
                    Entry::Named("-inf".into())
                } else {
                    Entry::Finite(x)
                }
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| match e {
                Entry::Finite(x) => Ok(x),
                Entry::Named(s) if s == "inf" => Ok(f64::INFINITY),
                Entry::Named(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
                Entry::Named(s) => Err(D::Error::custom(format!("unexpected bound {s:?}"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::rng_from_seed;
    use nalgebra::dvector;

    fn unit_box(dim: usize) -> ConvexSet {
        ConvexSet::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    #[test]
    fn box_clips() {
        let s = LpSpace::new(2, 2.0).unwrap();
        assert_eq!(unit_box(2).retract(s, &dvector![2.0, -3.0]).unwrap(), dvector![1.0, 0.0]);
        let inside = dvector![0.25, 0.75];
        assert_eq!(unit_box(2).retract(s, &inside).unwrap(), inside);
    }

    #[test]
    fn each_variant_realizes_its_map() {
        let s = LpSpace::new(3, 3.0).unwrap();
        let x = dvector![-1.0, 2.0, -3.0];
        assert_eq!(ConvexSet::WholeSpace.retract(s, &x).unwrap(), x);
        assert_eq!(ConvexSet::NonnegativeOrthant.retract(s, &x).unwrap(), dvector![0.0, 2.0, 0.0]);
        let sub = ConvexSet::CoordinateSubspace { mask: vec![false, true, false] };
        assert_eq!(sub.retract(s, &x).unwrap(), dvector![-1.0, 0.0, -3.0]);
        let half = ConvexSet::Box {
            lower: vec![f64::NEG_INFINITY, 0.0, -1.0],
            upper: vec![0.0, f64::INFINITY, f64::INFINITY],
        };
        assert_eq!(half.retract(s, &x).unwrap(), dvector![-1.0, 2.0, -1.0]);

        let h = LpSpace::hilbert(2).unwrap();
        let ball = ConvexSet::EuclideanBall { center: vec![1.0, 0.0], radius: 1.0 };
        let q = ball.retract(h, &dvector![4.0, 4.0]).unwrap();
        assert!((q - dvector![1.6, 0.8]).amax() < 1e-15);
    }

    #[test]
    fn rejects_ill_formed_sets() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let h = LpSpace::hilbert(2).unwrap();
        let bad_box = ConvexSet::Box { lower: vec![1.0, 0.0], upper: vec![0.0, 1.0] };
        assert!(matches!(Retraction::new(bad_box, s), Err(Error::InvalidSet(_))));
        let inf_box = ConvexSet::Box { lower: vec![f64::INFINITY, 0.0], upper: vec![f64::INFINITY, 1.0] };
        assert!(Retraction::new(inf_box, s).is_err());
        let short = ConvexSet::Box { lower: vec![0.0], upper: vec![1.0] };
        assert!(matches!(Retraction::new(short, s), Err(Error::DimensionMismatch { .. })));
        let ball = ConvexSet::EuclideanBall { center: vec![0.0, 0.0], radius: 1.0 };
        assert!(matches!(Retraction::new(ball.clone(), s), Err(Error::InvalidSet(_))));
        assert!(Retraction::new(ball, h).is_ok());
        let flat = ConvexSet::EuclideanBall { center: vec![0.0, 0.0], radius: 0.0 };
        assert!(Retraction::new(flat, h).is_err());
    }

    #[test]
    fn ball_retraction_is_exactly_idempotent() {
        let h = LpSpace::hilbert(7).unwrap();
        let r = Retraction::new(
            ConvexSet::EuclideanBall { center: vec![0.3, -1.1, 2.0, 0.0, 5.0, 1e-3, -7.0], radius: 0.7 },
            h,
        )
        .unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..2000 {
            let x = crate::sample::uniform_vector(&mut rng, 7, 20.0);
            let q = r.retract(&x).unwrap();
            assert!(r.contains(&q));
            assert_eq!(r.retract(&q).unwrap(), q);
        }
    }

    #[test]
    fn variational_inequality_in_l3_box() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let r = Retraction::new(unit_box(2), s).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let x = crate::sample::uniform_vector(&mut rng, 2, 3.0);
            let y = r.sample_member(&mut rng, 1.0);
            let q = r.retract(&x).unwrap();
            assert!(s.sip(&(&x - &q), &(&y - &q)).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn reports_for_catalog_sets() {
        let mut rng = rng_from_seed(2);
        let whole = Retraction::new(ConvexSet::WholeSpace, LpSpace::new(4, 3.0).unwrap()).unwrap();
        let rep = whole.verify_sunny_nonexpansive(200, 1e-12, &mut rng).unwrap();
        assert_eq!(rep.max_variational_violation, 0.0);
        assert_eq!(rep.max_sunny_violation, 0.0);
        assert!(rep.passed());

        let orth = Retraction::new(ConvexSet::NonnegativeOrthant, LpSpace::new(5, 4.0).unwrap()).unwrap();
        assert!(orth.verify_sunny_nonexpansive(1000, 1e-12, &mut rng).unwrap().passed());

        let ball = Retraction::new(
            ConvexSet::EuclideanBall { center: vec![1.0, 2.0, -1.0], radius: 1.5 },
            LpSpace::hilbert(3).unwrap(),
        )
        .unwrap();
        assert!(ball.verify_sunny_nonexpansive(1000, 1e-12, &mut rng).unwrap().passed());
    }

    #[test]
    fn box_round_trips_infinite_bounds() {
        let set = ConvexSet::Box {
            lower: vec![f64::NEG_INFINITY, 0.5],
            upper: vec![2.0, f64::INFINITY],
        };
        let text = serde_json::to_string(&set).unwrap();
        assert!(text.contains("\"-inf\""));
        let back: ConvexSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, set);
    }
}
