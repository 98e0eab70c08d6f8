//! Scene objects and the planar similarity-transform algebra.
//!
//! An object is fully described by ten reals laid out as
//! `[x, y, size, orientation, r, g, b, square, circle, triangle]`.
//! Positions and sizes are in world units; the world square is `[0, 20]²`.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of features per object.
pub const FEATURE_DIM: usize = 10;
/// Side length of the square world objects are sampled in.
pub const WORLD_SIDE: f64 = 20.0;
/// Range of object sizes (radius) at sampling time.
pub const SIZE_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn index(self) -> usize {
        match self {
            Shape::Square => 0,
            Shape::Circle => 1,
            Shape::Triangle => 2,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    /// Inverse of [`Shape::one_hot`]; anything that is not exactly one `1.0`
    /// among zeros is rejected.
    pub fn from_one_hot(v: &[f64]) -> Option<Shape> {
        if v.len() != 3 {
            return None;
        }
        let ones = v.iter().filter(|&&c| c == 1.0).count();
        let zeros = v.iter().filter(|&&c| c == 0.0).count();
        if ones != 1 || zeros != 2 {
            return None;
        }
        v.iter().position(|&c| c == 1.0).map(|i| Shape::ALL[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub orientation: f64,
    pub color: [f64; 3],
    pub shape: Shape,
}

impl ObjectSpec {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn feature_vector(&self) -> [f64; FEATURE_DIM] {
        let oh = self.shape.one_hot();
        [
            self.x,
            self.y,
            self.size,
            self.orientation,
            self.color[0],
            self.color[1],
            self.color[2],
            oh[0],
            oh[1],
            oh[2],
        ]
    }

    pub fn from_features(f: &[f64]) -> Result<ObjectSpec> {
        if f.len() != FEATURE_DIM {
            return Err(Error::InvalidFeatures(format!(
                "expected {FEATURE_DIM} features, got {}",
                f.len()
            )));
        }
        let shape = Shape::from_one_hot(&f[7..10]).ok_or_else(|| {
            Error::InvalidFeatures(format!("shape is not one-hot: {:?}", &f[7..10]))
        })?;
        Ok(ObjectSpec {
            x: f[0],
            y: f[1],
            size: f[2],
            orientation: f[3],
            color: [f[4], f[5], f[6]],
            shape,
        })
    }

    /// Reduce orientation into `[0, 2π)` and clamp color into `[0, 1]`.
    pub(crate) fn normalized(mut self) -> ObjectSpec {
        self.orientation = wrap_angle(self.orientation);
        for c in &mut self.color {
            *c = c.clamp(0.0, 1.0);
        }
        self
    }
}

/// Convenience for [`ObjectSpec::feature_vector`].
pub fn feature_vector(obj: &ObjectSpec) -> [f64; FEATURE_DIM] {
    obj.feature_vector()
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A scene: an ordered list of objects whose order carries no meaning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub objects: Vec<ObjectSpec>,
}

impl Configuration {
    pub fn new(objects: Vec<ObjectSpec>) -> Configuration {
        Configuration { objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.objects.iter().map(ObjectSpec::position).collect()
    }

    /// Row-major `n × 10` feature matrix.
    pub fn features(&self) -> Vec<f64> {
        self.objects.iter().flat_map(|o| o.feature_vector()).collect()
    }

    pub fn from_features(flat: &[f64]) -> Result<Configuration> {
        if !flat.len().is_multiple_of(FEATURE_DIM) {
            return Err(Error::InvalidFeatures(format!(
                "feature array length {} is not a multiple of {FEATURE_DIM}",
                flat.len()
            )));
        }
        let objects = flat
            .chunks(FEATURE_DIM)
            .map(ObjectSpec::from_features)
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { objects })
    }

    pub fn barycenter(&self) -> Result<[f64; 2]> {
        if self.objects.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        let n = self.objects.len() as f64;
        let (sx, sy) = self
            .objects
            .iter()
            .fold((0.0, 0.0), |(sx, sy), o| (sx + o.x, sy + o.y));
        Ok([sx / n, sy / n])
    }
}

pub fn barycenter(config: &Configuration) -> Result<[f64; 2]> {
    config.barycenter()
}

/// Rotation by `phi`, uniform scale `s` (about the barycenter), then translation `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub phi: f64,
    pub s: f64,
    pub t: [f64; 2],
}

impl SimilarityParams {
    pub const IDENTITY: SimilarityParams = SimilarityParams {
        phi: 0.0,
        s: 1.0,
        t: [0.0, 0.0],
    };

    pub fn new(phi: f64, s: f64, t: [f64; 2]) -> Result<SimilarityParams> {
        if s.is_nan() || s <= 0.0 || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {s}")));
        }
        Ok(SimilarityParams { phi, s, t })
    }

    /// Draw `phi ~ U[0, phi_max]`, `s ~ U[0.5, 2]`, `t ~ U([0, 20]²)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, phi_max: f64) -> SimilarityParams {
        SimilarityParams {
            phi: rng.gen::<f64>() * phi_max,
            s: rng.gen_range(0.5..=2.0),
            t: [rng.gen::<f64>() * WORLD_SIDE, rng.gen::<f64>() * WORLD_SIDE],
        }
    }

    /// Parameters equivalent to applying `first` then `self`.
    ///
    /// Both transforms act about the current barycenter, which `first` moves
    /// by `first.t`, so rotations and scales multiply and translations add.
    pub fn compose(&self, first: &SimilarityParams) -> SimilarityParams {
        SimilarityParams {
            phi: self.phi + first.phi,
            s: self.s * first.s,
            t: [self.t[0] + first.t[0], self.t[1] + first.t[1]],
        }
    }
}

pub fn apply_similarity(config: &Configuration, p: &SimilarityParams) -> Configuration {
    if config.is_empty() {
        return config.clone();
    }
    if *p == SimilarityParams::IDENTITY {
        return config.clone();
    }
    let [bx, by] = config.barycenter().expect("non-empty");
    let (sin, cos) = p.phi.sin_cos();
    let objects = config
        .objects
        .iter()
        .map(|o| {
            let dx = o.x - bx;
            let dy = o.y - by;
            ObjectSpec {
                x: p.s * (cos * dx - sin * dy) + bx + p.t[0],
                y: p.s * (sin * dx + cos * dy) + by + p.t[1],
                size: p.s * o.size,
                orientation: o.orientation + p.phi,
                ..*o
            }
            .normalized()
        })
        .collect();
    Configuration { objects }
}

/// Rotate, scale and translate positions only; size and orientation are kept.
pub fn apply_similarity_positions(config: &Configuration, p: &SimilarityParams) -> Configuration {
    let mut out = apply_similarity(config, p);
    for (o, src) in out.objects.iter_mut().zip(&config.objects) {
        o.size = src.size;
        o.orientation = src.orientation;
    }
    out
}

/// Independent uniform noise on every non-shape feature, scaled by each
/// feature's sampling range.
pub fn perturb<R: Rng + ?Sized>(config: &Configuration, eps: f64, rng: &mut R) -> Configuration {
    let objects = config
        .objects
        .iter()
        .map(|o| {
            let (dpos, dsize, dcolor) = perturb_offsets(eps, rng);
            ObjectSpec {
                x: o.x + dpos[0],
                y: o.y + dpos[1],
                size: o.size + dsize[0],
                orientation: o.orientation + dsize[1],
                color: [
                    o.color[0] + dcolor[0],
                    o.color[1] + dcolor[1],
                    o.color[2] + dcolor[2],
                ],
                shape: o.shape,
            }
            .normalized()
        })
        .collect();
    Configuration { objects }
}

/// Like [`perturb`] but leaves positions untouched.
pub fn perturb_appearance<R: Rng + ?Sized>(
    config: &Configuration,
    eps: f64,
    rng: &mut R,
) -> Configuration {
    let mut out = perturb(config, eps, rng);
    for (o, src) in out.objects.iter_mut().zip(&config.objects) {
        o.x = src.x;
        o.y = src.y;
    }
    out
}

// Returns ([dx, dy], [dsize, dorientation], [dr, dg, db]). The draw order is
// fixed so datasets stay reproducible.
fn perturb_offsets<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> ([f64; 2], [f64; 2], [f64; 3]) {
    let mut u = |range: f64| (2.0 * rng.gen::<f64>() - 1.0) * eps * range;
    let dpos = [u(WORLD_SIDE), u(WORLD_SIDE)];
    let dso = [u(SIZE_RANGE.1), u(TAU)];
    let dcol = [u(1.0), u(1.0), u(1.0)];
    (dpos, dso, dcol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn obj(x: f64, y: f64) -> ObjectSpec {
        ObjectSpec {
            x,
            y,
            size: 1.0,
            orientation: 0.0,
            color: [1.0, 0.0, 0.0],
            shape: Shape::Circle,
        }
    }

    fn random_obj(rng: &mut ChaCha8Rng) -> ObjectSpec {
        ObjectSpec {
            x: rng.gen::<f64>() * 20.0,
            y: rng.gen::<f64>() * 20.0,
            size: rng.gen_range(0.5..2.0),
            orientation: rng.gen::<f64>() * TAU,
            color: [rng.gen(), rng.gen(), rng.gen()],
            shape: Shape::ALL[rng.gen_range(0..3)],
        }
    }

    #[test]
    fn feature_layout() {
        assert_eq!(
            obj(0.0, 0.0).feature_vector(),
            [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        let g = ObjectSpec {
            x: 20.0,
            y: 20.0,
            size: 2.0,
            orientation: PI,
            color: [0.0, 1.0, 0.0],
            shape: Shape::Square,
        };
        assert_eq!(
            g.feature_vector(),
            [20.0, 20.0, 2.0, PI, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn feature_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let o = random_obj(&mut rng);
            assert_eq!(ObjectSpec::from_features(&o.feature_vector()).unwrap(), o);
        }
    }

    #[test]
    fn rejects_bad_one_hot() {
        let mut f = obj(1.0, 1.0).feature_vector();
        f[7] = 1.0;
        assert!(ObjectSpec::from_features(&f).is_err());
        f[7] = 0.5;
        f[8] = 0.0;
        assert!(ObjectSpec::from_features(&f).is_err());
        assert!(ObjectSpec::from_features(&f[..9]).is_err());
    }

    #[test]
    fn barycenter_cases() {
        let c = Configuration::new(vec![obj(3.0, 4.0)]);
        assert_eq!(c.barycenter().unwrap(), [3.0, 4.0]);
        let c = Configuration::new(vec![obj(0.0, 0.0), obj(2.0, 0.0)]);
        assert_eq!(c.barycenter().unwrap(), [1.0, 0.0]);
        assert!(matches!(
            Configuration::default().barycenter(),
            Err(Error::EmptyConfiguration)
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = Configuration::new((0..7).map(|_| random_obj(&mut rng)).collect());
        let mut sx = 0.0;
        let mut sy = 0.0;
        for i in 0..7 {
            sx += c.objects[i].x;
            sy += c.objects[i].y;
        }
        let b = c.barycenter().unwrap();
        assert!((b[0] - sx / 7.0).abs() < 1e-12 && (b[1] - sy / 7.0).abs() < 1e-12);
    }

    #[test]
    fn identity_similarity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Configuration::new((0..5).map(|_| random_obj(&mut rng)).collect());
        assert_eq!(apply_similarity(&c, &SimilarityParams::IDENTITY), c);
    }

    #[test]
    fn quarter_turn() {
        let c = Configuration::new(vec![obj(1.0, 0.0), obj(-1.0, 0.0)]);
        let p = SimilarityParams::new(PI / 2.0, 1.0, [0.0, 0.0]).unwrap();
        let out = apply_similarity(&c, &p);
        assert!(out.objects[0].x.abs() < 1e-12);
        assert!((out.objects[0].y - 1.0).abs() < 1e-12);
        assert!((out.objects[0].orientation - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn scale_must_be_positive() {
        assert!(SimilarityParams::new(0.0, 0.0, [0.0, 0.0]).is_err());
        assert!(SimilarityParams::new(0.0, -1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn composition_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = Configuration::new((0..6).map(|_| random_obj(&mut rng)).collect());
            let p1 = SimilarityParams::sample(&mut rng, TAU);
            let p2 = SimilarityParams::sample(&mut rng, TAU);
            let seq = apply_similarity(&apply_similarity(&c, &p1), &p2);
            let comp = apply_similarity(&c, &p2.compose(&p1));
            for (a, b) in seq.objects.iter().zip(&comp.objects) {
                assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Configuration::new((0..4).map(|_| random_obj(&mut rng)).collect());
        assert_eq!(perturb(&c, 0.0, &mut rng), c);
    }

    #[test]
    fn perturbation_bounds_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = Configuration::new(vec![obj(10.0, 10.0)]);
        let eps = 0.01;
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let p = perturb(&c, eps, &mut rng);
            let dx = p.objects[0].x - 10.0;
            let dy = p.objects[0].y - 10.0;
            assert!(dx.abs() <= 0.2 + 1e-12 && dy.abs() <= 0.2 + 1e-12);
            assert_eq!(p.objects[0].shape, Shape::Circle);
            assert!(p.objects[0].color.iter().all(|c| (0.0..=1.0).contains(c)));
            sum += dx;
            sum_sq += dx * dx;
        }
        let n = draws as f64;
        let mean = sum / n;
        let sd = (sum_sq / n - mean * mean).sqrt();
        assert!(mean.abs() <= 3.0 * sd / n.sqrt());
    }

    #[test]
    fn orientation_wraps() {
        assert_eq!(wrap_angle(TAU), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!(wrap_angle(-1e-18) < TAU);
    }
}
