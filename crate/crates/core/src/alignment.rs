//! Least-squares similarity alignment of planar point sets (Umeyama's method,
//! specialised to 2D where rotation-plus-scale is a single complex factor).
//!
//! This solves the inverse problem of [`crate::geometry::apply_similarity`]
//! from point correspondences alone, so it serves as an independent check on
//! generated positive and negative pairs.

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub scale: f64,
    pub rotation: f64,
    pub translation: [f64; 2],
    /// Euclidean residual per point, in the target frame.
    pub residuals: Vec<f64>,
}

impl Alignment {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn rms(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (sin, cos) = self.rotation.sin_cos();
        [
            self.scale * (cos * p[0] - sin * p[1]) + self.translation[0],
            self.scale * (sin * p[0] + cos * p[1]) + self.translation[1],
        ]
    }
}

fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let (x, y) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [x / n, y / n]
}

/// Best similarity `T` (rotation, uniform scale, translation; no reflection)
/// minimising `Σ |T(source_k) − target_k|²`.
///
/// Panics if the slices differ in length or are empty.
pub fn fit_similarity(source: &[[f64; 2]], target: &[[f64; 2]]) -> Alignment {
    assert_eq!(source.len(), target.len(), "point sets differ in length");
    assert!(!source.is_empty(), "empty point sets");
    let cs = centroid(source);
    let ct = centroid(target);
    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut norm = 0.0;
    for (p, q) in source.iter().zip(target) {
        let (px, py) = (p[0] - cs[0], p[1] - cs[1]);
        let (qx, qy) = (q[0] - ct[0], q[1] - ct[1]);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
        norm += px * px + py * py;
    }
    let (a, b) = if norm > 0.0 {
        (dot / norm, cross / norm)
    } else {
        (0.0, 0.0)
    };
    let scale = a.hypot(b);
    let rotation = b.atan2(a);
    let translation = [ct[0] - (a * cs[0] - b * cs[1]), ct[1] - (b * cs[0] + a * cs[1])];
    let residuals = source
        .iter()
        .zip(target)
        .map(|(p, q)| {
            let fx = a * p[0] - b * p[1] + translation[0];
            let fy = b * p[0] + a * p[1] + translation[1];
            (fx - q[0]).hypot(fy - q[1])
        })
        .collect();
    Alignment {
        scale,
        rotation,
        translation,
        residuals,
    }
}
