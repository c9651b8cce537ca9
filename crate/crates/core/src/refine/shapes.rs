use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::{BinaryMask, ScoreField};

/// Saturation level of ground-truth logits.
pub const GT_LOGIT_SCALE: f64 = 8.0;

/// Analytic test shape in normalized `[0, 1]²` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticShape {
    Disk { cx: f64, cy: f64, r: f64 },
    Rect { cx: f64, cy: f64, half_w: f64, half_h: f64 },
    Annulus { cx: f64, cy: f64, r_inner: f64, r_outer: f64 },
}

impl SyntheticShape {
    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, u: f64, v: f64) -> f64 {
        match *self {
            SyntheticShape::Disk { cx, cy, r } => r - (u - cx).hypot(v - cy),
            SyntheticShape::Rect {
                cx,
                cy,
                half_w,
                half_h,
            } => {
                let dx = (u - cx).abs() - half_w;
                let dy = (v - cy).abs() - half_h;
                let outside = dx.max(0.0).hypot(dy.max(0.0));
                -(outside + dx.max(dy).min(0.0))
            }
            SyntheticShape::Annulus {
                cx,
                cy,
                r_inner,
                r_outer,
            } => {
                let d = (u - cx).hypot(v - cy);
                (r_outer - d).min(d - r_inner)
            }
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.signed_distance(u, v) > 0.0
    }

    /// Saturating logit field at `side`²: `GT_LOGIT_SCALE * tanh(d / 2)`
    /// with `d` the signed distance in pixels of that grid.
    pub fn ground_truth_field(&self, side: usize) -> Result<ScoreField> {
        let pixels = (side.max(2) - 1) as f64;
        ScoreField::from_fn(side, side, |c, r| {
            let (u, v) = (norm(c, side), norm(r, side));
            GT_LOGIT_SCALE * (self.signed_distance(u, v) * pixels / 2.0).tanh()
        })
    }

    pub fn ground_truth_mask(&self, side: usize) -> BinaryMask {
        BinaryMask::from_fn(side, side, |c, r| self.contains(norm(c, side), norm(r, side)))
    }

    /// Low-resolution version of the ground-truth field, as a coarse mask
    /// head would produce: the 224² reference point-sampled down to `side`².
    pub fn coarse_field(&self, side: usize) -> Result<ScoreField> {
        self.ground_truth_field(224)?.resize(side, side)
    }
}

fn norm(i: usize, side: usize) -> f64 {
    if side <= 1 {
        0.0
    } else {
        i as f64 / (side - 1) as f64
    }
}

/// Thirty seeded shapes: ten disks, ten rectangles and ten annuli.
pub fn synthetic_corpus() -> Vec<SyntheticShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2020);
    let mut shapes = Vec::with_capacity(30);
    for _ in 0..10 {
        let r = rng.gen_range(0.12..0.38);
        shapes.push(SyntheticShape::Disk {
            cx: rng.gen_range(r + 0.05..0.95 - r),
            cy: rng.gen_range(r + 0.05..0.95 - r),
            r,
        });
    }
    for _ in 0..10 {
        let half_w = rng.gen_range(0.08..0.4);
        let half_h = rng.gen_range(0.08..0.4);
        shapes.push(SyntheticShape::Rect {
            cx: rng.gen_range(half_w + 0.05..0.95 - half_w),
            cy: rng.gen_range(half_h + 0.05..0.95 - half_h),
            half_w,
            half_h,
        });
    }
    for _ in 0..10 {
        let r_outer = rng.gen_range(0.2..0.4);
        let r_inner = r_outer * rng.gen_range(0.3..0.7);
        shapes.push(SyntheticShape::Annulus {
            cx: rng.gen_range(r_outer + 0.05..0.95 - r_outer),
            cy: rng.gen_range(r_outer + 0.05..0.95 - r_outer),
            r_inner,
            r_outer,
        });
    }
    shapes
}
