//! Brute-force reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's rendering, matching or NMS code;
//! only plain data types are shared.

#![allow(dead_code)]

pub mod data;

use segkit::fusion::Detection;
use segkit::refine::SyntheticShape;

// ---------------------------------------------------------------- rendering

/// Pixel-center membership of an analytic shape on a `side`² raster.
pub fn shape_raster(shape: &SyntheticShape, side: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let u = c as f64 / (side - 1) as f64;
            let v = r as f64 / (side - 1) as f64;
            let inside = match *shape {
                SyntheticShape::Disk { cx, cy, r } => (u - cx).powi(2) + (v - cy).powi(2) < r * r,
                SyntheticShape::Rect { cx, cy, half_w, half_h } => {
                    (u - cx).abs() < half_w && (v - cy).abs() < half_h
                }
                SyntheticShape::Annulus { cx, cy, r_inner, r_outer } => {
                    let d2 = (u - cx).powi(2) + (v - cy).powi(2);
                    d2 < r_outer * r_outer && d2 > r_inner * r_inner
                }
            };
            out.push(inside);
        }
    }
    out
}

fn signed_distance(shape: &SyntheticShape, u: f64, v: f64) -> f64 {
    match *shape {
        SyntheticShape::Disk { cx, cy, r } => r - ((u - cx).powi(2) + (v - cy).powi(2)).sqrt(),
        SyntheticShape::Rect { cx, cy, half_w, half_h } => {
            let dx = (u - cx).abs() - half_w;
            let dy = (v - cy).abs() - half_h;
            if dx < 0.0 && dy < 0.0 {
                -dx.max(dy)
            } else {
                -(dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt()
            }
        }
        SyntheticShape::Annulus { cx, cy, r_inner, r_outer } => {
            let d = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
            (r_outer - d).min(d - r_inner)
        }
    }
}

/// Square grid of logits, row-major.
#[derive(Clone)]
pub struct Grid {
    pub side: usize,
    pub v: Vec<f64>,
}

impl Grid {
    fn at(&self, c: usize, r: usize) -> f64 {
        self.v[r * self.side + c]
    }

    /// Bilinear value at normalized `(u, v)` with corners on pixel centers.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        if self.side == 1 {
            return self.v[0];
        }
        let s = (self.side - 1) as f64;
        let (mut x, mut y) = (u * s, v * s);
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        if (y - y.round()).abs() < 1e-9 {
            y = y.round();
        }
        let x0 = (x.floor() as usize).min(self.side - 2);
        let y0 = (y.floor() as usize).min(self.side - 2);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x0 + 1, y0) * fx;
        let bot = self.at(x0, y0 + 1) * (1.0 - fx) + self.at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn resample(&self, side: usize) -> Grid {
        let mut v = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                v.push(self.sample(c as f64 / (side - 1) as f64, r as f64 / (side - 1) as f64));
            }
        }
        Grid { side, v }
    }
}

/// Reference logits: `8 tanh(d / 2)` with `d` the signed distance in pixels.
pub fn reference_grid(shape: &SyntheticShape, side: usize) -> Grid {
    let mut v = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let u = c as f64 / (side - 1) as f64;
            let w = r as f64 / (side - 1) as f64;
            v.push(8.0 * (signed_distance(shape, u, w) * (side - 1) as f64 / 2.0).tanh());
        }
    }
    Grid { side, v }
}

/// Straightforward subdivision rendering: full sort each step, overwrite
/// the `k²` most uncertain pixels (clamped) with reference samples.
pub fn naive_render(coarse: &Grid, reference: &Grid, k: usize, target: usize) -> Grid {
    let mut g = coarse.clone();
    while g.side < target {
        let up = g.resample(g.side * 2);
        let mut idx: Vec<usize> = (0..up.v.len()).collect();
        idx.sort_by(|&a, &b| {
            up.v[a]
                .abs()
                .partial_cmp(&up.v[b].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        let budget = (k * k).min(up.v.len());
        let mut next = up.clone();
        let s = (up.side - 1) as f64;
        for &i in &idx[..budget] {
            let (c, r) = (i % up.side, i / up.side);
            next.v[i] = reference.sample(c as f64 / s, r as f64 / s);
        }
        g = next;
    }
    g
}

pub fn iou_bits(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of rendered masks against the analytic shape for every `k` (0 = plain
/// bilinear upsample), averaged over the corpus.
pub fn oracle_mean_ious(shapes: &[SyntheticShape], ks: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; ks.len()];
    for shape in shapes {
        let truth = shape_raster(shape, 224);
        let reference = reference_grid(shape, 224);
        let coarse = reference.resample(7);
        for (slot, &k) in sums.iter_mut().zip(ks) {
            let out = if k == 0 {
                coarse.resample(224)
            } else {
                naive_render(&coarse, &reference, k, 224)
            };
            let bits: Vec<bool> = out.v.iter().map(|&x| x > 0.0).collect();
            *slot += iou_bits(&bits, &truth);
        }
    }
    sums.into_iter().map(|s| s / shapes.len() as f64).collect()
}

// --------------------------------------------------------------------- AP

pub struct OracleGt {
    pub image: u64,
    pub cat: u64,
    pub bits: Vec<bool>,
}

pub struct OracleDet {
    pub image: u64,
    pub cat: u64,
    pub score: f64,
    pub bits: Vec<bool>,
}

/// Bucket by pixel count with closed medium interval `[lo², hi²]`.
pub fn bucket_of(area: usize, lo: f64, hi: f64) -> usize {
    let a = area as f64;
    if a < lo * lo {
        1
    } else if a <= hi * hi {
        2
    } else {
        3
    }
}

/// Direct evaluation of the AP definition: interpolated precision at each
/// recall level is the best precision at any rank reaching that recall.
fn ap_from_ranked(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return -1.0;
    }
    let mut total = 0.0;
    for k in 0..=100usize {
        let mut best = 0.0f64;
        for rank in 0..hits.len() {
            let tp = hits[..=rank].iter().filter(|&&h| h).count();
            // recall >= k/100  <=>  100 tp >= k n_gt
            if 100 * tp >= k * n_gt {
                best = best.max(tp as f64 / (rank + 1) as f64);
            }
        }
        total += best;
    }
    total / 101.0
}

/// Mask AP metrics `[mAP, AP50, AP75, APs, APm, APl]` for tiny inputs, with
/// detections ranked by descending score and then input position.
pub fn oracle_metrics(gts: &[OracleGt], dets: &[OracleDet], lo: f64, hi: f64) -> [f64; 6] {
    let thresholds: Vec<f64> = (0..10).map(|i| 0.5 + 0.05 * i as f64).collect();
    let mut cats: Vec<u64> = gts.iter().map(|g| g.cat).collect();
    cats.sort();
    cats.dedup();
    let mut images: Vec<u64> = gts.iter().map(|g| g.image).chain(dets.iter().map(|d| d.image)).collect();
    images.sort();
    images.dedup();

    // aps[scope] collects every defined (category, threshold) AP
    let mut aps: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut at50 = Vec::new();
    let mut at75 = Vec::new();
    for &cat in &cats {
        for scope in 0..4usize {
            for (ti, &t) in thresholds.iter().enumerate() {
                let mut ranked: Vec<(f64, usize, usize, bool)> = Vec::new();
                let mut n_gt = 0;
                for (img_pos, &img) in images.iter().enumerate() {
                    let g: Vec<&OracleGt> = gts.iter().filter(|x| x.image == img && x.cat == cat).collect();
                    let mut d: Vec<(usize, &OracleDet)> = dets
                        .iter()
                        .enumerate()
                        .filter(|(_, x)| x.image == img && x.cat == cat)
                        .collect();
                    d.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap().then(a.0.cmp(&b.0)));
                    let area = |bits: &Vec<bool>| bits.iter().filter(|&&b| b).count();
                    let g_ignored: Vec<bool> = g
                        .iter()
                        .map(|x| scope != 0 && bucket_of(area(&x.bits), lo, hi) != scope)
                        .collect();
                    n_gt += g_ignored.iter().filter(|&&ig| !ig).count();
                    let mut used = vec![false; g.len()];
                    for (pos, (_, det)) in d.iter().enumerate() {
                        // best unused non-ignored candidate, else best unused ignored one
                        let mut choice: Option<usize> = None;
                        for want_ignored in [false, true] {
                            let mut best_iou = -1.0;
                            for (gi, gt) in g.iter().enumerate() {
                                if used[gi] || g_ignored[gi] != want_ignored {
                                    continue;
                                }
                                let iou = iou_bits(&det.bits, &gt.bits);
                                if iou >= t && iou > best_iou {
                                    best_iou = iou;
                                    choice = Some(gi);
                                }
                            }
                            if choice.is_some() {
                                break;
                            }
                        }
                        let det_outside = scope != 0 && bucket_of(area(&det.bits), lo, hi) != scope;
                        match choice {
                            Some(gi) => {
                                used[gi] = true;
                                if !g_ignored[gi] {
                                    ranked.push((det.score, img_pos, pos, true));
                                }
                            }
                            None if det_outside => {}
                            None => ranked.push((det.score, img_pos, pos, false)),
                        }
                    }
                }
                ranked.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
                });
                let hits: Vec<bool> = ranked.iter().map(|x| x.3).collect();
                let ap = ap_from_ranked(&hits, n_gt);
                if ap >= 0.0 {
                    aps[scope].push(ap);
                    if scope == 0 && ti == 0 {
                        at50.push(ap);
                    }
                    if scope == 0 && ti == 5 {
                        at75.push(ap);
                    }
                }
            }
        }
    }
    let mean = |v: &Vec<f64>| if v.is_empty() { -1.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    [mean(&aps[0]), mean(&at50), mean(&at75), mean(&aps[1]), mean(&aps[2]), mean(&aps[3])]
}

// -------------------------------------------------------------------- NMS

/// Classic greedy NMS on boxes: keep the best, discard anything overlapping a
/// kept box by more than `threshold`. Returns kept indices.
pub fn classic_nms(dets: &[Detection], threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let d = &dets[i];
        let clash = kept.iter().any(|&k| {
            let o = &dets[k];
            if o.image_id != d.image_id || o.category_id != d.category_id {
                return false;
            }
            let (a, b) = (&o.bbox, &d.bbox);
            let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
            let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
            let inter = iw * ih;
            let iou = inter / (a.w * a.h + b.w * b.h - inter);
            iou > threshold
        });
        if !clash {
            kept.push(i);
        }
    }
    kept
}
