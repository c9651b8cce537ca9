use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Even-odd scanline fill sampled at pixel centers.
///
/// Pixel `(col, row)` is set when its center `(col + 0.5, row + 0.5)` lies
/// inside the polygon. Edges are half-open in `y` and spans half-open in
/// `x`, so polygons sharing an edge never both claim the pixels on it.
pub fn rasterize_polygon(polygon: &[(f64, f64)], width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(width, height);
    fill(&mut mask, polygon)?;
    Ok(mask)
}

/// Union of several polygons, as stored in one COCO annotation.
pub fn rasterize_polygons(polygons: &[Vec<(f64, f64)>], width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(width, height);
    for p in polygons {
        fill(&mut mask, p)?;
    }
    Ok(mask)
}

fn fill(mask: &mut BinaryMask, polygon: &[(f64, f64)]) -> Result<()> {
    if polygon.len() < 3 {
        return Err(Error::DegeneratePolygon(polygon.len()));
    }
    let mut crossings = Vec::new();
    for row in 0..mask.height() {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for (i, &(x0, y0)) in polygon.iter().enumerate() {
            let (x1, y1) = polygon[(i + 1) % polygon.len()];
            if (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0) {
                crossings.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // centers with span[0] <= col + 0.5 < span[1]
            let first = (span[0] - 0.5).ceil().max(0.0);
            let end = (span[1] - 0.5).ceil().min(mask.width() as f64);
            let mut col = first;
            while col < end {
                mask.set(col as usize, row, true);
                col += 1.0;
            }
        }
    }
    Ok(())
}

/// Polygon area by the shoelace formula.
pub fn polygon_area(polygon: &[(f64, f64)]) -> f64 {
    let n = polygon.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (x0, y0) = polygon[i];
            let (x1, y1) = polygon[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    twice.abs() / 2.0
}
