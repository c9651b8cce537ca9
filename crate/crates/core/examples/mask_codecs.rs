// Polygon rasterization, run-length encoding and the compressed COCO string.
//
// cargo run --example mask_codecs

use segkit::ingest::{polygon_area, rasterize_polygon, rle_string_decode, rle_string_encode};
use segkit::mask::{rle_decode, rle_encode, rle_iou};

pub fn run_example() -> segkit::Result<String> {
    let triangle = [(1.0, 1.0), (9.0, 1.0), (1.0, 7.0)];
    let mask = rasterize_polygon(&triangle, 10, 8)?;
    for r in 0..mask.height() {
        let row: String = (0..mask.width()).map(|c| if mask.get(c, r) { '#' } else { '.' }).collect();
        println!("{row}");
    }
    println!("pixels {}, polygon area {}", mask.area(), polygon_area(&triangle));

    let rle = rle_encode(&mask);
    println!("column-major runs {:?}", rle.counts());
    let text = rle_string_encode(&rle);
    println!("compressed \"{text}\"");

    let back = rle_string_decode(&text, 10, 8)?;
    assert_eq!(rle_decode(&back)?, mask);
    println!("self IoU {}", rle_iou(&rle, &back)?);
    Ok(text)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
