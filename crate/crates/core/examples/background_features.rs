// Vision front end on a single camera: learn the background with a
// mixture of Gaussians, segment a moving square, extract Sobel edges and
// build the distance-encoded reference image.

use mocaplab::imaging::{sobel_edges, GrayImage, MogModel, MogParams};
use mocaplab::pipeline::{reference_from, FeatureParams};

fn scene(t: usize, square: bool) -> GrayImage {
    GrayImage::from_fn(64, 48, |x, y| {
        let inside = square && (20 + t..36 + t).contains(&x) && (12..32).contains(&y);
        if inside {
            220
        } else {
            (40 + x / 2 + y / 3) as u8
        }
    })
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut mog = MogModel::new(64, 48, MogParams::default())?;
    for t in 0..30 {
        mog.apply(&scene(t, false))?;
    }
    let frame = scene(4, true);
    let fg = mog.apply(&frame)?;
    let edges = sobel_edges(&frame, 60.0)?;
    println!("foreground {} px (square is 320), edges {} px", fg.count(), edges.count());

    let (reference, roi) = reference_from(&fg, &edges, &FeatureParams::default())?;
    println!("roi x {}..{} y {}..{}", roi.x, roi.x_end(), roi.y, roi.y_end());
    let centre = 22 * 64 + 28;
    println!("centre pixel: silhouette {}, distance code {}", reference.silhouette(centre), reference.quantized(centre));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
