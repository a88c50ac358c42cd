// Projects world points through a Tsai camera with and without radial
// distortion.

use mocaplab::camera::undistorted_to_distorted;
use mocaplab::{Intrinsics, Point3, TsaiCamera};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let intr = Intrinsics { f: 6.5, kappa: 0.0, pixel_pitch: 0.01, img_w: 640, img_h: 480 };
    let eye = Point3::new(0.0, -3000.0, 1100.0);
    let target = Point3::new(0.0, 0.0, 900.0);
    let up = Point3::new(0.0, 0.0, 1.0);
    let pinhole = TsaiCamera::look_at(eye, target, up, intr);
    let barrel = TsaiCamera::look_at(eye, target, up, Intrinsics { kappa: 2e-3, ..intr });

    let centre = pinhole.project(target)?;
    println!("target -> ({:.3}, {:.3}) at depth {:.0} mm", centre.x, centre.y, centre.depth);
    for p in [Point3::new(400.0, 0.0, 1600.0), Point3::new(-700.0, 200.0, 100.0)] {
        let a = pinhole.project(p)?;
        let b = barrel.project(p)?;
        println!("{:?}: pinhole ({:.2}, {:.2})  distorted ({:.2}, {:.2})", p.to_array(), a.x, a.y, b.x, b.y);
    }

    // The distortion solve inverts x_u = x_d (1 + k r_d^2).
    let (k, xu, yu) = (-0.01, 2.0, 1.5);
    let (xd, yd) = undistorted_to_distorted(k, xu, yu);
    let r2 = xd * xd + yd * yd;
    println!("residual {:.1e} mm", (xd * (1.0 + k * r2) - xu).abs().max((yd * (1.0 + k * r2) - yu).abs()));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
