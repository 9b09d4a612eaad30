//! Static demagnetizing field of a uniformly z-magnetized prism.

use std::f64::consts::PI;

use crate::numerics::panel::rectangle_solid_angle;

/// H_d^z/M_s at `r` for the prism [0,d]×[0,w]×[0,l]. The field is that of
/// the ∓M_s charge sheets on the end faces.
pub fn demag_field_z(d: f64, w: f64, l: f64, r: [f64; 3]) -> f64 {
    let mut r = r;
    let eps = 1e-12 * l;
    if r[2] == 0.0 {
        r[2] = eps;
    } else if r[2] == l {
        r[2] = l - eps;
    }
    let top = rectangle_solid_angle(r, (0.0, d), (0.0, w), l);
    let bottom = rectangle_solid_angle(r, (0.0, d), (0.0, w), 0.0);
    (top - bottom) / (4.0 * PI)
}

/// (1/4)∫∫∫∫ z/R³ over two a×b rectangles a distance z apart, in closed form:
/// 4∫₀^a∫₀^b (a−u)(b−v) z/(u²+v²+z²)^{3/2} du dv = 4·j_sheet(a, b, z).
fn j_sheet(a: f64, b: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.5 * PI * a * b;
    }
    let r_ab = (a * a + b * b + z * z).sqrt();
    let r_a = (a * a + z * z).sqrt();
    let r_b = (b * b + z * z).sqrt();
    a * b * (a * b / (z * r_ab)).atan() - b * z * ((b / z).asinh() - (b / r_a).asinh())
        - a * z * ((a / z).asinh() - (a / r_b).asinh())
        + z * ((r_b - z) - (r_ab - r_a))
}

/// Cross-section average of [`demag_field_z`] at height z.
pub fn section_averaged_demag(d: f64, w: f64, l: f64, z: f64) -> f64 {
    -(j_sheet(d, w, z) + j_sheet(d, w, l - z)) / (PI * d * w)
}
