//! Axis-aligned rectangular panels and Coulomb (1/4πr) panel-pair integrals.

use std::f64::consts::PI;

use super::quad::{gauss_legendre, QuadResult, QuadratureSpec};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Rectangle lying in the plane `normal = offset`, spanning `u × v` along
/// the two remaining axes in cyclic-free order (x,y), (y,z) or (x,z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub normal: Axis,
    pub offset: f64,
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Panel {
    pub fn new(normal: Axis, offset: f64, u: (f64, f64), v: (f64, f64)) -> Result<Self> {
        if !(u.1 > u.0 && v.1 > v.0) {
            return domain("panel bounds must be nonempty");
        }
        Ok(Self { normal, offset, u, v })
    }

    pub fn area(&self) -> f64 {
        (self.u.1 - self.u.0) * (self.v.1 - self.v.0)
    }

    pub fn point(&self, u: f64, v: f64) -> [f64; 3] {
        match self.normal {
            Axis::X => [self.offset, u, v],
            Axis::Y => [u, self.offset, v],
            Axis::Z => [u, v, self.offset],
        }
    }

    fn split(&self, m: usize) -> Vec<Panel> {
        let du = (self.u.1 - self.u.0) / m as f64;
        let dv = (self.v.1 - self.v.0) / m as f64;
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let u0 = self.u.0 + du * i as f64;
                let v0 = self.v.0 + dv * j as f64;
                out.push(Panel { u: (u0, u0 + du), v: (v0, v0 + dv), ..*self });
            }
        }
        out
    }

    fn centroid(&self) -> [f64; 3] {
        self.point(0.5 * (self.u.0 + self.u.1), 0.5 * (self.v.0 + self.v.1))
    }

    fn diameter(&self) -> f64 {
        (self.u.1 - self.u.0).hypot(self.v.1 - self.v.0)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Fourth antiderivative Φ with ∂²_X ∂²_Y Φ = 1/√(X²+Y²+Z²).
fn phi(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let r = (x * x + y * y + z * z).sqrt();
    let mut s = -r / 6.0 * (x * x + y * y - 2.0 * z * z);
    let rxz = x.hypot(z);
    if rxz > 0.0 {
        s += 0.5 * y * (x * x - z * z) * (y / rxz).asinh();
    }
    let ryz = y.hypot(z);
    if ryz > 0.0 {
        s += 0.5 * x * (y * y - z * z) * (x / ryz).asinh();
    }
    if z > 0.0 && r > 0.0 {
        s -= x * y * z * (x * y / (z * r)).atan();
    }
    s
}

/// ∬∬ dA dA' / |r − r'| for two parallel axis-aligned rectangles with unit
/// densities, in closed form.
pub fn parallel_rectangles_inverse_distance(a: &Panel, b: &Panel) -> Result<f64> {
    if a.normal != b.normal {
        return domain("closed form requires parallel panels");
    }
    let z = b.offset - a.offset;
    let xs = [(a.u.1 - b.u.0, 1.0), (a.u.0 - b.u.1, 1.0), (a.u.1 - b.u.1, -1.0), (a.u.0 - b.u.0, -1.0)];
    let ys = [(a.v.1 - b.v.0, 1.0), (a.v.0 - b.v.1, 1.0), (a.v.1 - b.v.1, -1.0), (a.v.0 - b.v.0, -1.0)];
    let mut s = 0.0;
    for (x, sx) in xs {
        for (y, sy) in ys {
            s += sx * sy * phi(x, y, z);
        }
    }
    Ok(s)
}

/// ∬ fA(r) fB(r') / (4π|r−r'|) dA dA'.
///
/// Panels are split into m×m sub-panels with m doubled until the Richardson
/// difference meets the tolerance. Well-separated sub-panel pairs use tensor
/// Gauss rules; near parallel pairs use the closed-form rectangle integral
/// weighted by centroid densities.
pub fn coulomb_panel_quad<FA, FB>(a: &Panel, b: &Panel, fa: FA, fb: FB, spec: &QuadratureSpec<f64>) -> Result<QuadResult<f64>>
where
    FA: Fn([f64; 3]) -> f64,
    FB: Fn([f64; 3]) -> f64,
{
    let rule = gauss_legendre::<f64>(4);
    let parallel = a.normal == b.normal;
    let level = |m: usize| -> Result<f64> {
        let sa = a.split(m);
        let sb = b.split(m);
        let mut total = 0.0;
        for pa in &sa {
            for pb in &sb {
                let sep = dist(pa.centroid(), pb.centroid());
                if parallel && sep < 2.0 * (pa.diameter() + pb.diameter()) {
                    let w = fa(pa.centroid()) * fb(pb.centroid());
                    total += w * parallel_rectangles_inverse_distance(pa, pb)? / (4.0 * PI);
                } else {
                    total += tensor_gauss(pa, pb, &fa, &fb, &rule);
                }
            }
        }
        Ok(total)
    };
    let mut m = 1;
    let mut prev = level(m)?;
    let mut best = QuadResult { value: prev, error: f64::INFINITY };
    let order = if parallel { 4.0 } else { 2.0 };
    while m < 64 {
        m *= 2;
        let cur = level(m)?;
        let extrapolated = cur + (cur - prev) / (order - 1.0);
        let err = (cur - prev).abs() / (order - 1.0);
        best = QuadResult { value: extrapolated, error: err };
        if err <= spec.abs_tol.max(spec.rel_tol * extrapolated.abs()) {
            return Ok(best);
        }
        prev = cur;
    }
    Err(Error::NotConverged { estimate: best.value, error: best.error })
}

fn tensor_gauss<FA, FB>(pa: &Panel, pb: &Panel, fa: &FA, fb: &FB, rule: &(Vec<f64>, Vec<f64>)) -> f64
where
    FA: Fn([f64; 3]) -> f64,
    FB: Fn([f64; 3]) -> f64,
{
    let nodes = |p: &Panel| {
        let (cu, hu) = (0.5 * (p.u.0 + p.u.1), 0.5 * (p.u.1 - p.u.0));
        let (cv, hv) = (0.5 * (p.v.0 + p.v.1), 0.5 * (p.v.1 - p.v.0));
        let mut out = Vec::with_capacity(rule.0.len().pow(2));
        for (xu, wu) in rule.0.iter().zip(&rule.1) {
            for (xv, wv) in rule.0.iter().zip(&rule.1) {
                out.push((p.point(cu + hu * xu, cv + hv * xv), wu * wv * hu * hv));
            }
        }
        out
    };
    let na: Vec<_> = nodes(pa).into_iter().map(|(r, w)| (r, w * fa(r))).collect();
    let nb: Vec<_> = nodes(pb).into_iter().map(|(r, w)| (r, w * fb(r))).collect();
    let mut s = 0.0;
    for (ra, wa) in &na {
        for (rb, wb) in &nb {
            let d = dist(*ra, *rb);
            if d > 0.0 {
                s += wa * wb / d;
            }
        }
    }
    s / (4.0 * PI)
}

/// Signed solid angle ∫ (n·(r−r'))/|r−r'|³ dA' subtended at `r` by a
/// rectangle lying in the plane z = `z0` and spanning [x0,x1]×[y0,y1].
pub fn rectangle_solid_angle(r: [f64; 3], x: (f64, f64), y: (f64, f64), z0: f64) -> f64 {
    let zr = r[2] - z0;
    if zr == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for (xi, sx) in [(x.1 - r[0], 1.0), (x.0 - r[0], -1.0)] {
        for (yj, sy) in [(y.1 - r[1], 1.0), (y.0 - r[1], -1.0)] {
            let rr = (xi * xi + yj * yj + zr * zr).sqrt();
            s += sx * sy * (xi * yj / (zr * rr)).atan();
        }
    }
    s
}
