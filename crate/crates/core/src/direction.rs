//! Unit-vector helpers shared by the decoder and the metrics.

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

/// `v / |v|`, or `None` for the zero vector.
pub fn normalize(v: Vec3) -> Option<Vec3> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Great-circle angle between two unit vectors, degrees. No unit check.
pub fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    // atan2 form keeps precision for nearly parallel vectors
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    norm(cross).atan2(dot(a, b)).to_degrees()
}

/// `x = cos el cos az`, `y = cos el sin az`, `z = sin el` (degrees).
pub fn unit_from_az_el(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Azimuth in `(-180, 180]` and elevation in `[-90, 90]`, degrees.
pub fn az_el_from_unit(v: Vec3) -> (f64, f64) {
    let az = v[1].atan2(v[0]).to_degrees();
    let el = v[2].atan2(v[0].hypot(v[1])).to_degrees();
    (if az <= -180.0 { az + 360.0 } else { az }, el)
}

/// Integer-rounded azimuth/elevation as written to label files.
pub fn rounded_az_el(v: Vec3) -> (i32, i32) {
    let (az, el) = az_el_from_unit(v);
    let mut az = az.round() as i32;
    if az == -180 {
        az = 180;
    }
    (az, el.round() as i32)
}
