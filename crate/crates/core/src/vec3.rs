//! Small helpers on RGB triples.

pub(crate) type Rgb = [f64; 3];

#[inline]
pub(crate) fn dot(a: Rgb, b: Rgb) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Rgb) -> f64 {
    dot(a, a).sqrt()
}

/// ℓ2-normalizes `a`; `None` when the norm is zero or not finite.
#[inline]
pub(crate) fn normalize(a: Rgb) -> Option<Rgb> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some([a[0] / n, a[1] / n, a[2] / n])
    } else {
        None
    }
}

#[inline]
pub(crate) fn scale(a: Rgb, k: f64) -> Rgb {
    [a[0] * k, a[1] * k, a[2] * k]
}

#[inline]
pub(crate) fn add(a: Rgb, b: Rgb) -> Rgb {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn sub(a: Rgb, b: Rgb) -> Rgb {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
