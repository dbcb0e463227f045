use rayon::prelude::*;

use super::{LinearImage, ScalarMap};
use crate::error::{Error, Result};

/// Dark-pixel floor for the log transform, as a fraction of full scale.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Default Mexican-hat scale in pixels.
pub const DEFAULT_SIGMA: f64 = 0.5;

/// Per-channel natural log with a floor at `eps`.
///
/// A pixel is valid in all three outputs only if every channel exceeds `eps`;
/// darker pixels still carry `ln(eps)` so that filtering stays defined.
pub fn log_transform(img: &LinearImage, eps: f64) -> Result<[ScalarMap; 3]> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let mask: Vec<bool> = img
        .pixels()
        .iter()
        .map(|p| p.iter().all(|&v| v > eps))
        .collect();
    let channel = |c: usize| {
        let data = img.pixels().iter().map(|p| p[c].max(eps).ln()).collect();
        ScalarMap::new(w, h, data, mask.clone())
    };
    Ok([channel(0)?, channel(1)?, channel(2)?])
}

/// Discrete zero-sum Mexican-hat (negated Laplacian-of-Gaussian) kernel.
#[derive(Debug, Clone)]
pub struct MexicanHat {
    sigma: f64,
    half_width: usize,
    weights: Vec<f64>,
}

impl MexicanHat {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "filter sigma must be positive, got {sigma}"
            )));
        }
        let half_width = (3.0 * sigma).ceil() as usize;
        let size = 2 * half_width + 1;
        let r = half_width as isize;
        let s2 = sigma * sigma;

        let mut gauss = Vec::with_capacity(size * size);
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                gauss.push((-d2 / (2.0 * s2)).exp());
            }
        }
        let gsum: f64 = gauss.iter().sum();

        let mut weights = Vec::with_capacity(size * size);
        let mut i = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                weights.push(gauss[i] / gsum * (2.0 * s2 - d2) / (s2 * s2));
                i += 1;
            }
        }
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w -= mean);

        Ok(Self {
            sigma,
            half_width,
            weights,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Row-major `(2h+1)²` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Convolves `map` with the kernel using mirror padding.
    ///
    /// The output validity is the input validity eroded by the half-width,
    /// with everything outside the image counted as invalid.
    pub fn apply(&self, map: &ScalarMap) -> Result<ScalarMap> {
        let (w, h) = (map.width(), map.height());
        let hw = self.half_width;
        let size = 2 * hw + 1;
        if w < size || h < size {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
                half_width: hw,
            });
        }
        let src = map.values();
        let r = hw as isize;

        let data: Vec<f64> = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).map(move |x| {
                    let mut acc = 0.0;
                    let mut k = 0;
                    for dy in -r..=r {
                        let yy = mirror(y as isize + dy, h);
                        let row = &src[yy * w..(yy + 1) * w];
                        for dx in -r..=r {
                            acc += self.weights[k] * row[mirror(x as isize + dx, w)];
                            k += 1;
                        }
                    }
                    acc
                })
            })
            .collect();

        let mask = erode(map.validity(), w, h, hw);
        ScalarMap::new(w, h, data, mask)
    }
}

/// Convolves `map` with a Mexican-hat kernel of scale `sigma`.
pub fn mexican_hat(map: &ScalarMap, sigma: f64) -> Result<ScalarMap> {
    MexicanHat::new(sigma)?.apply(map)
}

/// Reflects an index about the border without repeating the edge sample.
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// Separable binary erosion with a square structuring element.
fn erode(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let horiz: Vec<bool> = (0..h * w)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            x >= r && x + r < w && (x - r..=x + r).all(|xx| mask[y * w + xx])
        })
        .collect();
    (0..h * w)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            y >= r && y + r < h && (y - r..=y + r).all(|yy| horiz[yy * w + x])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ScalarMap {
        ScalarMap::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn log_of_unit_pixel_is_zero() {
        let img = LinearImage::new(1, 1, vec![[1.0; 3]]).unwrap();
        let logs = log_transform(&img, DEFAULT_EPS).unwrap();
        for l in &logs {
            assert_eq!(l.get(0, 0), Some(0.0));
        }
    }

    #[test]
    fn log_clamps_dark_pixels_and_masks_them() {
        let img = LinearImage::new(1, 1, vec![[0.0, 0.5, 0.5]]).unwrap();
        let logs = log_transform(&img, 1e-4).unwrap();
        assert_eq!(logs[0].values()[0], 1e-4f64.ln());
        assert!(logs.iter().all(|l| l.get(0, 0).is_none()));
    }

    #[test]
    fn log_of_chromatic_pixel_matches_reference() {
        // ln 0.2, ln 0.4, ln 0.8 to 20 significant digits.
        #[allow(clippy::excessive_precision)]
        let reference = [
            -1.609_437_912_434_100_374_6,
            -0.916_290_731_874_155_065_2,
            -0.223_143_551_314_209_755_8,
        ];
        let img = LinearImage::new(1, 1, vec![[0.2, 0.4, 0.8]]).unwrap();
        let logs = log_transform(&img, 1e-4).unwrap();
        for c in 0..3 {
            let v = logs[c].get(0, 0).unwrap();
            assert!((v - reference[c]).abs() < 1e-15, "channel {c}: {v}");
        }
    }

    #[test]
    fn log_rejects_nonpositive_eps() {
        let img = LinearImage::new(1, 1, vec![[1.0; 3]]).unwrap();
        assert!(log_transform(&img, 0.0).is_err());
        assert!(log_transform(&img, -1.0).is_err());
    }

    #[test]
    fn kernel_is_zero_sum_with_three_sigma_support() {
        for sigma in [0.5, 1.0, 1.7, 3.0] {
            let k = MexicanHat::new(sigma).unwrap();
            assert_eq!(k.half_width(), (3.0 * sigma).ceil() as usize);
            assert!(k.weights().iter().sum::<f64>().abs() < 1e-12);
            let c = k.weights().len() / 2;
            assert!(k.weights()[c] > 0.0, "center must be positive");
        }
    }

    #[test]
    fn constant_map_filters_to_zero() {
        let m = map_from(9, 9, |_, _| -3.25);
        let out = mexican_hat(&m, 0.5).unwrap();
        assert!(out.valid_count() > 0);
        for (_, v) in out.valid_values() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn filter_is_affine_equivariant() {
        let base = map_from(12, 10, |x, y| {
            ((x * 7 + y * 3) % 5) as f64 * 0.3 + (x as f64).sin()
        });
        let shifted = map_from(12, 10, |x, y| 2.5 * base.values()[y * 12 + x] - 7.0);
        let a = mexican_hat(&base, 0.8).unwrap();
        let b = mexican_hat(&shifted, 0.8).unwrap();
        for ((_, va), (_, vb)) in a.valid_values().zip(b.valid_values()) {
            assert!((2.5 * va - vb).abs() < 1e-9);
        }
    }

    #[test]
    fn impulse_response_is_the_analytic_kernel() {
        // Independent evaluation: sampled LoG, Gaussian-normalized, mean removed, negated.
        let sigma: f64 = 0.7;
        let r = (3.0 * sigma).ceil() as i64;
        let mut g = vec![];
        let mut log = vec![];
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                let gv = (-d2 / (2.0 * sigma.powi(2))).exp();
                g.push(gv);
                log.push(gv * (d2 - 2.0 * sigma.powi(2)) / sigma.powi(4));
            }
        }
        let gs: f64 = g.iter().sum();
        let mut expected: Vec<f64> = log.iter().map(|v| v / gs).collect();
        let mean = expected.iter().sum::<f64>() / expected.len() as f64;
        expected.iter_mut().for_each(|v| *v = -(*v - mean));

        let n = 21usize;
        let c = n / 2;
        let m = map_from(n, n, |x, y| if x == c && y == c { 1.0 } else { 0.0 });
        let out = mexican_hat(&m, sigma).unwrap();
        let size = (2 * r + 1) as usize;
        for (k, e) in expected.iter().enumerate() {
            let x = c + k % size - r as usize;
            let y = c + k / size - r as usize;
            let v = out.get(x, y).unwrap();
            assert!((v - e).abs() < 1e-12, "({x},{y}): {v} vs {e}");
        }
    }

    #[test]
    fn rejects_maps_smaller_than_support() {
        let m = map_from(4, 9, |_, _| 0.0);
        assert!(matches!(
            mexican_hat(&m, 0.5),
            Err(Error::ImageTooSmall { half_width: 2, .. })
        ));
    }

    #[test]
    fn output_mask_is_eroded() {
        let w = 11;
        let mut valid = vec![true; w * w];
        valid[5 * w + 5] = false;
        let m = ScalarMap::new(w, w, vec![0.0; w * w], valid).unwrap();
        let out = mexican_hat(&m, 0.5).unwrap();
        // Borders of width 2 and the 5x5 neighbourhood of (5,5) are invalid.
        assert!(out.get(1, 5).is_none());
        assert!(out.get(2, 2).is_some());
        assert!(out.get(3, 5).is_none());
        assert!(out.get(7, 7).is_none());
        assert!(out.get(8, 5).is_some());
        assert_eq!(out.valid_count(), 7 * 7 - 25);
    }

    #[test]
    fn mirror_reflects_without_repeating_edge() {
        assert_eq!(mirror(-1, 5), 1);
        assert_eq!(mirror(-2, 5), 2);
        assert_eq!(mirror(5, 5), 3);
        assert_eq!(mirror(6, 5), 2);
        assert_eq!(mirror(3, 5), 3);
    }
}
