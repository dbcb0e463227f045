//! Grayness estimators and gray pixel selection.
//!
//! All three estimators start from `d_c = hat * ln I_c`, the Mexican-hat
//! response of the per-channel log image. A pure gray pixel has equal
//! responses in every channel; lower grayness means grayer.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{
    ensure_same_size, log_transform, LinearImage, MexicanHat, PixelMask, ScalarMap, DEFAULT_EPS,
    DEFAULT_SIGMA,
};
use crate::vec3::{self, Rgb};

/// Local contrast below which a pixel carries no grayness evidence.
pub const CONTRAST_FLOOR: f64 = 1e-6;

/// Default flat-kernel bandwidth for mean shift in unit-chroma space.
pub const DEFAULT_BANDWIDTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraynessMethod {
    Gp,
    Msgp,
    Dgp,
}

impl GraynessMethod {
    pub const ALL: [GraynessMethod; 3] = [
        GraynessMethod::Gp,
        GraynessMethod::Msgp,
        GraynessMethod::Dgp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraynessMethod::Gp => "GP",
            GraynessMethod::Msgp => "MSGP",
            GraynessMethod::Dgp => "DGP",
        }
    }
}

impl fmt::Display for GraynessMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraynessMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(GraynessMethod::Gp),
            "msgp" => Ok(GraynessMethod::Msgp),
            "dgp" => Ok(GraynessMethod::Dgp),
            _ => Err(Error::InvalidParameter(format!(
                "unknown grayness method {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraynessConfig {
    /// Dark-pixel floor for the log transform.
    pub eps: f64,
    /// Mexican-hat scale in pixels.
    pub sigma: f64,
    /// Optional box averaging of the grayness map; 0 disables it.
    pub smoothing_radius: usize,
}

impl Default for GraynessConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            sigma: DEFAULT_SIGMA,
            smoothing_radius: 0,
        }
    }
}

/// Per-pixel grayness; lower is grayer, invalid where no evidence exists.
#[derive(Debug, Clone, PartialEq)]
pub struct GraynessMap {
    pub method: GraynessMethod,
    pub map: ScalarMap,
}

impl GraynessMap {
    pub fn width(&self) -> usize {
        self.map.width()
    }

    pub fn height(&self) -> usize {
        self.map.height()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.map.get(x, y)
    }
}

pub fn grayness(
    method: GraynessMethod,
    img: &LinearImage,
    cfg: &GraynessConfig,
) -> Result<GraynessMap> {
    match method {
        GraynessMethod::Gp => grayness_gp(img, cfg),
        GraynessMethod::Msgp => grayness_msgp(img, cfg),
        GraynessMethod::Dgp => grayness_dgp(img, cfg),
    }
}

/// Filtered per-channel log responses.
fn log_responses(img: &LinearImage, cfg: &GraynessConfig) -> Result<(MexicanHat, [ScalarMap; 3])> {
    let hat = MexicanHat::new(cfg.sigma)?;
    let [r, g, b] = log_transform(img, cfg.eps)?;
    let d = [hat.apply(&r)?, hat.apply(&g)?, hat.apply(&b)?];
    Ok((hat, d))
}

fn per_pixel(
    d: &[ScalarMap; 3],
    method: GraynessMethod,
    cfg: &GraynessConfig,
    f: impl Fn(usize, Rgb) -> Option<f64>,
) -> Result<GraynessMap> {
    let (w, h) = (d[0].width(), d[0].height());
    let mut data = vec![f64::NAN; w * h];
    let mut mask = vec![false; w * h];
    for i in 0..w * h {
        if !d[0].validity()[i] {
            continue;
        }
        let v = [d[0].values()[i], d[1].values()[i], d[2].values()[i]];
        if let Some(g) = f(i, v) {
            data[i] = g;
            mask[i] = true;
        }
    }
    let map = ScalarMap::new(w, h, data, mask)?;
    let map = if cfg.smoothing_radius > 0 {
        box_smooth(&map, cfg.smoothing_radius)?
    } else {
        map
    };
    Ok(GraynessMap { method, map })
}

/// GP: `sum_c (d_c - mean)^2 / |mean|`.
///
/// The denominator uses the magnitude of the mean response so the score stays
/// non-negative regardless of the filter's sign convention.
pub fn grayness_gp(img: &LinearImage, cfg: &GraynessConfig) -> Result<GraynessMap> {
    let (_, d) = log_responses(img, cfg)?;
    per_pixel(&d, GraynessMethod::Gp, cfg, |_, v| {
        let mean = (v[0] + v[1] + v[2]) / 3.0;
        if mean.abs() < CONTRAST_FLOOR {
            return None;
        }
        let spread: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
        Some(spread / mean.abs())
    })
}

/// MSGP: angle between `|d|` and the gray axis,
/// `acos(|d|_1 / (sqrt(3) |d|_2))`, evaluated with `atan2` for accuracy near 0.
pub fn grayness_msgp(img: &LinearImage, cfg: &GraynessConfig) -> Result<GraynessMap> {
    let (_, d) = log_responses(img, cfg)?;
    per_pixel(&d, GraynessMethod::Msgp, cfg, |_, v| {
        if vec3::norm(v) < CONTRAST_FLOOR {
            return None;
        }
        Some(angle_to_gray_axis([v[0].abs(), v[1].abs(), v[2].abs()]))
    })
}

/// Angle between a non-negative vector and `(1,1,1)`.
fn angle_to_gray_axis(u: Rgb) -> f64 {
    let cross = [u[1] - u[2], u[2] - u[0], u[0] - u[1]];
    let sin_part = vec3::norm(cross);
    let cos_part = u[0] + u[1] + u[2];
    sin_part.atan2(cos_part)
}

/// DGP: `|| (hat * (ln I_R - ln|I|), hat * (ln I_G - ln|I|)) ||_2`.
///
/// Pixels whose per-channel log responses are all below the contrast floor
/// are invalid: a flat patch is not evidence of grayness.
pub fn grayness_dgp(img: &LinearImage, cfg: &GraynessConfig) -> Result<GraynessMap> {
    let (hat, d) = log_responses(img, cfg)?;
    let logs = log_transform(img, cfg.eps)?;
    let (w, h) = (img.width(), img.height());
    let log_sum: Vec<f64> = img
        .pixels()
        .iter()
        .map(|p| (p[0] + p[1] + p[2]).max(cfg.eps).ln())
        .collect();
    let relative = |c: usize| -> Result<ScalarMap> {
        let data = logs[c]
            .values()
            .iter()
            .zip(&log_sum)
            .map(|(l, s)| l - s)
            .collect();
        hat.apply(&ScalarMap::new(w, h, data, logs[c].validity().to_vec())?)
    };
    let a_r = relative(0)?;
    let a_g = relative(1)?;
    per_pixel(&d, GraynessMethod::Dgp, cfg, |i, v| {
        if vec3::norm(v) < CONTRAST_FLOOR {
            return None;
        }
        let (r, g) = (a_r.values()[i], a_g.values()[i]);
        Some((r * r + g * g).sqrt())
    })
}

/// Mean of valid neighbours in a `(2r+1)²` window, kept only at valid centers.
fn box_smooth(map: &ScalarMap, r: usize) -> Result<ScalarMap> {
    let (w, h) = (map.width(), map.height());
    let vals = map.values();
    let valid = map.validity();
    let mut out = vec![f64::NAN; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !valid[i] {
                continue;
            }
            let (mut sum, mut n) = (0.0, 0usize);
            for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    let j = yy * w + xx;
                    if valid[j] {
                        sum += vals[j];
                        n += 1;
                    }
                }
            }
            out[i] = sum / n as f64;
        }
    }
    ScalarMap::new(w, h, out, valid.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayPixel {
    pub x: usize,
    pub y: usize,
    /// Unit-norm RGB observed at the pixel.
    pub chroma: [f64; 3],
    pub grayness: f64,
}

/// Selected gray pixels, sorted by ascending grayness.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayPixelSet {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<GrayPixel>,
}

impl GrayPixelSet {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// ℓ2-normalized mean of the member chromas.
    pub fn mean_chroma(&self) -> Result<[f64; 3]> {
        if self.pixels.is_empty() {
            return Err(Error::NoCandidateGrayPixels);
        }
        let sum = self
            .pixels
            .iter()
            .fold([0.0; 3], |acc, p| vec3::add(acc, p.chroma));
        vec3::normalize(sum).ok_or(Error::ZeroVector)
    }

    /// Writes `x,y,r,g,b,grayness` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,r,g,b,grayness")?;
        for p in &self.pixels {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.x, p.y, p.chroma[0], p.chroma[1], p.chroma[2], p.grayness
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Keeps the `ceil(fraction * n)` grayest of the `n` valid, unmasked pixels.
///
/// Ties are broken by row-major order. Each pixel's chroma is the normalized
/// RGB of `img` at that location.
pub fn select_top_gray(
    gmap: &GraynessMap,
    img: &LinearImage,
    fraction: f64,
    mask: &PixelMask,
) -> Result<GrayPixelSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gray pixel fraction must lie in (0, 1], got {fraction}"
        )));
    }
    ensure_same_size(&gmap.map, img, "grayness map vs image")?;
    ensure_same_size(&gmap.map, mask, "grayness map vs mask")?;

    let w = img.width();
    let mut candidates: Vec<GrayPixel> = gmap
        .map
        .valid_values()
        .filter(|&(i, _)| mask.as_slice()[i])
        .filter_map(|(i, g)| {
            vec3::normalize(img.pixels()[i]).map(|chroma| GrayPixel {
                x: i % w,
                y: i / w,
                chroma,
                grayness: g,
            })
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidateGrayPixels);
    }

    // Candidates are already in row-major order; a stable sort keeps ties that way.
    candidates.sort_by(|a, b| a.grayness.total_cmp(&b.grayness));
    let keep = ((fraction * candidates.len() as f64) - 1e-9)
        .ceil()
        .max(1.0) as usize;
    candidates.truncate(keep.min(candidates.len()));
    Ok(GrayPixelSet {
        width: w,
        height: img.height(),
        pixels: candidates,
    })
}

/// Strongest mode of the gray pixel chromas under flat-kernel mean shift.
///
/// Seeds are the centers of occupied `bandwidth`-sized bins. Each seed is
/// shifted to the mean of the points within `bandwidth` until it moves less
/// than 1e-6 or 100 iterations pass. Modes are ranked by the number of points
/// within `bandwidth`; the top one is returned, ℓ2-normalized.
pub fn dominant_illuminant_meanshift(set: &GrayPixelSet, bandwidth: f64) -> Result<[f64; 3]> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean-shift bandwidth must be positive, got {bandwidth}"
        )));
    }
    let points: Vec<Rgb> = set.pixels.iter().map(|p| p.chroma).collect();
    if points.is_empty() {
        return Err(Error::NoCandidateGrayPixels);
    }
    let bw2 = bandwidth * bandwidth;

    let mut bins: BTreeMap<[i64; 3], ()> = BTreeMap::new();
    for p in &points {
        bins.insert(p.map(|v| (v / bandwidth).round() as i64), ());
    }

    let neighbours = |c: Rgb| {
        points.iter().filter(move |p| {
            let d = vec3::sub(**p, c);
            vec3::dot(d, d) <= bw2
        })
    };

    let mut modes: Vec<(Rgb, usize)> = Vec::new();
    for key in bins.keys() {
        let mut center = key.map(|k| k as f64 * bandwidth);
        for _ in 0..100 {
            let (sum, n) =
                neighbours(center).fold(([0.0; 3], 0usize), |(s, n), p| (vec3::add(s, *p), n + 1));
            if n == 0 {
                break;
            }
            let next = vec3::scale(sum, 1.0 / n as f64);
            let shift = vec3::norm(vec3::sub(next, center));
            center = next;
            if shift < 1e-6 {
                break;
            }
        }
        let count = neighbours(center).count();
        if count > 0 {
            modes.push((center, count));
        }
    }

    // Stable: equal counts keep bin order.
    modes.sort_by_key(|m| std::cmp::Reverse(m.1));
    let best = modes.first().map(|m| m.0).unwrap_or(points[0]);
    vec3::normalize(best).ok_or(Error::ZeroVector)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shaded(w: usize, h: usize, albedo: impl Fn(usize, usize) -> Rgb) -> LinearImage {
        LinearImage::from_fn(w, h, |x, y| {
            let s = 0.3
                + 0.5 * ((x as f64 * 0.7).sin() * (y as f64 * 0.45).cos()).abs()
                + 0.02 * x as f64;
            vec3::scale(albedo(x, y), s)
        })
        .unwrap()
    }

    fn set_of(chromas: &[Rgb]) -> GrayPixelSet {
        GrayPixelSet {
            width: chromas.len(),
            height: 1,
            pixels: chromas
                .iter()
                .enumerate()
                .map(|(i, c)| GrayPixel {
                    x: i,
                    y: 0,
                    chroma: vec3::normalize(*c).unwrap(),
                    grayness: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn achromatic_image_is_gray_for_every_estimator() {
        let img = shaded(16, 14, |_, _| [0.6; 3]);
        for m in GraynessMethod::ALL {
            let g = grayness(m, &img, &GraynessConfig::default()).unwrap();
            assert!(g.map.valid_count() > 0, "{m}");
            for (_, v) in g.map.valid_values() {
                assert!(v.abs() <= 1e-9, "{m}: {v}");
            }
        }
    }

    #[test]
    fn constant_chromatic_image_has_no_valid_pixels() {
        let img = LinearImage::from_fn(9, 9, |_, _| [0.8, 0.4, 0.2]).unwrap();
        for m in GraynessMethod::ALL {
            let g = grayness(m, &img, &GraynessConfig::default()).unwrap();
            assert_eq!(g.map.valid_count(), 0, "{m}");
        }
    }

    #[test]
    fn msgp_range_is_bounded() {
        let img = LinearImage::from_fn(20, 20, |x, y| {
            [
                0.1 + ((x * 13 + y * 7) % 11) as f64 / 12.0,
                0.1 + ((x * 5 + y * 3) % 7) as f64 / 8.0,
                0.1 + ((x * 3 + y * 11) % 5) as f64 / 6.0,
            ]
        })
        .unwrap();
        let g = grayness_msgp(&img, &GraynessConfig::default()).unwrap();
        let max = (1.0f64 / 3f64.sqrt()).acos();
        for (_, v) in g.map.valid_values() {
            assert!((0.0..=max + 1e-12).contains(&v), "{v}");
        }
    }

    #[test]
    fn msgp_angle_matches_closed_form() {
        assert_eq!(angle_to_gray_axis([0.3, 0.3, 0.3]), 0.0);
        let single = angle_to_gray_axis([0.7, 0.0, 0.0]);
        assert!((single - (1.0f64 / 3f64.sqrt()).acos()).abs() < 1e-15);
        assert!((single - 0.955_316_618_124_509_3).abs() < 1e-15);
    }

    #[test]
    fn selection_counts_and_orders() {
        let w = 10;
        let vals: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let map = ScalarMap::new(w, w, vals.clone(), vec![true; 100]).unwrap();
        let gmap = GraynessMap {
            method: GraynessMethod::Gp,
            map,
        };
        let img = LinearImage::from_fn(w, w, |_, _| [0.2, 0.3, 0.4]).unwrap();
        let mask = PixelMask::full(w, w);

        let top = select_top_gray(&gmap, &img, 0.1, &mask).unwrap();
        assert_eq!(top.len(), 10);
        let got: Vec<f64> = top.pixels.iter().map(|p| p.grayness).collect();
        assert_eq!(got, (0..10).map(|v| v as f64).collect::<Vec<_>>());

        let all = select_top_gray(&gmap, &img, 1.0, &mask).unwrap();
        assert_eq!(all.len(), 100);
        assert!(all
            .pixels
            .windows(2)
            .all(|p| p[0].grayness <= p[1].grayness));
        assert_eq!(select_top_gray(&gmap, &img, 1.0, &mask).unwrap(), all);
    }

    #[test]
    fn selection_tie_keeps_row_major_first() {
        let map = ScalarMap::new(3, 1, vec![0.5, 0.2, 0.2], vec![true; 3]).unwrap();
        let gmap = GraynessMap {
            method: GraynessMethod::Gp,
            map,
        };
        let img = LinearImage::from_fn(3, 1, |_, _| [1.0; 3]).unwrap();
        let top = select_top_gray(&gmap, &img, 0.34, &PixelMask::full(3, 1)).unwrap();
        // ceil(0.34 * 3) = 2: both ties; now ask for one.
        assert_eq!(top.len(), 2);
        let one = select_top_gray(&gmap, &img, 0.2, &PixelMask::full(3, 1)).unwrap();
        assert_eq!((one.pixels[0].x, one.len()), (1, 1));
    }

    #[test]
    fn selection_without_candidates_fails() {
        let map = ScalarMap::new(2, 1, vec![0.1, 0.2], vec![true, true]).unwrap();
        let gmap = GraynessMap {
            method: GraynessMethod::Gp,
            map,
        };
        let img = LinearImage::from_fn(2, 1, |_, _| [1.0; 3]).unwrap();
        let none = PixelMask::new(2, 1, vec![false, false]).unwrap();
        assert!(matches!(
            select_top_gray(&gmap, &img, 0.1, &none),
            Err(Error::NoCandidateGrayPixels)
        ));
        assert!(select_top_gray(&gmap, &img, 0.0, &PixelMask::full(2, 1)).is_err());
        assert!(select_top_gray(&gmap, &img, 1.5, &PixelMask::full(2, 1)).is_err());
    }

    #[test]
    fn meanshift_of_identical_points_is_that_point() {
        let v = [0.3, 0.5, 0.2];
        let set = set_of(&[v; 7]);
        let mode = dominant_illuminant_meanshift(&set, DEFAULT_BANDWIDTH).unwrap();
        let n = vec3::normalize(v).unwrap();
        for c in 0..3 {
            assert!((mode[c] - n[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn meanshift_prefers_the_majority_cluster() {
        // 90 jittered near-gray chromas and 10 near-red ones.
        let mut pts = Vec::new();
        for i in 0..90 {
            let j = (i as f64 * 0.37).sin() * 0.01;
            pts.push([1.0 + j, 1.0 - j, 1.0 + 0.5 * j]);
        }
        for i in 0..10 {
            let j = (i as f64 * 0.71).cos() * 0.01;
            pts.push([1.0, 0.2 + j, 0.2 - j]);
        }
        let mode = dominant_illuminant_meanshift(&set_of(&pts), DEFAULT_BANDWIDTH).unwrap();
        let gray = 1.0 / 3f64.sqrt();
        let cos = mode.iter().sum::<f64>() * gray;
        assert!(
            cos.clamp(-1.0, 1.0).acos().to_degrees() < 1.0,
            "mode {mode:?}"
        );
    }

    #[test]
    fn meanshift_on_empty_set_fails() {
        assert!(dominant_illuminant_meanshift(&set_of(&[]), 0.05).is_err());
    }

    #[test]
    fn box_smoothing_averages_valid_neighbours() {
        let map = ScalarMap::new(3, 1, vec![1.0, 2.0, 9.0], vec![true, true, false]).unwrap();
        let s = box_smooth(&map, 1).unwrap();
        assert_eq!(s.get(0, 0), Some(1.5));
        assert_eq!(s.get(1, 0), Some(1.5));
        assert_eq!(s.get(2, 0), None);
    }
}
