//! Flash gray pixel estimation of spatially-varying illumination.
//!
//! Pipeline for a registered flash/no-flash pair:
//!
//! 1. flash-only residual `I_fo = max(I_f - I, 0)`
//! 2. grayness of the residual, top gray pixels
//! 3. K-means on gray pixel positions, mean chroma per cluster
//! 4. Gaussian-weighted blend of cluster chromas, `L_fo`
//! 5. albedo proxy `I_gray = I_fo / L_fo`
//! 6. ambient illumination `L = I / I_gray`, normalized
//!
//! The same clustering and interpolation run directly on the no-flash image
//! give the non-flash baseline.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grayness::{
    dominant_illuminant_meanshift, grayness, select_top_gray, GrayPixelSet, GraynessConfig,
    GraynessMap, GraynessMethod, DEFAULT_BANDWIDTH,
};
use crate::imgcore::{
    ensure_same_size, load_image, save_image, Dimensions, ImageFormat, LinearImage, MaskedImage,
    PixelMask,
};
use crate::vec3::{self, Rgb};

/// Largest amount by which the flash image may be darker than the ambient one.
pub const FLASH_TOLERANCE: f64 = 1e-3;

/// Channels of a chroma or albedo estimate below this are not divided by.
pub const DIVISION_FLOOR: f64 = 1e-6;

/// Default spatial bandwidth as a fraction of the image diagonal.
pub const SPATIAL_SIGMA_FRACTION: f64 = 0.15;

const KMEANS_MAX_ITER: usize = 300;
const KMEANS_TOL: f64 = 1e-6;

/// Per-pixel unit-norm illuminant chroma with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationMap {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
    mask: Vec<bool>,
}

impl IlluminationMap {
    /// Normalizes every vector; `None`, zero, negative or non-finite entries
    /// become invalid.
    pub fn from_vectors(
        width: usize,
        height: usize,
        vectors: Vec<Option<[f64; 3]>>,
    ) -> Result<Self> {
        crate::imgcore::check_dims(width, height, vectors.len())?;
        let mut data = Vec::with_capacity(vectors.len());
        let mut mask = Vec::with_capacity(vectors.len());
        for v in vectors {
            match v
                .filter(|v| v.iter().all(|c| *c >= 0.0))
                .and_then(vec3::normalize)
            {
                Some(n) => {
                    data.push(n);
                    mask.push(true);
                }
                None => {
                    data.push([0.0; 3]);
                    mask.push(false);
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
            mask,
        })
    }

    pub fn uniform(width: usize, height: usize, chroma: [f64; 3]) -> Result<Self> {
        Self::from_vectors(width, height, vec![Some(chroma); width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<[f64; 3]> {
        let i = y * self.width + x;
        self.mask[i].then(|| self.data[i])
    }

    pub fn at(&self, i: usize) -> Option<[f64; 3]> {
        self.mask[i].then(|| self.data[i])
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn validity(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask(&self) -> PixelMask {
        PixelMask::new(self.width, self.height, self.mask.clone()).expect("consistent dimensions")
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Invalidates every pixel where `mask` is false.
    pub fn restrict(mut self, mask: &PixelMask) -> Result<Self> {
        ensure_same_size(&self, mask, "illumination map vs mask")?;
        for (i, keep) in mask.as_slice().iter().enumerate() {
            if !keep {
                self.mask[i] = false;
                self.data[i] = [0.0; 3];
            }
        }
        Ok(self)
    }

    /// Invalid pixels are stored as zero vectors.
    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = LinearImage::new(self.width, self.height, self.data.clone())?;
        save_image(&img, path, ImageFormat::Pfm)
    }

    /// Zero vectors load as invalid pixels.
    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let img = load_image(path, ImageFormat::Pfm)?;
        let (w, h) = (img.width(), img.height());
        Self::from_vectors(w, h, img.into_pixels().into_iter().map(Some).collect())
    }

    /// 8-bit rendering of the chroma at fixed peak value; invalid pixels are black.
    pub fn to_rgb8(&self) -> Vec<[u8; 3]> {
        self.data
            .iter()
            .zip(&self.mask)
            .map(|(v, &m)| {
                let peak = v[0].max(v[1]).max(v[2]);
                if !m || peak <= 0.0 {
                    return [0; 3];
                }
                v.map(|c| (c / peak * 255.0).round().clamp(0.0, 255.0) as u8)
            })
            .collect()
    }
}

impl Dimensions for IlluminationMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

/// A registered no-flash / flash image pair.
#[derive(Debug, Clone)]
pub struct FlashPair {
    pub ambient: LinearImage,
    pub flash: LinearImage,
    pub mask: PixelMask,
}

impl FlashPair {
    /// Checks dimensions and that the flash image never falls more than
    /// [`FLASH_TOLERANCE`] below the ambient one.
    pub fn new(ambient: LinearImage, flash: LinearImage, mask: Option<PixelMask>) -> Result<Self> {
        let pair = Self::new_lenient(ambient, flash, mask)?;
        for (i, (a, f)) in pair
            .ambient
            .pixels()
            .iter()
            .zip(pair.flash.pixels())
            .enumerate()
        {
            for c in 0..3 {
                if f[c] < a[c] - FLASH_TOLERANCE {
                    return Err(Error::InvalidParameter(format!(
                        "flash image darker than ambient at ({}, {}) channel {c}: {} < {}",
                        i % pair.ambient.width(),
                        i / pair.ambient.width(),
                        f[c],
                        a[c]
                    )));
                }
            }
        }
        Ok(pair)
    }

    /// Like [`FlashPair::new`] without the brightness check; negative
    /// residuals are clamped later.
    pub fn new_lenient(
        ambient: LinearImage,
        flash: LinearImage,
        mask: Option<PixelMask>,
    ) -> Result<Self> {
        ensure_same_size(&ambient, &flash, "ambient vs flash")?;
        let mask = match mask {
            Some(m) => {
                ensure_same_size(&ambient, &m, "image vs mask")?;
                m
            }
            None => PixelMask::full(ambient.width(), ambient.height()),
        };
        Ok(Self {
            ambient,
            flash,
            mask,
        })
    }
}

/// `max(I_f - I, 0)` with pixels of negligible residual masked out.
///
/// A pixel is kept when its residual intensity (channel sum) is positive and
/// at least `relative_floor` times the 99th percentile of residual intensity
/// over the pair's mask.
pub fn flash_only(pair: &FlashPair, relative_floor: f64) -> Result<MaskedImage> {
    ensure_same_size(&pair.ambient, &pair.flash, "ambient vs flash")?;
    let residual: Vec<Rgb> = pair
        .ambient
        .pixels()
        .iter()
        .zip(pair.flash.pixels())
        .map(|(a, f)| [0, 1, 2].map(|c| (f[c] - a[c]).max(0.0)))
        .collect();
    let intensity: Vec<f64> = residual.iter().map(|p| p[0] + p[1] + p[2]).collect();

    let mut inside: Vec<f64> = intensity
        .iter()
        .zip(pair.mask.as_slice())
        .filter_map(|(&v, &m)| m.then_some(v))
        .collect();
    let floor = if inside.is_empty() {
        0.0
    } else {
        inside.sort_by(f64::total_cmp);
        let rank = ((0.99 * inside.len() as f64).ceil() as usize).clamp(1, inside.len());
        relative_floor * inside[rank - 1]
    };

    let mask = pair
        .mask
        .as_slice()
        .iter()
        .zip(&intensity)
        .map(|(&m, &v)| m && v > 0.0 && v >= floor)
        .collect();
    let (w, h) = (pair.ambient.width(), pair.ambient.height());
    MaskedImage::new(
        LinearImage::new(w, h, residual)?,
        PixelMask::new(w, h, mask)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Mean `(x, y)` of the member pixels.
    pub centroid: [f64; 2],
    /// Unit-norm mean chroma of the members.
    pub chroma: [f64; 3],
    pub members: usize,
}

/// Gray pixel clusters and the spatial bandwidth used to blend them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub clusters: Vec<Cluster>,
    pub sigma: f64,
}

impl ClusterModel {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Blending weights `exp(-D_m / 2σ²) / Σ_n exp(-D_n / 2σ²)` at `(x, y)`,
    /// with `D_m` the Euclidean pixel distance to centroid `m`.
    pub fn weights(&self, x: f64, y: f64) -> Vec<f64> {
        let dist: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| (x - c.centroid[0]).hypot(y - c.centroid[1]))
            .collect();
        let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let denom = 2.0 * self.sigma * self.sigma;
        let mut w: Vec<f64> = dist
            .iter()
            .map(|d| (-(d - nearest) / denom).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    /// Normalized blend of the cluster chromas at `(x, y)`.
    pub fn chroma_at(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let blend = self
            .weights(x, y)
            .iter()
            .zip(&self.clusters)
            .fold([0.0; 3], |acc, (w, c)| {
                vec3::add(acc, vec3::scale(c.chroma, *w))
            });
        vec3::normalize(blend)
    }
}

/// Default spatial bandwidth for a `width x height` image.
pub fn default_spatial_sigma(width: usize, height: usize) -> f64 {
    SPATIAL_SIGMA_FRACTION * (width as f64).hypot(height as f64)
}

/// K-means (k-means++ seeding) on gray pixel positions.
///
/// Runs at most 300 Lloyd iterations, stopping once no centroid moves by
/// 1e-6 px or more. A cluster left empty takes over the point farthest from
/// its own centroid. The model's sigma defaults to
/// [`default_spatial_sigma`] of the set's image size.
pub fn cluster_gray_pixels(set: &GrayPixelSet, clusters: usize, seed: u64) -> Result<ClusterModel> {
    if clusters == 0 {
        return Err(Error::InvalidParameter(
            "cluster count must be at least 1".into(),
        ));
    }
    if set.len() < clusters {
        return Err(Error::TooFewGrayPixels {
            pixels: set.len(),
            clusters,
        });
    }
    let points: Vec<[f64; 2]> = set
        .pixels
        .iter()
        .map(|p| [p.x as f64, p.y as f64])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(&points, clusters, &mut rng);
    let mut labels = vec![0usize; points.len()];

    for _ in 0..KMEANS_MAX_ITER {
        labels = points
            .par_iter()
            .map(|p| nearest(&centroids, *p).0)
            .collect();
        fill_empty_clusters(&points, &mut labels, &mut centroids);

        let next = means(&points, &labels, clusters);
        let motion = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| dist2(*a, *b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if motion < KMEANS_TOL {
            break;
        }
    }

    let mut sums = vec![[0.0; 3]; clusters];
    let mut counts = vec![0usize; clusters];
    for (p, &l) in set.pixels.iter().zip(&labels) {
        sums[l] = vec3::add(sums[l], p.chroma);
        counts[l] += 1;
    }
    let clusters = (0..clusters)
        .map(|m| {
            Ok(Cluster {
                centroid: centroids[m],
                chroma: vec3::normalize(sums[m]).ok_or(Error::ZeroVector)?,
                members: counts[m],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterModel {
        clusters,
        sigma: default_spatial_sigma(set.width, set.height),
    })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Index of and squared distance to the nearest centroid; ties go to the lower index.
fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist2(*c, p)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn init_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(*p, c));
        }
    }
    centroids
}

fn fill_empty_clusters(points: &[[f64; 2]], labels: &mut [usize], centroids: &mut [[f64; 2]]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Farthest point among clusters that can spare one; earliest index wins ties.
        let donor = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .map(|(i, p)| (i, dist2(*p, centroids[labels[i]])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((i, _)) = donor else {
            return;
        };
        labels[i] = empty;
        centroids[empty] = points[i];
    }
}

fn means(points: &[[f64; 2]], labels: &[usize], k: usize) -> Vec<[f64; 2]> {
    let mut sums = vec![[0.0; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64])
        .collect()
}

/// Per-pixel blend of the cluster chromas over a `width x height` grid.
pub fn interpolate_illumination(
    model: &ClusterModel,
    width: usize,
    height: usize,
) -> Result<IlluminationMap> {
    if model.clusters.is_empty() {
        return Err(Error::InvalidParameter(
            "cluster model has no clusters".into(),
        ));
    }
    if !(model.sigma > 0.0 && model.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "spatial sigma must be positive, got {}",
            model.sigma
        )));
    }
    let vectors: Vec<Option<[f64; 3]>> = (0..width * height)
        .into_par_iter()
        .map(|i| model.chroma_at((i % width) as f64, (i / width) as f64))
        .collect();
    IlluminationMap::from_vectors(width, height, vectors)
}

/// `I_gray = I_fo / L_fo` per channel.
pub fn recover_albedo(ifo: &MaskedImage, lfo: &IlluminationMap) -> Result<MaskedImage> {
    ensure_same_size(&ifo.image, lfo, "flash-only image vs illumination")?;
    let n = ifo.image.len();
    let mut data = vec![[0.0; 3]; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        if !ifo.mask.as_slice()[i] {
            continue;
        }
        let Some(l) = lfo.at(i) else { continue };
        if l.iter().any(|&c| c < DIVISION_FLOOR) {
            continue;
        }
        let p = ifo.image.pixels()[i];
        data[i] = [p[0] / l[0], p[1] / l[1], p[2] / l[2]];
        mask[i] = true;
    }
    let (w, h) = (ifo.image.width(), ifo.image.height());
    MaskedImage::new(LinearImage::new(w, h, data)?, PixelMask::new(w, h, mask)?)
}

/// `L = normalize(I / I_gray)`; pixels where any albedo channel is below
/// [`DIVISION_FLOOR`] are invalid.
pub fn mixed_illumination(ambient: &LinearImage, igray: &MaskedImage) -> Result<IlluminationMap> {
    ensure_same_size(ambient, &igray.image, "ambient vs albedo")?;
    let vectors = ambient
        .pixels()
        .iter()
        .zip(igray.image.pixels())
        .zip(igray.mask.as_slice())
        .map(|((a, g), &m)| {
            if !m || g.iter().any(|&c| c < DIVISION_FLOOR) {
                None
            } else {
                Some([a[0] / g[0], a[1] / g[1], a[2] / g[2]])
            }
        })
        .collect();
    IlluminationMap::from_vectors(ambient.width(), ambient.height(), vectors)
}

/// Von Kries correction: divides each pixel by `sqrt(3) * L(p)` so that a
/// white illuminant leaves the pixel unchanged. Invalid pixels become black.
pub fn correct_image(img: &LinearImage, map: &IlluminationMap) -> Result<MaskedImage> {
    ensure_same_size(img, map, "image vs illumination")?;
    let s3 = 3f64.sqrt();
    let mut mask = Vec::with_capacity(img.len());
    let data = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, p)| match map.at(i) {
            Some(l) if l.iter().all(|&c| c >= DIVISION_FLOOR) => {
                mask.push(true);
                [0, 1, 2].map(|c| p[c] / (s3 * l[c]))
            }
            _ => {
                mask.push(false);
                [0.0; 3]
            }
        })
        .collect();
    let (w, h) = (img.width(), img.height());
    MaskedImage::new(LinearImage::new(w, h, data)?, PixelMask::new(w, h, mask)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: GraynessMethod,
    pub grayness: GraynessConfig,
    /// Fraction of valid pixels kept as gray pixels.
    pub fraction: f64,
    /// Number of clusters `M`.
    pub clusters: usize,
    /// Spatial bandwidth in pixels; `None` uses [`default_spatial_sigma`].
    pub spatial_sigma: Option<f64>,
    pub seed: u64,
    /// Residual noise floor relative to the 99th-percentile residual intensity.
    pub residual_floor: f64,
    /// Mean-shift bandwidth for the global estimate.
    pub bandwidth: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: GraynessMethod::Gp,
            grayness: GraynessConfig::default(),
            fraction: 0.1,
            clusters: 4,
            spatial_sigma: None,
            seed: 0,
            residual_floor: 1e-3,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.clusters == 0 {
            return Err(Error::InvalidParameter(
                "cluster count must be at least 1".into(),
            ));
        }
        if let Some(s) = self.spatial_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "spatial sigma must be positive, got {s}"
                )));
            }
        }
        if !(self.grayness.sigma > 0.0) || !(self.grayness.eps > 0.0) {
            return Err(Error::InvalidParameter(
                "filter sigma and eps must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.residual_floor) {
            return Err(Error::InvalidParameter(format!(
                "residual floor must lie in [0, 1), got {}",
                self.residual_floor
            )));
        }
        Ok(())
    }

    fn sigma_for(&self, width: usize, height: usize) -> f64 {
        self.spatial_sigma
            .unwrap_or_else(|| default_spatial_sigma(width, height))
    }
}

/// Everything the pipeline produced, for inspection and debug output.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    /// Final per-pixel ambient illumination.
    pub illumination: IlluminationMap,
    pub grayness: GraynessMap,
    pub gray_pixels: GrayPixelSet,
    pub clusters: ClusterModel,
    /// Flash-only residual (flash pipeline only).
    pub flash_only: Option<MaskedImage>,
    /// Interpolated flash chroma `L_fo` (flash pipeline only).
    pub flash_illumination: Option<IlluminationMap>,
    /// Albedo proxy `I_gray` (flash pipeline only).
    pub albedo: Option<MaskedImage>,
}

fn gray_clusters(
    img: &LinearImage,
    mask: &PixelMask,
    cfg: &EstimatorConfig,
) -> Result<(GraynessMap, GrayPixelSet, ClusterModel, IlluminationMap)> {
    let gmap = grayness(cfg.method, img, &cfg.grayness)?;
    let set = select_top_gray(&gmap, img, cfg.fraction, mask)?;
    let model = cluster_gray_pixels(&set, cfg.clusters, cfg.seed)?
        .with_sigma(cfg.sigma_for(img.width(), img.height()));
    let map = interpolate_illumination(&model, img.width(), img.height())?;
    Ok((gmap, set, model, map))
}

/// Flash gray pixel estimate of the ambient illumination of `pair`.
pub fn estimate(pair: &FlashPair, cfg: &EstimatorConfig) -> Result<EstimateOutput> {
    cfg.validate()?;
    let fo = flash_only(pair, cfg.residual_floor)?;
    if fo.mask.count() == 0 {
        return Err(Error::NoFlashSignal);
    }
    let (gmap, set, model, lfo) = gray_clusters(&fo.image, &fo.mask, cfg)?;
    let albedo = recover_albedo(&fo, &lfo)?;
    let illumination = mixed_illumination(&pair.ambient, &albedo)?;
    Ok(EstimateOutput {
        illumination,
        grayness: gmap,
        gray_pixels: set,
        clusters: model,
        flash_only: Some(fo),
        flash_illumination: Some(lfo),
        albedo: Some(albedo),
    })
}

/// Non-flash baseline: gray pixels, clusters and interpolation on `ambient` alone.
pub fn estimate_without_flash(
    ambient: &MaskedImage,
    cfg: &EstimatorConfig,
) -> Result<EstimateOutput> {
    cfg.validate()?;
    let (gmap, set, model, map) = gray_clusters(&ambient.image, &ambient.mask, cfg)?;
    Ok(EstimateOutput {
        illumination: map.restrict(&ambient.mask)?,
        grayness: gmap,
        gray_pixels: set,
        clusters: model,
        flash_only: None,
        flash_illumination: None,
        albedo: None,
    })
}

/// Single global illuminant from the no-flash image.
///
/// MSGP takes the strongest mean-shift mode of the gray pixel chromas; GP and
/// DGP take their normalized mean.
pub fn estimate_global(ambient: &MaskedImage, cfg: &EstimatorConfig) -> Result<[f64; 3]> {
    cfg.validate()?;
    let gmap = grayness(cfg.method, &ambient.image, &cfg.grayness)?;
    let set = select_top_gray(&gmap, &ambient.image, cfg.fraction, &ambient.mask)?;
    match cfg.method {
        GraynessMethod::Msgp => dominant_illuminant_meanshift(&set, cfg.bandwidth),
        GraynessMethod::Gp | GraynessMethod::Dgp => set.mean_chroma(),
    }
}
