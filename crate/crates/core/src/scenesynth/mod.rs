//! Multi-illuminant flash/no-flash triplet synthesis.
//!
//! A [`DirectionalStack`] holds one image of an object per light direction,
//! each lit by a unit white light. Recoloring a subset of directions and
//! summing them gives a no-flash image lit by `N` colored lights; adding the
//! frontal direction gives the flash image. The ground-truth illumination is
//! the shading-weighted mix of the light chromas at every pixel.

mod dataset;
mod render;

pub use dataset::{
    build_dataset, load_manifest, load_mit_dataset, load_mit_stack, write_dataset, ManifestRecord,
    CHROMATIC_OBJECTS, MANIFEST_FILE,
};
pub use render::{
    procedural_directions, procedural_stack, procedural_stacks, render_procedural, AlbedoLayout,
    Bump, Geometry, Light, Patch, RenderedScene, SceneSpec, Sphere, PROCEDURAL_DIRECTIONS,
    PROCEDURAL_FLASH_INDEX,
};

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flashgp::IlluminationMap;
use crate::imgcore::{LinearImage, PixelMask};
use crate::vec3::{self, Rgb};

/// Total shading below which the ground truth is undefined.
pub const SHADING_FLOOR: f64 = 1e-4;

/// Smallest allowed min/max channel ratio of a sampled light chroma.
pub const MIN_CHANNEL_RATIO: f64 = 0.2;

/// Images of one object under single white lights from several directions.
#[derive(Debug, Clone)]
pub struct DirectionalStack {
    pub object: String,
    pub images: Vec<LinearImage>,
    pub mask: PixelMask,
    /// Index of the roughly frontal direction used as the flash.
    pub flash_index: usize,
    /// Exact per-direction shading `max(n·s, 0)`, when known.
    pub shading: Option<Vec<Vec<f64>>>,
}

impl DirectionalStack {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .images
            .first()
            .ok_or_else(|| Error::InvalidParameter(format!("{}: empty stack", self.object)))?;
        if self.images.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "{}: a stack needs at least two directions",
                self.object
            )));
        }
        if self.images.iter().any(|im| !im.same_size(first)) || !first.same_size(&self.mask) {
            return Err(Error::DimensionMismatch(format!(
                "{}: stack images and mask differ in size",
                self.object
            )));
        }
        if self.flash_index >= self.images.len() {
            return Err(Error::InvalidParameter(format!(
                "{}: flash index {} out of range",
                self.object, self.flash_index
            )));
        }
        if let Some(sh) = &self.shading {
            if sh.len() != self.images.len() || sh.iter().any(|s| s.len() != first.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "{}: shading does not match images",
                    self.object
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }

    /// Shading of direction `k` at pixel `i`: exact when known, otherwise the
    /// channel mean of the white-lit image.
    fn shading_at(&self, k: usize, i: usize) -> f64 {
        match &self.shading {
            Some(sh) => sh[k][i],
            None => {
                let p = self.images[k].pixels()[i];
                (p[0] + p[1] + p[2]) / 3.0
            }
        }
    }

    pub fn ambient_directions(&self) -> Vec<usize> {
        (0..self.images.len())
            .filter(|&k| k != self.flash_index)
            .collect()
    }
}

/// How the flash chroma of a triplet is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FlashChroma {
    /// Near-white: each channel uniform in [0.8, 1.0], then normalized.
    Sampled,
    Fixed([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub flash: FlashChroma,
    /// Standard deviation of additive Gaussian sensor noise, relative to full
    /// scale; 0 disables noise.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            flash: FlashChroma::Sampled,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletMeta {
    pub object: String,
    pub n: usize,
    pub seed: u64,
    pub directions: Vec<usize>,
    pub chromas: Vec<[f64; 3]>,
    pub flash_direction: usize,
    pub flash_chroma: [f64; 3],
}

/// No-flash image, flash image and ground-truth illumination of one scene.
#[derive(Debug, Clone)]
pub struct SampleTriplet {
    pub ambient: LinearImage,
    pub flash: LinearImage,
    pub gt: IlluminationMap,
    pub mask: PixelMask,
    pub meta: TripletMeta,
}

/// A light chroma on the RGB simplex with `min/max >= 0.2`, ℓ2-normalized.
pub fn sample_light_chroma<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        // Uniform on the simplex: normalized exponentials.
        let e: Rgb = [0, 1, 2].map(|_| -(1.0 - rng.random::<f64>()).ln());
        let max = e[0].max(e[1]).max(e[2]);
        let min = e[0].min(e[1]).min(e[2]);
        if max > 0.0 && min / max >= MIN_CHANNEL_RATIO {
            return vec3::normalize(e).expect("positive vector");
        }
    }
}

/// A whitish flash chroma: channels in [0.8, 1.0], ℓ2-normalized.
pub fn sample_flash_chroma<R: Rng>(rng: &mut R) -> [f64; 3] {
    let v = [0, 1, 2].map(|_| rng.random_range(0.8..=1.0));
    vec3::normalize(v).expect("positive vector")
}

/// Deterministic per-triplet seed from the dataset seed, object id and `N`.
pub fn triplet_seed(seed: u64, object: &str, n: usize) -> u64 {
    // FNV-1a over the object id, then splitmix64 finalization.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in object.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17) ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_chroma(c: [f64; 3]) -> Result<[f64; 3]> {
    if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "light chroma must have positive components, got {c:?}"
        )));
    }
    Ok(vec3::normalize(c).expect("positive vector"))
}

/// Composes a triplet from explicit `(direction, chroma)` lights.
///
/// `I = Σ_i l_i ⊙ B_i`, `I_f = I + l_f ⊙ B_flash` and
/// `gt = normalize(Σ_i λ_i l_i)` where the total shading exceeds
/// [`SHADING_FLOOR`] inside the stack mask.
pub fn compose_with(
    stack: &DirectionalStack,
    lights: &[(usize, [f64; 3])],
    flash_chroma: [f64; 3],
) -> Result<SampleTriplet> {
    stack.validate()?;
    if lights.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one light is required".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for &(k, _) in lights {
        if k >= stack.images.len() || k == stack.flash_index || !seen.insert(k) {
            return Err(Error::InvalidParameter(format!(
                "{}: direction {k} is out of range, the flash, or repeated",
                stack.object
            )));
        }
    }
    let chromas = lights
        .iter()
        .map(|&(_, c)| check_chroma(c))
        .collect::<Result<Vec<_>>>()?;
    let flash_chroma = check_chroma(flash_chroma)?;

    let (w, h) = (stack.width(), stack.height());
    let n_px = w * h;
    let mut ambient = vec![[0.0; 3]; n_px];
    let mut gt = Vec::with_capacity(n_px);
    for (i, amb) in ambient.iter_mut().enumerate() {
        let mut mix = [0.0; 3];
        let mut total = 0.0;
        for (&(k, _), l) in lights.iter().zip(&chromas) {
            let b = stack.images[k].pixels()[i];
            *amb = vec3::add(*amb, [l[0] * b[0], l[1] * b[1], l[2] * b[2]]);
            let lambda = stack.shading_at(k, i);
            mix = vec3::add(mix, vec3::scale(*l, lambda));
            total += lambda;
        }
        let ok = stack.mask.as_slice()[i] && total >= SHADING_FLOOR;
        gt.push(ok.then_some(mix));
    }
    let fb = stack.images[stack.flash_index].pixels();
    let flash: Vec<Rgb> = ambient
        .iter()
        .zip(fb)
        .map(|(a, b)| {
            [
                a[0] + flash_chroma[0] * b[0],
                a[1] + flash_chroma[1] * b[1],
                a[2] + flash_chroma[2] * b[2],
            ]
        })
        .collect();

    Ok(SampleTriplet {
        ambient: LinearImage::new(w, h, ambient)?,
        flash: LinearImage::new(w, h, flash)?,
        gt: IlluminationMap::from_vectors(w, h, gt)?,
        mask: stack.mask.clone(),
        meta: TripletMeta {
            object: stack.object.clone(),
            n: lights.len(),
            seed: 0,
            directions: lights.iter().map(|l| l.0).collect(),
            chromas,
            flash_direction: stack.flash_index,
            flash_chroma,
        },
    })
}

/// Draws `n` distinct non-flash directions and chromas and composes a triplet.
///
/// The sampler is seeded with [`triplet_seed`]`(seed, object, n)`, so the
/// result does not depend on the order in which triplets are built.
pub fn compose_triplet(
    stack: &DirectionalStack,
    n: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<SampleTriplet> {
    stack.validate()?;
    let candidates = stack.ambient_directions();
    if n == 0 || n > candidates.len() {
        return Err(Error::InvalidParameter(format!(
            "{}: N = {n} out of range 1..={}",
            stack.object,
            candidates.len()
        )));
    }
    let sub = triplet_seed(seed, &stack.object, n);
    let mut rng = ChaCha8Rng::seed_from_u64(sub);
    let picks = sample(&mut rng, candidates.len(), n);
    let lights: Vec<(usize, [f64; 3])> = picks
        .iter()
        .map(|j| (candidates[j], sample_light_chroma(&mut rng)))
        .collect();
    let flash_chroma = match cfg.flash {
        FlashChroma::Sampled => sample_flash_chroma(&mut rng),
        FlashChroma::Fixed(c) => c,
    };
    let mut t = compose_with(stack, &lights, flash_chroma)?;
    t.meta.seed = sub;
    if cfg.noise_sigma > 0.0 {
        add_noise(&mut t, cfg.noise_sigma, &mut rng)?;
    }
    Ok(t)
}

fn add_noise(t: &mut SampleTriplet, sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
    let mut noisy = |img: &LinearImage| {
        let data = img
            .pixels()
            .iter()
            .map(|p| p.map(|v| (v + normal.sample(rng)).max(0.0)))
            .collect();
        LinearImage::new(img.width(), img.height(), data)
    };
    t.ambient = noisy(&t.ambient)?;
    t.flash = noisy(&t.flash)?;
    Ok(())
}
