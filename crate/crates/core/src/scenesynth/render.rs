//! Procedural Lambertian scenes: `I_c(p) = R_c(p) * max(n(p)·s, 0) * l_c`.
//!
//! Coordinates: x to the right, y down, z towards the viewer; pixel `(x, y)`
//! sits at `(x, y)` in the image plane under an orthographic camera.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compose_with, DirectionalStack, SampleTriplet};
use crate::error::{Error, Result};
use crate::imgcore::{LinearImage, PixelMask};
use crate::vec3::{self, Rgb};

/// Number of light directions in a procedural stack.
pub const PROCEDURAL_DIRECTIONS: usize = 10;

/// The roughly frontal direction, used as the flash (the sixth one).
pub const PROCEDURAL_FLASH_INDEX: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Unit vector pointing from the surface towards the light.
    pub direction: [f64; 3],
    /// Unit-norm chroma with positive components.
    pub chroma: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Gaussian bump `height * exp(-d² / 2 width²)` on a height field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    /// Infinite plane with a constant normal; covers the frame.
    Plane { normal: [f64; 3] },
    /// Hemispheres resting on the image plane; the background is masked out.
    Spheres(Vec<Sphere>),
    /// Sum of Gaussian bumps over a flat base; covers the frame.
    HeightField(Vec<Bump>),
}

impl Geometry {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidParameter(format!(
                "degenerate geometry: {what}"
            )))
        };
        match self {
            Geometry::Plane { normal } => {
                if !(vec3::norm(*normal) > 0.0) {
                    return bad("zero-norm plane normal");
                }
            }
            Geometry::Spheres(s) => {
                if s.is_empty() {
                    return bad("no spheres");
                }
                if s.iter().any(|s| !(s.radius > 0.0 && s.radius.is_finite())) {
                    return bad("non-positive sphere radius");
                }
            }
            Geometry::HeightField(b) => {
                if b.iter()
                    .any(|b| !(b.width > 0.0 && b.width.is_finite() && b.height.is_finite()))
                {
                    return bad("non-positive bump width");
                }
            }
        }
        Ok(())
    }

    /// Unit surface normal at `(x, y)`, or `None` off the object.
    pub fn normal_at(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        match self {
            Geometry::Plane { normal } => vec3::normalize(*normal),
            Geometry::Spheres(spheres) => {
                let mut best: Option<(f64, [f64; 3])> = None;
                for s in spheres {
                    let (dx, dy) = (x - s.center[0], y - s.center[1]);
                    let rho2 = (dx * dx + dy * dy) / (s.radius * s.radius);
                    if rho2 >= 1.0 {
                        continue;
                    }
                    let z = s.radius * (1.0 - rho2).sqrt();
                    if best.is_none_or(|b| z > b.0) {
                        best = Some((z, [dx / s.radius, dy / s.radius, z / s.radius]));
                    }
                }
                best.and_then(|b| vec3::normalize(b.1))
            }
            Geometry::HeightField(bumps) => {
                let (mut gx, mut gy) = (0.0, 0.0);
                for b in bumps {
                    let (dx, dy) = (x - b.center[0], y - b.center[1]);
                    let w2 = b.width * b.width;
                    let z = b.height * (-(dx * dx + dy * dy) / (2.0 * w2)).exp();
                    gx += -z * dx / w2;
                    gy += -z * dy / w2;
                }
                vec3::normalize([-gx, -gy, 1.0])
            }
        }
    }
}

/// Disc of chromatic albedo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: [f64; 2],
    pub radius: f64,
    pub color: [f64; 3],
}

/// Gray textured albedo with chromatic patches.
///
/// Gray regions use one texture for all channels, so their albedo stays
/// achromatic; patches modulate each channel with its own texture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlbedoLayout {
    pub gray_level: f64,
    /// Relative texture modulation in [0, 1); 0 gives flat albedo.
    pub texture_amplitude: f64,
    pub texture_seed: u64,
    pub patches: Vec<Patch>,
}

impl AlbedoLayout {
    pub fn uniform_gray(level: f64) -> Self {
        Self {
            gray_level: level,
            texture_amplitude: 0.0,
            texture_seed: 0,
            patches: vec![],
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gray_level > 0.0) || !(0.0..1.0).contains(&self.texture_amplitude) {
            return Err(Error::InvalidParameter(
                "albedo needs a positive gray level and texture amplitude in [0, 1)".into(),
            ));
        }
        if self
            .patches
            .iter()
            .any(|p| p.color.iter().any(|c| !(*c > 0.0)) || !(p.radius > 0.0))
        {
            return Err(Error::InvalidParameter(
                "patch colors and radii must be positive".into(),
            ));
        }
        Ok(())
    }

    fn sampler(&self) -> impl Fn(f64, f64) -> Rgb + '_ {
        let textures: [Texture; 4] =
            [0, 1, 2, 3].map(|k| Texture::new(self.texture_seed.wrapping_add(k as u64 * 0x9e37)));
        move |x, y| {
            let amp = self.texture_amplitude;
            for p in &self.patches {
                if (x - p.center[0]).hypot(y - p.center[1]) < p.radius {
                    return [0, 1, 2]
                        .map(|c| p.color[c] * (1.0 + amp * textures[c + 1].value(x, y)));
                }
            }
            [self.gray_level * (1.0 + amp * textures[0].value(x, y)); 3]
        }
    }
}

/// Band-limited pseudo-random texture in [-1, 1].
struct Texture {
    waves: Vec<(f64, f64, f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..4)
            .map(|_| {
                let period = rng.random_range(3.0..9.0);
                let theta = rng.random_range(0.0..PI);
                let k = 2.0 * PI / period;
                (
                    k * theta.cos(),
                    k * theta.sin(),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self { waves }
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|(kx, ky, ph)| (kx * x + ky * y + ph).sin())
            .sum();
        s / self.waves.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub geometry: Geometry,
    pub albedo: AlbedoLayout,
    pub lights: Vec<Light>,
    pub flash: Light,
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        if self.lights.is_empty() {
            return Err(Error::InvalidParameter(
                "scene needs at least one light".into(),
            ));
        }
        for l in self.lights.iter().chain([&self.flash]) {
            if l.chroma.iter().any(|c| !(*c > 0.0)) || vec3::normalize(l.direction).is_none() {
                return Err(Error::InvalidParameter(format!("invalid light {l:?}")));
            }
        }
        self.geometry.validate()?;
        self.albedo.validate()
    }
}

/// A rendered scene: per-light white-lit images plus exact shading.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub spec: SceneSpec,
    /// Directions are the scene's lights in order, then the flash.
    pub stack: DirectionalStack,
    pub albedo: LinearImage,
}

impl RenderedScene {
    /// Triplet lit by the scene's lights and flash chromas, with exact ground truth.
    pub fn triplet(&self) -> Result<SampleTriplet> {
        let lights: Vec<(usize, [f64; 3])> = self
            .spec
            .lights
            .iter()
            .enumerate()
            .map(|(k, l)| (k, l.chroma))
            .collect();
        compose_with(&self.stack, &lights, self.spec.flash.chroma)
    }

    /// White-lit flash image times the flash chroma: the exact flash term.
    pub fn flash_term(&self) -> Result<LinearImage> {
        let l = vec3::normalize(self.spec.flash.chroma).ok_or(Error::ZeroVector)?;
        let b = &self.stack.images[self.stack.flash_index];
        let data = b
            .pixels()
            .iter()
            .map(|p| [p[0] * l[0], p[1] * l[1], p[2] * l[2]])
            .collect();
        LinearImage::new(b.width(), b.height(), data)
    }
}

/// Renders every light of `spec` (and its flash) under unit white light.
pub fn render_procedural(spec: &SceneSpec, width: usize, height: usize) -> Result<RenderedScene> {
    spec.validate()?;
    let directions: Vec<[f64; 3]> = spec
        .lights
        .iter()
        .chain([&spec.flash])
        .map(|l| l.direction)
        .collect();
    let flash_index = spec.lights.len();
    let (stack, albedo) = render_stack(
        "scene",
        &spec.geometry,
        &spec.albedo,
        &directions,
        flash_index,
        width,
        height,
    )?;
    Ok(RenderedScene {
        spec: spec.clone(),
        stack,
        albedo,
    })
}

fn render_stack(
    object: &str,
    geometry: &Geometry,
    albedo: &AlbedoLayout,
    directions: &[[f64; 3]],
    flash_index: usize,
    width: usize,
    height: usize,
) -> Result<(DirectionalStack, LinearImage)> {
    geometry.validate()?;
    albedo.validate()?;
    let dirs = directions
        .iter()
        .map(|d| vec3::normalize(*d).ok_or(Error::ZeroVector))
        .collect::<Result<Vec<_>>>()?;
    let sample_albedo = albedo.sampler();
    let n_px = width * height;
    let mut normals = Vec::with_capacity(n_px);
    let mut refl = Vec::with_capacity(n_px);
    for y in 0..height {
        for x in 0..width {
            let n = geometry.normal_at(x as f64, y as f64);
            refl.push(if n.is_some() {
                sample_albedo(x as f64, y as f64)
            } else {
                [0.0; 3]
            });
            normals.push(n);
        }
    }
    let mask = PixelMask::new(width, height, normals.iter().map(Option::is_some).collect())?;

    let mut images = Vec::with_capacity(dirs.len());
    let mut shading = Vec::with_capacity(dirs.len());
    for s in &dirs {
        let lambda: Vec<f64> = normals
            .iter()
            .map(|n| n.map_or(0.0, |n| vec3::dot(n, *s).max(0.0)))
            .collect();
        let data = refl
            .iter()
            .zip(&lambda)
            .map(|(r, l)| vec3::scale(*r, *l))
            .collect();
        images.push(LinearImage::new(width, height, data)?);
        shading.push(lambda);
    }
    let stack = DirectionalStack {
        object: object.to_string(),
        images,
        mask,
        flash_index,
        shading: Some(shading),
    };
    stack.validate()?;
    Ok((stack, LinearImage::new(width, height, refl)?))
}

/// The ten light directions of procedural stacks: nine around the object at
/// 35-60 degrees from the view axis and one roughly frontal (index 5).
pub fn procedural_directions() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(PROCEDURAL_DIRECTIONS);
    let mut j = 0;
    for k in 0..PROCEDURAL_DIRECTIONS {
        if k == PROCEDURAL_FLASH_INDEX {
            out.push(vec3::normalize([0.05, -0.04, 1.0]).expect("non-zero"));
            continue;
        }
        let azimuth = 2.0 * PI * j as f64 / 9.0 + 0.3;
        let polar = (35.0 + 12.5 * (j % 3) as f64).to_radians();
        out.push([
            polar.sin() * azimuth.cos(),
            polar.sin() * azimuth.sin(),
            polar.cos(),
        ]);
        j += 1;
    }
    out
}

fn procedural_object(
    index: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> (Geometry, AlbedoLayout) {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    let (w, h) = (width as f64, height as f64);
    let size = w.min(h);
    let geometry = match index % 3 {
        0 => Geometry::Spheres(vec![Sphere {
            center: [
                w / 2.0 + rng.random_range(-0.05..0.05) * w,
                h / 2.0 + rng.random_range(-0.05..0.05) * h,
            ],
            radius: size * rng.random_range(0.38..0.46),
        }]),
        1 => {
            let count = rng.random_range(2..=3);
            Geometry::Spheres(
                (0..count)
                    .map(|_| Sphere {
                        center: [
                            rng.random_range(0.3..0.7) * w,
                            rng.random_range(0.3..0.7) * h,
                        ],
                        radius: size * rng.random_range(0.2..0.3),
                    })
                    .collect(),
            )
        }
        _ => {
            let count = rng.random_range(3..=6);
            Geometry::HeightField(
                (0..count)
                    .map(|_| Bump {
                        center: [
                            rng.random_range(0.1..0.9) * w,
                            rng.random_range(0.1..0.9) * h,
                        ],
                        width: size * rng.random_range(0.08..0.2),
                        height: size * rng.random_range(0.05..0.25),
                    })
                    .collect(),
            )
        }
    };
    let patches = (0..rng.random_range(1..=3))
        .map(|_| {
            // Saturated: one channel clearly dominant.
            let mut color = [0, 1, 2].map(|_| rng.random_range(0.08..0.3));
            color[rng.random_range(0..3)] = rng.random_range(0.5..0.7);
            Patch {
                center: [
                    rng.random_range(0.25..0.75) * w,
                    rng.random_range(0.25..0.75) * h,
                ],
                radius: size * rng.random_range(0.06..0.14),
                color,
            }
        })
        .collect();
    let albedo = AlbedoLayout {
        gray_level: rng.random_range(0.35..0.7),
        texture_amplitude: 0.35,
        texture_seed: rng.random(),
        patches,
    };
    (geometry, albedo)
}

/// A gray-dominant procedural object rendered from the ten standard directions.
pub fn procedural_stack(
    index: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<DirectionalStack> {
    let (geometry, albedo) = procedural_object(index, seed, width, height);
    let (stack, _) = render_stack(
        &format!("proc{index:02}"),
        &geometry,
        &albedo,
        &procedural_directions(),
        PROCEDURAL_FLASH_INDEX,
        width,
        height,
    )?;
    Ok(stack)
}

pub fn procedural_stacks(
    count: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<Vec<DirectionalStack>> {
    (0..count)
        .map(|i| procedural_stack(i, seed, width, height))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white() -> [f64; 3] {
        [1.0; 3]
    }

    fn spec(geometry: Geometry, albedo: AlbedoLayout, dirs: &[[f64; 3]]) -> SceneSpec {
        SceneSpec {
            geometry,
            albedo,
            lights: dirs
                .iter()
                .map(|&d| Light {
                    direction: d,
                    chroma: white(),
                })
                .collect(),
            flash: Light {
                direction: [0.0, 0.0, 1.0],
                chroma: white(),
            },
        }
    }

    #[test]
    fn tilted_plane_is_flat_shaded() {
        let n = vec3::normalize([0.2, -0.1, 1.0]).unwrap();
        let s = vec3::normalize([0.5, 0.3, 0.8]).unwrap();
        let sc = render_procedural(
            &spec(
                Geometry::Plane { normal: n },
                AlbedoLayout::uniform_gray(0.5),
                &[s],
            ),
            6,
            5,
        )
        .unwrap();
        let want = 0.5 * vec3::dot(n, s).max(0.0);
        for p in sc.stack.images[0].pixels() {
            assert!(p.iter().all(|v| (v - want).abs() < 1e-15));
        }
    }

    #[test]
    fn sphere_follows_cosine_of_polar_angle() {
        let r = 20.0;
        let sc = render_procedural(
            &spec(
                Geometry::Spheres(vec![Sphere {
                    center: [25.0, 25.0],
                    radius: r,
                }]),
                AlbedoLayout::uniform_gray(0.8),
                &[[0.0, 0.0, 1.0]],
            ),
            51,
            51,
        )
        .unwrap();
        // Analytic: a point at image offset (dx, dy) has polar angle asin(rho).
        for (x, y) in [(25, 25), (35, 25), (25, 12), (40, 36), (30, 30)] {
            let rho = ((x as f64 - 25.0).hypot(y as f64 - 25.0)) / r;
            let want = 0.8 * rho.asin().cos();
            let got = sc.stack.images[0].pixel(x, y)[1];
            assert!((got - want).abs() < 1e-12, "({x},{y}): {got} vs {want}");
        }
        assert!(!sc.stack.mask.get(0, 0));
        assert_eq!(sc.stack.images[0].pixel(0, 0), [0.0; 3]);
    }

    #[test]
    fn light_behind_surface_contributes_nothing() {
        let sc = render_procedural(
            &spec(
                Geometry::Plane {
                    normal: [0.0, 0.0, 1.0],
                },
                AlbedoLayout::uniform_gray(0.5),
                &[[0.0, 0.6, -0.8]],
            ),
            4,
            4,
        )
        .unwrap();
        assert!(sc.stack.images[0].pixels().iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let bad = [
            Geometry::Plane { normal: [0.0; 3] },
            Geometry::Spheres(vec![Sphere {
                center: [1.0, 1.0],
                radius: 0.0,
            }]),
            Geometry::HeightField(vec![Bump {
                center: [0.0, 0.0],
                width: -1.0,
                height: 1.0,
            }]),
        ];
        for g in bad {
            let s = spec(g, AlbedoLayout::uniform_gray(0.5), &[[0.0, 0.0, 1.0]]);
            assert!(render_procedural(&s, 4, 4).is_err());
        }
    }

    #[test]
    fn height_field_normals_are_unit_and_face_the_viewer() {
        let g = Geometry::HeightField(vec![Bump {
            center: [10.0, 10.0],
            width: 4.0,
            height: 6.0,
        }]);
        for (x, y) in [(10.0, 10.0), (12.0, 9.0), (3.0, 17.0)] {
            let n = g.normal_at(x, y).unwrap();
            assert!((vec3::norm(n) - 1.0).abs() < 1e-12 && n[2] > 0.0);
        }
        assert_eq!(g.normal_at(10.0, 10.0).unwrap(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn procedural_stacks_are_deterministic_and_bounded() {
        let a = procedural_stack(4, 9, 40, 32).unwrap();
        let b = procedural_stack(4, 9, 40, 32).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.images.len(), PROCEDURAL_DIRECTIONS);
        assert_eq!(a.flash_index, PROCEDURAL_FLASH_INDEX);
        for im in &a.images {
            assert!(im.max_value() <= 1.0);
        }
        let dirs = procedural_directions();
        assert!(dirs[PROCEDURAL_FLASH_INDEX][2] > 0.99);
    }
}
