//! Dataset assembly, manifests and the MIT-intrinsic directory loader.
//!
//! A dataset directory holds `manifest.jsonl` (one [`ManifestRecord`] per
//! line) and one sub-directory per triplet with `ambient.pfm`, `flash.pfm`,
//! `gt.pfm` and `mask.png`. Paths in the manifest are relative to it.
//!
//! MIT-intrinsic layout expected by [`load_mit_dataset`]:
//!
//! ```text
//! <root>/<object>/light01.png ... light10.png   16-bit linear RGB
//! <root>/<object>/mask.png                      foreground mask
//! ```

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compose_triplet, DirectionalStack, SampleTriplet, SynthConfig, TripletMeta};
use crate::error::{Error, Result};
use crate::flashgp::IlluminationMap;
use crate::imgcore::{
    load_image, load_mask_png, save_image, save_mask_png, ImageFormat, LinearImage,
};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Objects whose albedo is almost entirely chromatic; they are left out.
pub const CHROMATIC_OBJECTS: [&str; 5] = ["apple", "pear", "frog2", "potato", "turtle"];

const MIT_DIRECTIONS: usize = 10;
const MIT_FLASH_INDEX: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub object: String,
    pub n: usize,
    pub seed: u64,
    pub ambient: String,
    pub flash: String,
    pub gt: String,
    pub mask: String,
    pub directions: Vec<usize>,
    pub chromas: Vec<[f64; 3]>,
    pub flash_direction: usize,
    pub flash_chroma: [f64; 3],
}

impl ManifestRecord {
    /// Reads the triplet's files, resolving paths against `base`.
    pub fn load(&self, base: &Path) -> Result<SampleTriplet> {
        let ambient = load_image(base.join(&self.ambient), ImageFormat::Pfm)?;
        let flash = load_image(base.join(&self.flash), ImageFormat::Pfm)?;
        let gt_path = base.join(&self.gt);
        let mask = load_mask_png(base.join(&self.mask))?;
        let gt = IlluminationMap::load_pfm(&gt_path)?
            .restrict(&mask)
            .map_err(|e| Error::Manifest {
                path: gt_path.clone(),
                msg: e.to_string(),
            })?;
        if !ambient.same_size(&flash) || !ambient.same_size(&gt) {
            return Err(Error::Manifest {
                path: base.to_path_buf(),
                msg: format!(
                    "{} N={}: triplet images differ in size",
                    self.object, self.n
                ),
            });
        }
        Ok(SampleTriplet {
            ambient,
            flash,
            gt,
            mask,
            meta: TripletMeta {
                object: self.object.clone(),
                n: self.n,
                seed: self.seed,
                directions: self.directions.clone(),
                chromas: self.chromas.clone(),
                flash_direction: self.flash_direction,
                flash_chroma: self.flash_chroma,
            },
        })
    }
}

/// One triplet per `(stack, N)` in stack-major order.
pub fn build_dataset(
    stacks: &[DirectionalStack],
    n_range: RangeInclusive<usize>,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<SampleTriplet>> {
    if n_range.is_empty() || *n_range.start() == 0 {
        return Err(Error::InvalidParameter(format!(
            "light count range {n_range:?} is empty or starts at 0"
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..stacks.len())
        .flat_map(|s| n_range.clone().map(move |n| (s, n)))
        .collect();
    jobs.par_iter()
        .map(|&(s, n)| compose_triplet(&stacks[s], n, seed, cfg))
        .collect()
}

/// Writes triplet files and `manifest.jsonl` under `out_dir`; returns the
/// manifest path.
pub fn write_dataset(triplets: &[SampleTriplet], out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let records = triplets
        .par_iter()
        .map(|t| write_triplet(t, out_dir))
        .collect::<Result<Vec<_>>>()?;

    let path = out_dir.join(MANIFEST_FILE);
    let mut text = String::new();
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| Error::Manifest {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        text.push_str(&line);
        text.push('\n');
    }
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_triplet(t: &SampleTriplet, out_dir: &Path) -> Result<ManifestRecord> {
    let dir_name = format!("{}_n{}", t.meta.object, t.meta.n);
    let dir = out_dir.join(&dir_name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let rel = |f: &str| format!("{dir_name}/{f}");
    save_image(&t.ambient, dir.join("ambient.pfm"), ImageFormat::Pfm)?;
    save_image(&t.flash, dir.join("flash.pfm"), ImageFormat::Pfm)?;
    t.gt.save_pfm(dir.join("gt.pfm"))?;
    save_mask_png(&t.mask, dir.join("mask.png"))?;
    Ok(ManifestRecord {
        object: t.meta.object.clone(),
        n: t.meta.n,
        seed: t.meta.seed,
        ambient: rel("ambient.pfm"),
        flash: rel("flash.pfm"),
        gt: rel("gt.pfm"),
        mask: rel("mask.png"),
        directions: t.meta.directions.clone(),
        chromas: t.meta.chromas.clone(),
        flash_direction: t.meta.flash_direction,
        flash_chroma: t.meta.flash_chroma,
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Loads one MIT-intrinsic object directory.
pub fn load_mit_stack(dir: &Path) -> Result<DirectionalStack> {
    let object = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("object")
        .to_string();
    let images = (1..=MIT_DIRECTIONS)
        .map(|k| {
            let p = dir.join(format!("light{k:02}.png"));
            if !p.exists() {
                return Err(Error::Manifest {
                    path: p,
                    msg: format!("{object}: missing directional image"),
                });
            }
            load_image(&p, ImageFormat::Png16)
        })
        .collect::<Result<Vec<LinearImage>>>()?;
    let mask_path = dir.join("mask.png");
    let mask = if mask_path.exists() {
        load_mask_png(&mask_path)?
    } else {
        return Err(Error::Manifest {
            path: mask_path,
            msg: format!("{object}: missing mask"),
        });
    };
    let stack = DirectionalStack {
        object,
        images,
        mask,
        flash_index: MIT_FLASH_INDEX,
        shading: None,
    };
    stack.validate()?;
    Ok(stack)
}

/// Loads every object directory under `root` except [`CHROMATIC_OBJECTS`],
/// sorted by name.
pub fn load_mit_dataset(root: &Path) -> Result<Vec<DirectionalStack>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !CHROMATIC_OBJECTS.contains(&n))
        })
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_mit_stack(d)).collect()
}
