//! Angular-error evaluation and the benchmark harness.
//!
//! Every image is scored by the mean and median per-pixel angular error
//! between estimated and ground-truth illumination over the foreground.
//! Cells of the results table aggregate per-image means by light count `N`:
//! the median and the mean of those values. The `all` column pools every
//! per-image value across `N`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flashgp::{
    estimate, estimate_global, estimate_without_flash, EstimatorConfig, FlashPair, IlluminationMap,
};
use crate::grayness::GraynessMethod;
use crate::imgcore::{ensure_same_size, MaskedImage, PixelMask, ScalarMap};
use crate::scenesynth::{load_manifest, SampleTriplet};
use crate::vec3;

/// Angle between two chroma vectors in degrees.
pub fn angular_error(a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    let (na, nb) = (vec3::norm(a), vec3::norm(b));
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::ZeroVector);
    }
    let cos = (vec3::dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Per-pixel errors with their summary statistics.
#[derive(Debug, Clone)]
pub struct ErrorMap {
    pub map: ScalarMap,
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

/// Errors over pixels valid in both maps.
pub fn error_map(est: &IlluminationMap, gt: &IlluminationMap) -> Result<ErrorMap> {
    error_map_masked(est, gt, None)
}

/// Like [`error_map`], additionally restricted to `mask`.
pub fn error_map_masked(
    est: &IlluminationMap,
    gt: &IlluminationMap,
    mask: Option<&PixelMask>,
) -> Result<ErrorMap> {
    ensure_same_size(est, gt, "estimate vs ground truth")?;
    if let Some(m) = mask {
        ensure_same_size(est, m, "estimate vs mask")?;
    }
    let n = est.vectors().len();
    let mut data = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    let mut errors = Vec::new();
    for i in 0..n {
        if mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        let (Some(a), Some(b)) = (est.at(i), gt.at(i)) else {
            continue;
        };
        let e = angular_error(a, b)?;
        data[i] = e;
        valid[i] = true;
        errors.push(e);
    }
    if errors.is_empty() {
        return Err(Error::EmptyValidRegion);
    }
    let (mean, median) = mean_median(&mut errors);
    Ok(ErrorMap {
        map: ScalarMap::new(est.width(), est.height(), data, valid)?,
        mean,
        median,
        count: errors.len(),
    })
}

/// Mean and lower-middle median; sorts `values`.
fn mean_median(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let median = values[(values.len() - 1) / 2];
    (mean, median)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Gray pixels on the no-flash image, spatially interpolated.
    NoFlash,
    /// Flash gray pixels.
    Flash,
    /// One global illuminant from the no-flash image.
    Global,
}

/// A method family run in one mode, e.g. `GP+f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variant {
    pub method: GraynessMethod,
    pub mode: Mode,
}

impl Variant {
    /// GP, GP+f, MSGP, MSGP+f, DGP, DGP+f.
    pub fn table() -> Vec<Variant> {
        GraynessMethod::ALL
            .iter()
            .flat_map(|&method| [Mode::NoFlash, Mode::Flash].map(|mode| Variant { method, mode }))
            .collect()
    }

    /// The table variants followed by the global baselines.
    pub fn all() -> Vec<Variant> {
        let mut v = Self::table();
        v.extend(GraynessMethod::ALL.map(|method| Variant {
            method,
            mode: Mode::Global,
        }));
        v
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::NoFlash => write!(f, "{}", self.method),
            Mode::Flash => write!(f, "{}+f", self.method),
            Mode::Global => write!(f, "{}-global", self.method),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, mode) = if let Some(m) = lower.strip_suffix("+f") {
            (m, Mode::Flash)
        } else if let Some(m) = lower.strip_suffix("-global") {
            (m, Mode::Global)
        } else {
            (lower.as_str(), Mode::NoFlash)
        };
        Ok(Variant {
            method: name.parse()?,
            mode,
        })
    }
}

/// Scores one variant on one triplet.
pub fn evaluate(
    triplet: &SampleTriplet,
    variant: Variant,
    cfg: &EstimatorConfig,
) -> Result<ErrorMap> {
    let cfg = EstimatorConfig {
        method: variant.method,
        ..*cfg
    };
    let ambient = MaskedImage::new(triplet.ambient.clone(), triplet.mask.clone())?;
    let est = match variant.mode {
        Mode::Flash => {
            let pair = FlashPair::new_lenient(
                triplet.ambient.clone(),
                triplet.flash.clone(),
                Some(triplet.mask.clone()),
            )?;
            estimate(&pair, &cfg)?.illumination
        }
        Mode::NoFlash => estimate_without_flash(&ambient, &cfg)?.illumination,
        Mode::Global => {
            let l = estimate_global(&ambient, &cfg)?;
            IlluminationMap::uniform(ambient.image.width(), ambient.image.height(), l)?
        }
    };
    error_map_masked(&est, &triplet.gt, Some(&triplet.mask))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub variants: Vec<Variant>,
    /// Base estimator settings; the cluster count is replaced by `N` when
    /// `clusters_from_n` is set.
    pub estimator: EstimatorConfig,
    pub clusters_from_n: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            variants: Variant::all(),
            estimator: EstimatorConfig::default(),
            clusters_from_n: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub object: String,
    pub n: usize,
    pub variant: String,
    pub mean: f64,
    pub median: f64,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub object: String,
    pub n: usize,
    pub variant: String,
    pub cause: String,
}

/// Median and mean of per-image mean errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub images: usize,
    pub median: f64,
    pub mean: f64,
}

impl Cell {
    fn from_values(values: &[f64]) -> Option<Cell> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        let (mean, median) = mean_median(&mut v);
        Some(Cell {
            images: values.len(),
            median,
            mean,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub variant: String,
    /// `(N, cell)` in ascending `N`.
    pub by_n: Vec<(usize, Cell)>,
    pub all: Option<Cell>,
}

/// Relative reduction of the pooled error by the flash variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub method: GraynessMethod,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub triplets: usize,
    pub config: BenchConfig,
    pub rows: Vec<Row>,
    pub improvements: Vec<Improvement>,
    pub images: Vec<ImageResult>,
    pub failures: Vec<Failure>,
}

impl BenchReport {
    pub fn row(&self, variant: Variant) -> Option<&Row> {
        let name = variant.to_string();
        self.rows.iter().find(|r| r.variant == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table; each cell shows `median / mean` in degrees.
    pub fn to_text(&self) -> String {
        let ns: Vec<usize> = {
            let mut v: Vec<usize> = self.images.iter().map(|r| r.n).collect();
            v.extend(self.failures.iter().map(|f| f.n));
            v.sort_unstable();
            v.dedup();
            v
        };
        let mut out = String::new();
        let _ = write!(out, "{:<12}", "Method/N");
        for n in &ns {
            let _ = write!(out, " {:>15}", n);
        }
        let _ = writeln!(out, " {:>15}", "all");
        let fmt_cell = |c: Option<&Cell>| match c {
            Some(c) => format!("{:.2} / {:.2}", c.median, c.mean),
            None => "-".to_string(),
        };
        for row in &self.rows {
            let _ = write!(out, "{:<12}", row.variant);
            for n in &ns {
                let cell = row.by_n.iter().find(|(k, _)| k == n).map(|(_, c)| c);
                let _ = write!(out, " {:>15}", fmt_cell(cell));
            }
            let _ = writeln!(out, " {:>15}", fmt_cell(row.all.as_ref()));
        }
        if !self.improvements.is_empty() {
            let _ = writeln!(
                out,
                "\nflash improvement over the whole dataset (median / mean):"
            );
            for imp in &self.improvements {
                let _ = writeln!(
                    out,
                    "  {:<6} {:>6.1}% / {:>6.1}%",
                    imp.method.name(),
                    100.0 * imp.median,
                    100.0 * imp.mean
                );
            }
        }
        let _ = writeln!(
            out,
            "\n{} triplets, {} image results, {} failures",
            self.triplets,
            self.images.len(),
            self.failures.len()
        );
        for f in &self.failures {
            let _ = writeln!(
                out,
                "  failed: {} N={} {}: {}",
                f.object, f.n, f.variant, f.cause
            );
        }
        out
    }

    pub fn per_image_csv(&self) -> String {
        let mut out = String::from("object,n,variant,mean,median,pixels\n");
        for r in &self.images {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.object, r.n, r.variant, r.mean, r.median, r.pixels
            );
        }
        out
    }
}

/// Runs every configured variant on every triplet of a manifest.
pub fn run_benchmark(manifest: impl AsRef<Path>, cfg: &BenchConfig) -> Result<BenchReport> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or(Path::new("."));
    let records = load_manifest(manifest)?;
    let triplets = records
        .par_iter()
        .map(|r| r.load(base))
        .collect::<Result<Vec<_>>>()?;
    run_benchmark_on(&triplets, cfg)
}

/// Runs every configured variant on in-memory triplets.
pub fn run_benchmark_on(triplets: &[SampleTriplet], cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.estimator.validate()?;
    if cfg.variants.is_empty() {
        return Err(Error::InvalidParameter("no variants to benchmark".into()));
    }
    let jobs: Vec<(usize, Variant)> = (0..triplets.len())
        .flat_map(|t| cfg.variants.iter().map(move |&v| (t, v)))
        .collect();
    let outcomes: Vec<(usize, Variant, Result<ErrorMap>)> = jobs
        .par_iter()
        .map(|&(t, v)| {
            let trip = &triplets[t];
            let est_cfg = EstimatorConfig {
                clusters: if cfg.clusters_from_n {
                    trip.meta.n.max(1)
                } else {
                    cfg.estimator.clusters
                },
                ..cfg.estimator
            };
            (t, v, evaluate(trip, v, &est_cfg))
        })
        .collect();

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (t, v, res) in outcomes {
        let meta = &triplets[t].meta;
        match res {
            Ok(e) => images.push(ImageResult {
                object: meta.object.clone(),
                n: meta.n,
                variant: v.to_string(),
                mean: e.mean,
                median: e.median,
                pixels: e.count,
            }),
            Err(err) => {
                log::warn!("{} N={} {v}: {err}", meta.object, meta.n);
                failures.push(Failure {
                    object: meta.object.clone(),
                    n: meta.n,
                    variant: v.to_string(),
                    cause: err.to_string(),
                });
            }
        }
    }

    let rows: Vec<Row> = cfg
        .variants
        .iter()
        .map(|v| {
            let name = v.to_string();
            let mine: Vec<&ImageResult> = images.iter().filter(|r| r.variant == name).collect();
            let mut ns: Vec<usize> = mine.iter().map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            let by_n = ns
                .iter()
                .filter_map(|&n| {
                    let vals: Vec<f64> = mine.iter().filter(|r| r.n == n).map(|r| r.mean).collect();
                    Cell::from_values(&vals).map(|c| (n, c))
                })
                .collect();
            let all: Vec<f64> = mine.iter().map(|r| r.mean).collect();
            Row {
                variant: name,
                by_n,
                all: Cell::from_values(&all),
            }
        })
        .collect();

    let improvements = GraynessMethod::ALL
        .iter()
        .filter_map(|&method| {
            let find = |mode| {
                let name = Variant { method, mode }.to_string();
                rows.iter()
                    .find(|r| r.variant == name)
                    .and_then(|r| r.all.clone())
            };
            let (base, flash) = (find(Mode::NoFlash)?, find(Mode::Flash)?);
            Some(Improvement {
                method,
                median: 1.0 - flash.median / base.median,
                mean: 1.0 - flash.mean / base.mean,
            })
        })
        .collect();

    Ok(BenchReport {
        triplets: triplets.len(),
        config: cfg.clone(),
        rows,
        improvements,
        images,
        failures,
    })
}
