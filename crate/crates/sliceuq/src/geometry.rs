//! Resampling, variable-input cropping with random margins, axial flips,
//! and the inverse mapping back to the original grid.
//!
//! Margin draws use ChaCha8 seeded from `SamplerConfig::seed`; per margin
//! set the stream is consumed in the fixed order z-, z+, y-, y+, x-, x+,
//! so crop specs reproduce across platforms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Interpolation mode: trilinear for images/probabilities, nearest for labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interp {
    Trilinear,
    Nearest,
}

/// Inclusive voxel-index box, (z, y, x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: (usize, usize, usize),
    pub hi: (usize, usize, usize),
}

impl BoundingBox {
    pub fn extents(&self) -> (usize, usize, usize) {
        (
            self.hi.0 - self.lo.0 + 1,
            self.hi.1 - self.lo.1 + 1,
            self.hi.2 - self.lo.2 + 1,
        )
    }

    pub fn is_valid_for(&self, dims: (usize, usize, usize)) -> bool {
        self.lo.0 <= self.hi.0
            && self.lo.1 <= self.hi.1
            && self.lo.2 <= self.hi.2
            && self.hi.0 < dims.0
            && self.hi.1 < dims.1
            && self.hi.2 < dims.2
    }
}

/// A reproducible record of one variable-input crop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub source_dims: (usize, usize, usize),
    pub box_: BoundingBox,
    /// (z-, z+, y-, y+, x-, x+) margins drawn for this set, before clamping.
    pub margins: [usize; 6],
    pub axial_flip: bool,
    pub target_dims: (usize, usize, usize),
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_margin_sets: usize,
    pub max_margin: (usize, usize, usize),
    pub with_flip: bool,
    pub target_dims: (usize, usize, usize),
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_margin_sets: 10,
            max_margin: (2, 16, 16),
            with_flip: true,
            target_dims: (16, 120, 120),
            seed: 0,
        }
    }
}

fn out_dim(old_dim: usize, old_sp: f64, new_sp: f64) -> usize {
    ((old_dim as f64 * old_sp / new_sp).round() as usize).max(1)
}

/// Sample `v` on a `target_dims` grid where output voxel centers map to
/// source continuous index `(i + 0.5) * scale - 0.5`, edge-clamped.
fn sample_grid(
    v: &Volume,
    target_dims: (usize, usize, usize),
    scale: (f64, f64, f64),
    new_spacing: (f64, f64, f64),
    mode: Interp,
) -> Volume {
    let (nz, ny, nx) = v.dims;
    let (tz, ty, tx) = target_dims;
    let mut out = Volume::zeros(target_dims, new_spacing, v.element_kind);
    out.origin = v.origin;

    let src_coord = |i: usize, s: f64| (i as f64 + 0.5) * s - 0.5;
    let clampi = |c: f64, n: usize| (c.max(0.0) as usize).min(n - 1);

    for z in 0..tz {
        let cz = src_coord(z, scale.0);
        for y in 0..ty {
            let cy = src_coord(y, scale.1);
            for x in 0..tx {
                let cx = src_coord(x, scale.2);
                let val = match mode {
                    Interp::Nearest => {
                        let iz = clampi((cz + 0.5).floor(), nz);
                        let iy = clampi((cy + 0.5).floor(), ny);
                        let ix = clampi((cx + 0.5).floor(), nx);
                        v.get(iz, iy, ix)
                    }
                    Interp::Trilinear => {
                        let fz = cz.floor();
                        let fy = cy.floor();
                        let fx = cx.floor();
                        let (wz, wy, wx) = (cz - fz, cy - fy, cx - fx);
                        let z0 = clampi(fz, nz);
                        let z1 = clampi(fz + 1.0, nz);
                        let y0 = clampi(fy, ny);
                        let y1 = clampi(fy + 1.0, ny);
                        let x0 = clampi(fx, nx);
                        let x1 = clampi(fx + 1.0, nx);
                        let lerp = |a: f64, b: f64, w: f64| a * (1.0 - w) + b * w;
                        let c00 = lerp(v.get(z0, y0, x0) as f64, v.get(z0, y0, x1) as f64, wx);
                        let c01 = lerp(v.get(z0, y1, x0) as f64, v.get(z0, y1, x1) as f64, wx);
                        let c10 = lerp(v.get(z1, y0, x0) as f64, v.get(z1, y0, x1) as f64, wx);
                        let c11 = lerp(v.get(z1, y1, x0) as f64, v.get(z1, y1, x1) as f64, wx);
                        lerp(lerp(c00, c01, wy), lerp(c10, c11, wy), wz) as f32
                    }
                };
                out.set(z, y, x, val);
            }
        }
    }
    out
}

/// Resample onto a grid with `new_spacing` mm voxels.
pub fn resample(v: &Volume, new_spacing: (f64, f64, f64), mode: Interp) -> Result<Volume> {
    if new_spacing.0 <= 0.0 || new_spacing.1 <= 0.0 || new_spacing.2 <= 0.0 {
        return Err(Error::InvalidSpacing);
    }
    let dims = (
        out_dim(v.dims.0, v.spacing.0, new_spacing.0),
        out_dim(v.dims.1, v.spacing.1, new_spacing.1),
        out_dim(v.dims.2, v.spacing.2, new_spacing.2),
    );
    let scale = (
        new_spacing.0 / v.spacing.0,
        new_spacing.1 / v.spacing.1,
        new_spacing.2 / v.spacing.2,
    );
    Ok(sample_grid(v, dims, scale, new_spacing, mode))
}

/// Resample onto an exact target grid; output spacing scales to keep the
/// physical extent.
pub fn resize_to(v: &Volume, target_dims: (usize, usize, usize), mode: Interp) -> Result<Volume> {
    if target_dims.0 == 0 || target_dims.1 == 0 || target_dims.2 == 0 {
        return Err(Error::InvalidArgument("target_dims must be >= 1".into()));
    }
    let scale = (
        v.dims.0 as f64 / target_dims.0 as f64,
        v.dims.1 as f64 / target_dims.1 as f64,
        v.dims.2 as f64 / target_dims.2 as f64,
    );
    let new_spacing = (
        v.spacing.0 * scale.0,
        v.spacing.1 * scale.1,
        v.spacing.2 * scale.2,
    );
    Ok(sample_grid(v, target_dims, scale, new_spacing, mode))
}

/// Minimal axis-aligned box containing all foreground voxels.
pub fn tight_bbox(label: &Volume) -> Result<BoundingBox> {
    let (nz, ny, nx) = label.dims;
    let mut lo = (usize::MAX, usize::MAX, usize::MAX);
    let mut hi = (0usize, 0usize, 0usize);
    let mut found = false;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if label.get(z, y, x) != 0.0 {
                    found = true;
                    lo = (lo.0.min(z), lo.1.min(y), lo.2.min(x));
                    hi = (hi.0.max(z), hi.1.max(y), hi.2.max(x));
                }
            }
        }
    }
    if !found {
        return Err(Error::EmptyMask);
    }
    Ok(BoundingBox { lo, hi })
}

/// Draw `n_margin_sets` random margin sets around `box_`; each set yields
/// one spec, plus a flipped twin when `with_flip` is set.
pub fn sample_crops(
    box_: BoundingBox,
    source_dims: (usize, usize, usize),
    cfg: &SamplerConfig,
) -> Result<Vec<CropSpec>> {
    if !box_.is_valid_for(source_dims) {
        return Err(Error::InvalidArgument("bounding box outside source dims".into()));
    }
    if cfg.n_margin_sets == 0 {
        return Err(Error::InvalidArgument("n_margin_sets must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut specs = Vec::with_capacity(cfg.n_margin_sets * (1 + cfg.with_flip as usize));
    for _ in 0..cfg.n_margin_sets {
        let m = [
            rng.gen_range(0..=cfg.max_margin.0),
            rng.gen_range(0..=cfg.max_margin.0),
            rng.gen_range(0..=cfg.max_margin.1),
            rng.gen_range(0..=cfg.max_margin.1),
            rng.gen_range(0..=cfg.max_margin.2),
            rng.gen_range(0..=cfg.max_margin.2),
        ];
        let expanded = BoundingBox {
            lo: (
                box_.lo.0.saturating_sub(m[0]),
                box_.lo.1.saturating_sub(m[2]),
                box_.lo.2.saturating_sub(m[4]),
            ),
            hi: (
                (box_.hi.0 + m[1]).min(source_dims.0 - 1),
                (box_.hi.1 + m[3]).min(source_dims.1 - 1),
                (box_.hi.2 + m[5]).min(source_dims.2 - 1),
            ),
        };
        let base = CropSpec {
            source_dims,
            box_: expanded,
            margins: m,
            axial_flip: false,
            target_dims: cfg.target_dims,
            seed: cfg.seed,
        };
        if cfg.with_flip {
            let mut flipped = base.clone();
            flipped.axial_flip = true;
            specs.push(base);
            specs.push(flipped);
        } else {
            specs.push(base);
        }
    }
    Ok(specs)
}

/// Extract the spec's box, flip in-plane if requested, resize to target.
pub fn apply_crop(v: &Volume, spec: &CropSpec, mode: Interp) -> Result<Volume> {
    if v.dims != spec.source_dims {
        return Err(Error::DimsMismatch(format!(
            "volume dims {:?} != spec source dims {:?}",
            v.dims, spec.source_dims
        )));
    }
    let b = spec.box_;
    let (ez, ey, ex) = b.extents();
    let mut cropped = Volume::zeros((ez, ey, ex), v.spacing, v.element_kind);
    cropped.origin = (
        v.origin.0 + b.lo.0 as f64 * v.spacing.0,
        v.origin.1 + b.lo.1 as f64 * v.spacing.1,
        v.origin.2 + b.lo.2 as f64 * v.spacing.2,
    );
    for z in 0..ez {
        for y in 0..ey {
            for x in 0..ex {
                cropped.set(z, y, x, v.get(b.lo.0 + z, b.lo.1 + y, b.lo.2 + x));
            }
        }
    }
    let cropped = if spec.axial_flip { cropped.flip_x() } else { cropped };
    resize_to(&cropped, spec.target_dims, mode)
}

/// Map a crop-space probability map back onto the original grid; voxels
/// outside the crop box are 0.
pub fn uncrop_prob(p: &Volume, spec: &CropSpec) -> Result<Volume> {
    if p.dims != spec.target_dims {
        return Err(Error::DimsMismatch(format!(
            "probability dims {:?} != spec target dims {:?}",
            p.dims, spec.target_dims
        )));
    }
    let unflipped = if spec.axial_flip { p.flip_x() } else { p.clone() };
    let b = spec.box_;
    let back = resize_to(&unflipped, b.extents(), Interp::Trilinear)?;
    let mut out = Volume::zeros(spec.source_dims, back.spacing, p.element_kind);
    let (ez, ey, ex) = b.extents();
    for z in 0..ez {
        for y in 0..ey {
            for x in 0..ex {
                out.set(b.lo.0 + z, b.lo.1 + y, b.lo.2 + x, back.get(z, y, x));
            }
        }
    }
    Ok(out)
}
