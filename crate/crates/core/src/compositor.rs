//! Hard mask compositing, layered bottom to top.
//!
//! A job folds its layers in order over the background; within a layer each
//! selected instance copies source pixels wherever its mask is set. Later
//! layers overwrite earlier ones, so the last input ends up on top.

use thiserror::Error;

use crate::annotations::BitMask;
use crate::raster::PixelBuffer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{what} is {}x{}, expected {}x{}", actual.0, actual.1, expected.0, expected.1)]
pub struct DimensionMismatch {
    pub what: String,
    pub expected: (u32, u32),
    pub actual: (u32, u32),
}

fn check_dims(what: impl FnOnce() -> String, expected: (u32, u32), actual: (u32, u32)) -> Result<(), DimensionMismatch> {
    if expected == actual {
        Ok(())
    } else {
        Err(DimensionMismatch {
            what: what(),
            expected,
            actual,
        })
    }
}

fn mask_dims(m: &BitMask) -> (u32, u32) {
    (m.width(), m.height())
}

/// One selected instance, its mask already at canvas size.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedInstance {
    pub instance_id: u64,
    pub area: u64,
    pub mask: BitMask,
}

/// An input image with the instances chosen from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayer {
    image: PixelBuffer,
    instances: Vec<PlacedInstance>,
}

impl SceneLayer {
    pub fn new(image: PixelBuffer, instances: Vec<PlacedInstance>) -> Result<Self, DimensionMismatch> {
        for inst in &instances {
            check_dims(
                || format!("mask of instance {}", inst.instance_id),
                image.dimensions(),
                mask_dims(&inst.mask),
            )?;
        }
        Ok(Self { image, instances })
    }

    pub fn image(&self) -> &PixelBuffer {
        &self.image
    }

    pub fn instances(&self) -> &[PlacedInstance] {
        &self.instances
    }
}

/// Background plus layers, first layer at the bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeJob {
    background: PixelBuffer,
    layers: Vec<SceneLayer>,
}

impl CompositeJob {
    pub fn new(background: PixelBuffer, layers: Vec<SceneLayer>) -> Result<Self, DimensionMismatch> {
        for (i, layer) in layers.iter().enumerate() {
            check_dims(
                || format!("layer {i}"),
                background.dimensions(),
                layer.image.dimensions(),
            )?;
        }
        Ok(Self { background, layers })
    }

    pub fn background(&self) -> &PixelBuffer {
        &self.background
    }

    pub fn layers(&self) -> &[SceneLayer] {
        &self.layers
    }

    pub fn canvas_size(&self) -> (u32, u32) {
        self.background.dimensions()
    }
}

/// Returns a copy of `canvas` with `source` pixels wherever `mask` is set.
pub fn apply_instance(
    canvas: &PixelBuffer,
    source: &PixelBuffer,
    mask: &BitMask,
) -> Result<PixelBuffer, DimensionMismatch> {
    let mut out = canvas.clone();
    apply_instance_in_place(&mut out, source, mask)?;
    Ok(out)
}

pub fn apply_instance_in_place(
    canvas: &mut PixelBuffer,
    source: &PixelBuffer,
    mask: &BitMask,
) -> Result<(), DimensionMismatch> {
    check_dims(|| "source".into(), canvas.dimensions(), source.dimensions())?;
    check_dims(|| "mask".into(), canvas.dimensions(), mask_dims(mask))?;
    copy_masked(canvas.as_raw_mut(), source.as_raw(), mask.as_slice());
    Ok(())
}

fn copy_masked(dst: &mut [u8], src: &[u8], mask: &[bool]) {
    debug_assert_eq!(dst.len(), mask.len() * 3);
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        // copy whole runs of set bits at once
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        dst[start * 3..i * 3].copy_from_slice(&src[start * 3..i * 3]);
    }
}

pub fn composite(job: &CompositeJob) -> PixelBuffer {
    let mut canvas = job.background.clone();
    for layer in &job.layers {
        for inst in &layer.instances {
            copy_masked(canvas.as_raw_mut(), layer.image.as_raw(), inst.mask.as_slice());
        }
    }
    canvas
}
