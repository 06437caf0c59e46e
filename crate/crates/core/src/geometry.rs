//! Spatial and spatio-temporal overlap.

use crate::error::{Error, Result};
use crate::model::BBox;

/// Intersection over union of two boxes; 0 when the union has zero area.
#[inline]
pub fn iou_2d(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x2().min(b.x2()) - a.x1().max(b.x1());
    let ih = a.y2().min(b.y2()) - a.y1().max(b.y1());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

/// Mean per-frame IoU over the temporal union of two frame-sorted tubes.
///
/// Frames covered by only one of the tubes count as zero overlap.
pub fn tube_iou(pred: &[(u32, BBox)], gt: &[(u32, BBox)]) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::validation("tube IoU of an empty tube"));
    }
    Ok(tube_iou_unchecked(pred, gt))
}

pub(crate) fn tube_iou_unchecked(pred: &[(u32, BBox)], gt: &[(u32, BBox)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut union_frames = 0usize;
    let mut sum = 0.0;
    while i < pred.len() || j < gt.len() {
        union_frames += 1;
        match (pred.get(i), gt.get(j)) {
            (Some(p), Some(g)) if p.0 == g.0 => {
                sum += iou_2d(&p.1, &g.1);
                i += 1;
                j += 1;
            }
            (Some(p), Some(g)) if p.0 < g.0 => i += 1,
            (Some(_), None) => i += 1,
            _ => j += 1,
        }
    }
    if union_frames == 0 {
        0.0
    } else {
        sum / union_frames as f64
    }
}

/// Tube IoU for two tubes that both start at frame 1 with one box per frame.
pub(crate) fn aligned_tube_iou(a: &[BBox], b: &[BBox]) -> f64 {
    let union_frames = a.len().max(b.len());
    if union_frames == 0 {
        return 0.0;
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| iou_2d(x, y)).sum();
    sum / union_frames as f64
}
