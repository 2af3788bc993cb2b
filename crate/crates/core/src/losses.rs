//! Reference implementations of the reconstruction losses used to train the
//! glare-correction autoencoders: the box-weighted squared error and
//! smooth-L1. Pure numerics, no autodiff.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Weight for pixels inside a ground-truth box.
pub const INSIDE_WEIGHT: f64 = 1.0 / 0.01;
/// Weight for background pixels.
pub const OUTSIDE_WEIGHT: f64 = 1.0 / 0.99;

pub const DEFAULT_BETA: f64 = 1.0;

/// Per-pixel loss weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PenaltyMatrix {
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, k: f64) -> PenaltyMatrix {
        PenaltyMatrix {
            values: self.values.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> PenaltyMatrix {
        PenaltyMatrix {
            width,
            height,
            values: vec![value; width * height],
        }
    }
}

/// 100 where the pixel centre lies in any box, 1/0.99 elsewhere.
pub fn penalty_matrix(width: usize, height: usize, boxes: &[BBox]) -> PenaltyMatrix {
    let mut values = vec![OUTSIDE_WEIGHT; width * height];
    for b in boxes {
        let (xs, xe) = crate::image::pixel_span(b.x_min(), b.x_max(), width);
        let (ys, ye) = crate::image::pixel_span(b.y_min(), b.y_max(), height);
        for y in ys..ye {
            values[y * width + xs..y * width + xe].fill(INSIDE_WEIGHT);
        }
    }
    PenaltyMatrix { width, height, values }
}

/// `sum (pred - target)^2 * P` over every pixel. `pred` and `target` may hold a
/// batch of several images back to back; `P` is applied to each.
pub fn masked_mse_loss(pred: &[f64], target: &[f64], p: &PenaltyMatrix) -> Result<f64> {
    let plane = p.values.len();
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    if plane == 0 || !pred.len().is_multiple_of(plane) {
        return Err(Error::ShapeMismatch(format!(
            "length {} is not a multiple of the {}x{} penalty matrix",
            pred.len(),
            p.width,
            p.height
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .enumerate()
        .map(|(i, (a, b))| (a - b) * (a - b) * p.values[i % plane])
        .sum())
}

/// `0.5 x^2 / beta` for `|x| < beta`, otherwise `|x| - 0.5 beta`.
pub fn smooth_l1(x: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParam(format!("smooth-L1 beta {beta} must be positive")));
    }
    let a = x.abs();
    Ok(if a < beta { 0.5 * x * x / beta } else { a - 0.5 * beta })
}

/// Mean smooth-L1 over paired pixel values.
pub fn smooth_l1_loss(pred: &[f64], target: &[f64], beta: f64) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (a, b) in pred.iter().zip(target) {
        total += smooth_l1(a - b, beta)?;
    }
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn penalty_examples() {
        let none = penalty_matrix(3, 2, &[]);
        assert!(none.values().iter().all(|&v| v == 1.0 / 0.99));
        let whole = penalty_matrix(3, 2, &[BBox::ground_truth(0., 0., 3., 2., 0).unwrap()]);
        assert!(whole.values().iter().all(|&v| v == 100.0));
        let corner = penalty_matrix(4, 4, &[BBox::ground_truth(0., 0., 2., 2., 0).unwrap()]);
        assert_eq!(corner.values().iter().filter(|&&v| v == 100.0).count(), 4);
        assert_eq!(corner.values().iter().filter(|&&v| v == 1.0 / 0.99).count(), 12);
        assert_eq!(corner.values()[0], 100.0);
        assert_eq!(corner.values()[5], 100.0);
        assert_eq!(corner.values()[2], 1.0 / 0.99);
    }

    #[test]
    fn masked_mse_examples() {
        let p = penalty_matrix(2, 2, &[BBox::ground_truth(0., 0., 1., 1., 0).unwrap()]);
        let t = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(masked_mse_loss(&t, &t, &p).unwrap(), 0.0);
        let pred = [0.6, 0.5, 0.5, 0.5];
        let l = masked_mse_loss(&pred, &t, &p).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let l2 = masked_mse_loss(&pred, &t, &p.scaled(2.0)).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);
        // batch of two sums both images
        let bp = [0.6, 0.5, 0.5, 0.5, 0.6, 0.5, 0.5, 0.5];
        let bt = [0.5; 8];
        assert!((masked_mse_loss(&bp, &bt, &p).unwrap() - 2.0).abs() < 1e-12);
        assert!(masked_mse_loss(&[0.0; 3], &[0.0; 3], &p).is_err());
        assert!(masked_mse_loss(&[0.0; 4], &[0.0; 8], &p).is_err());
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(smooth_l1(0.7, 0.7).unwrap(), 0.35);
        assert_eq!(smooth_l1(2.0, 1.0).unwrap(), 1.5);
        assert!(smooth_l1(1.0, 0.0).is_err());
        assert!(smooth_l1(1.0, -1.0).is_err());
        assert_eq!(smooth_l1_loss(&[2.0, 0.0], &[0.0, 0.0], 1.0).unwrap(), 0.75);
    }

    proptest! {
        #[test]
        fn smooth_l1_even(x in -10.0..10.0f64, beta in 0.01..5.0f64) {
            prop_assert_eq!(smooth_l1(x, beta).unwrap(), smooth_l1(-x, beta).unwrap());
        }

        #[test]
        fn masked_mse_nonnegative_and_zero_iff_equal(
            a in proptest::collection::vec(-1.0..1.0f64, 9),
            b in proptest::collection::vec(-1.0..1.0f64, 9),
        ) {
            let p = penalty_matrix(3, 3, &[BBox::ground_truth(0.0, 0.0, 1.5, 2.5, 0).unwrap()]);
            let l = masked_mse_loss(&a, &b, &p).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, a == b);
            let plain: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            let ones = PenaltyMatrix::uniform(3, 3, 1.0);
            prop_assert!((masked_mse_loss(&a, &b, &ones).unwrap() - plain).abs() <= 1e-12);
        }
    }
}
