//! Upscaling from the fine grid to the coarse grid by plain block averaging.

use serde::{Deserialize, Serialize};

use crate::dct::{reconstruct, CoeffVector, SpatialField};
use crate::error::{Error, Result};

/// Coarse grid layered over a fine grid: each coarse cell covers a
/// `factor_r x factor_c` block of fine cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseGeometry {
    pub coarse_rows: usize,
    pub coarse_cols: usize,
    pub factor_r: usize,
    pub factor_c: usize,
}

impl CoarseGeometry {
    /// Geometry for a coarse grid over the given fine dims.
    pub fn over(fine: (usize, usize), coarse_rows: usize, coarse_cols: usize) -> Result<Self> {
        if coarse_rows == 0 || coarse_cols == 0 {
            return Err(Error::InvalidGeometry("coarse dims must be positive".into()));
        }
        if !fine.0.is_multiple_of(coarse_rows) || !fine.1.is_multiple_of(coarse_cols) {
            return Err(Error::InvalidGeometry(format!(
                "coarse grid {coarse_rows}x{coarse_cols} does not divide fine grid {}x{}",
                fine.0, fine.1
            )));
        }
        Ok(Self {
            coarse_rows,
            coarse_cols,
            factor_r: fine.0 / coarse_rows,
            factor_c: fine.1 / coarse_cols,
        })
    }

    pub fn fine_dims(&self) -> (usize, usize) {
        (self.coarse_rows * self.factor_r, self.coarse_cols * self.factor_c)
    }

    pub fn len(&self) -> usize {
        self.coarse_rows * self.coarse_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_fine(&self, dims: (usize, usize)) -> Result<()> {
        if self.factor_r == 0 || self.factor_c == 0 || self.fine_dims() != dims {
            return Err(Error::InvalidGeometry(format!(
                "coarse geometry {self:?} does not match fine grid {}x{}",
                dims.0, dims.1
            )));
        }
        Ok(())
    }

    /// Block averages of a row-major fine field of matching dims.
    pub(crate) fn average_values(&self, fine: &[f64]) -> Vec<f64> {
        let fine_cols = self.coarse_cols * self.factor_c;
        let scale = 1.0 / (self.factor_r * self.factor_c) as f64;
        let mut out = vec![0.0; self.len()];
        for (r, chunk) in fine.chunks_exact(fine_cols).enumerate() {
            let cr = r / self.factor_r;
            for (c, v) in chunk.iter().enumerate() {
                out[cr * self.coarse_cols + c / self.factor_c] += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

pub fn block_average(field: &SpatialField, factor_r: usize, factor_c: usize) -> Result<SpatialField> {
    if factor_r == 0
        || factor_c == 0
        || !field.rows().is_multiple_of(factor_r)
        || !field.cols().is_multiple_of(factor_c)
    {
        return Err(Error::InvalidGeometry(format!(
            "block {factor_r}x{factor_c} does not divide field {}x{}",
            field.rows(),
            field.cols()
        )));
    }
    let geom = CoarseGeometry {
        coarse_rows: field.rows() / factor_r,
        coarse_cols: field.cols() / factor_c,
        factor_r,
        factor_c,
    };
    SpatialField::new(geom.coarse_rows, geom.coarse_cols, geom.average_values(field.values()))
}

/// `L_c(theta)`: block average of the reconstructed field, row-major.
pub fn upscale_from_theta(theta: &CoeffVector, geometry: &CoarseGeometry) -> Result<Vec<f64>> {
    geometry.check_fine(theta.field_dims)?;
    let field = reconstruct(theta)?;
    Ok(geometry.average_values(field.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dct::CoeffSelection;

    #[test]
    fn small_block() {
        let f = SpatialField::new(2, 2, vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let c = block_average(&f, 2, 2).unwrap();
        assert_eq!(c.values(), &[2.0]);
    }

    #[test]
    fn unit_factor_is_identity() {
        let f = SpatialField::from_fn(3, 4, |r, c| (r * 7 + c) as f64 * 0.25).unwrap();
        assert_eq!(block_average(&f, 1, 1).unwrap(), f);
    }

    #[test]
    fn constant_field_stays_constant() {
        let f = SpatialField::new(6, 4, vec![2.5; 24]).unwrap();
        let c = block_average(&f, 3, 2).unwrap();
        assert_eq!(c.dims(), (2, 2));
        assert!(c.values().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn non_divisible_rejected() {
        let f = SpatialField::new(5, 4, vec![0.0; 20]).unwrap();
        assert!(matches!(block_average(&f, 2, 2), Err(Error::InvalidGeometry(_))));
        assert!(CoarseGeometry::over((5, 4), 2, 2).is_err());
    }

    #[test]
    fn upscale_zero_and_scaling() {
        let sel = CoeffSelection::Triangle(3);
        let geom = CoarseGeometry::over((8, 8), 4, 4).unwrap();
        let zero = CoeffVector::zeros(sel, (8, 8)).unwrap();
        assert!(upscale_from_theta(&zero, &geom)
            .unwrap()
            .iter()
            .all(|&v| v.abs() < 1e-15));
        let cv = CoeffVector::new(vec![1.0, -0.5, 0.25, 2.0, 0.1, -1.0], sel, (8, 8)).unwrap();
        let base = upscale_from_theta(&cv, &geom).unwrap();
        let scaled = upscale_from_theta(
            &cv.with_theta(cv.theta.iter().map(|t| 3.0 * t).collect()).unwrap(),
            &geom,
        )
        .unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn default_geometry_25_to_5() {
        let sel = CoeffSelection::Triangle(5);
        let cv = CoeffVector::new((0..15).map(|i| 1.0 / (1 + i) as f64).collect(), sel, (25, 25)).unwrap();
        let geom = CoarseGeometry::over((25, 25), 5, 5).unwrap();
        assert_eq!((geom.factor_r, geom.factor_c), (5, 5));
        let coarse = upscale_from_theta(&cv, &geom).unwrap();
        assert_eq!(coarse.len(), 25);
        let fine = reconstruct(&cv).unwrap();
        let mut want = 0.0;
        for r in 5..10 {
            for c in 10..15 {
                want += fine.get(r, c);
            }
        }
        assert!((coarse[5 + 2] - want / 25.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let cv = CoeffVector::zeros(CoeffSelection::Square(2), (8, 8)).unwrap();
        let geom = CoarseGeometry::over((12, 12), 4, 4).unwrap();
        assert!(matches!(upscale_from_theta(&cv, &geom), Err(Error::InvalidGeometry(_))));
    }
}
