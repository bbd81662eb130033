//! Two-dimensional PCA projection for plotting.

use gmc::Tensor;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Row `i` holds the first two principal coordinates of point `i`.
    pub coords: Vec<[f64; 2]>,
    /// Variances along the two axes.
    pub variances: [f64; 2],
    pub axes: [Vec<f64>; 2],
}

/// Projects the rows of `points` onto their top two principal axes.
///
/// Axes come from the eigendecomposition of the sample covariance, ordered by
/// decreasing eigenvalue with ties broken by index. Each axis is signed so
/// that its entry of largest magnitude (first one on ties) is positive. With
/// a single column the second coordinate is zero.
pub fn project_2d(points: &Tensor) -> Result<Projection> {
    let (n, dim) = points.dims2()?;
    let x = DMatrix::from_row_slice(n, dim, points.data());
    let mean = x.row_mean();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = (centered.transpose() * &centered) / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let axis = |slot: usize| -> (Vec<f64>, f64) {
        let Some(&j) = order.get(slot) else {
            return (vec![0.0; dim], 0.0);
        };
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        let lead = (0..dim).fold(
            0,
            |best, i| if v[i].abs() > v[best].abs() { i } else { best },
        );
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        (v, eig.eigenvalues[j].max(0.0))
    };
    let (a0, v0) = axis(0);
    let (a1, v1) = axis(1);
    let coords = centered
        .row_iter()
        .map(|row| {
            let dot = |a: &[f64]| row.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            [dot(&a0), dot(&a1)]
        })
        .collect();
    Ok(Projection {
        coords,
        variances: [v0, v1],
        axes: [a0, a1],
    })
}
