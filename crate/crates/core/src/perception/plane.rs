//! Total-least-squares plane fitting for surface normal estimation.

use nalgebra::{Matrix3, Point3, Unit, Vector3};

use crate::error::{Error, Result};

/// Fit a plane to `points` by total least squares and return the unit
/// normal together with the RMS point-to-plane residual (meters).
///
/// The normal is the eigenvector of the smallest eigenvalue of the centered
/// covariance, canonicalized to the upward hemisphere (positive world-Z
/// component; ties broken toward +y then +x). Fewer than 3 points or a
/// rank-deficient (collinear) cloud is a degenerate-geometry error.
pub fn plane_fit_normal(points: &[Point3<f64>]) -> Result<(Unit<Vector3<f64>>, f64)> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "plane fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = cov.symmetric_eigen();
    // Sort eigenpairs ascending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lambda_min = eig.eigenvalues[order[0]].max(0.0);
    let lambda_mid = eig.eigenvalues[order[1]].max(0.0);
    let lambda_max = eig.eigenvalues[order[2]].max(0.0);

    // Collinear cloud: no spread in two directions, the normal is not
    // unique.
    if lambda_mid <= 1e-12 * lambda_max.max(1e-30) {
        return Err(Error::Degenerate(
            "collinear points: plane normal is not unique".into(),
        ));
    }

    let mut normal = eig.eigenvectors.column(order[0]).into_owned();
    if normal.z < 0.0
        || (normal.z == 0.0 && (normal.y < 0.0 || (normal.y == 0.0 && normal.x < 0.0)))
    {
        normal = -normal;
    }
    let residual = lambda_min.sqrt();
    Ok((Unit::new_normalize(normal), residual))
}
