//! Small dense solvers shared by the ray and component code.

use crate::dynamics::Complex;

/// Least-squares polynomial of degree `degree` through `(x_i, y_i)`,
/// evaluated at `x = 0`.
pub fn polyfit_at_zero(xs: &[f64], ys: &[Complex], degree: usize) -> Option<Complex> {
    let m = degree + 1;
    if xs.len() != ys.len() || xs.len() < m {
        return None;
    }
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(scale > 0.0) {
        return None;
    }
    // normal equations in the scaled variable x / scale
    let mut ata = vec![vec![0.0f64; m]; m];
    let mut aty = vec![Complex::new(0.0, 0.0); m];
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x / scale;
        let powers: Vec<f64> = (0..m).map(|i| u.powi(i as i32)).collect();
        for i in 0..m {
            for j in 0..m {
                ata[i][j] += powers[i] * powers[j];
            }
            aty[i] += y * powers[i];
        }
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))?;
        ata.swap(col, pivot);
        aty.swap(col, pivot);
        let d = ata[col][col];
        if d.abs() < 1e-300 {
            return None;
        }
        for row in col + 1..m {
            let f = ata[row][col] / d;
            for k in col..m {
                ata[row][k] -= f * ata[col][k];
            }
            let v = aty[col] * f;
            aty[row] -= v;
        }
    }
    let mut c = vec![Complex::new(0.0, 0.0); m];
    for row in (0..m).rev() {
        let mut v = aty[row];
        for k in row + 1..m {
            v -= c[k] * ata[row][k];
        }
        c[row] = v / ata[row][row];
    }
    Some(c[0])
}

/// Largest pairwise distance.
pub fn spread(values: &[Complex]) -> f64 {
    let mut s = 0.0f64;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            s = s.max((a - b).norm());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_is_exact() {
        let xs: Vec<f64> = (1..=8).map(|i| 0.01 * i as f64).collect();
        let ys: Vec<Complex> = xs
            .iter()
            .map(|&t| Complex::new(-1.0 + 2.0 * t - 3.0 * t * t, 0.5 * t))
            .collect();
        let k = polyfit_at_zero(&xs, &ys, 2).unwrap();
        assert!((k - Complex::new(-1.0, 0.0)).norm() < 1e-12);
        let xs_neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let k = polyfit_at_zero(&xs_neg, &ys, 2).unwrap();
        assert!((k - Complex::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(polyfit_at_zero(&[1.0, 2.0], &[Complex::new(0.0, 0.0); 2], 2).is_none());
    }
}
