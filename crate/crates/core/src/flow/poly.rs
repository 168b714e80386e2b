use super::{FlowParams, PolyCoeffs, PolyField, Sym2};
use crate::error::{Error, Result};
use crate::image::{correlate_cols, correlate_rows, gaussian_kernel, Image};

/// Fits `f(x) ~ x^T A x + b^T x + c` around every pixel by least squares
/// weighted with a truncated Gaussian applicability.
pub fn poly_expand(img: &Image, params: &FlowParams) -> Result<PolyField> {
    let kernel = gaussian_kernel(params.expansion_sigma, params.expansion_radius);
    poly_expand_with_kernel(img, &kernel)
}

/// Same as [`poly_expand`] with an explicit separable applicability
/// `w(dx, dy) = k(dx) k(dy)`; `kernel` must have odd length and be symmetric.
///
/// The fit is done with six separable correlations (cost linear in the
/// kernel length per pixel). Symmetry makes the odd moments of the
/// applicability vanish, so the 6x6 normal matrix splits into three scalar
/// equations for `b` and `A_xy` and one 3x3 block for `(c, A_xx, A_yy)`.
pub fn poly_expand_with_kernel(img: &Image, kernel: &[f64]) -> Result<PolyField> {
    let (w, h) = img.dims();
    let r = kernel.len() / 2;
    if w < 2 * r + 1 || h < 2 * r + 1 {
        return Err(Error::Dimensions {
            width: w,
            height: h,
            reason: format!("polynomial expansion needs at least {0}x{0}", 2 * r + 1),
        });
    }

    let offsets = (0..kernel.len()).map(|k| k as f64 - r as f64);
    let k1: Vec<f64> = offsets.clone().zip(kernel).map(|(o, g)| o * g).collect();
    let k2: Vec<f64> = offsets.clone().zip(kernel).map(|(o, g)| o * o * g).collect();

    let m0: f64 = kernel.iter().sum();
    let m2: f64 = k2.iter().sum();
    let m4: f64 = offsets.zip(kernel).map(|(o, g)| o.powi(4) * g).sum();

    // weight moments of w(dx, dy) = k(dx) k(dy)
    let s0 = m0 * m0;
    let s2 = m2 * m0;
    let s4 = m4 * m0;
    let s22 = m2 * m2;
    let inv = invert3([[s0, s2, s2], [s2, s4, s22], [s2, s22, s4]]);

    let src = img.data();
    let v0 = correlate_cols(src, w, h, kernel);
    let v1 = correlate_cols(src, w, h, &k1);
    let v2 = correlate_cols(src, w, h, &k2);

    let m_1 = correlate_rows(&v0, w, h, kernel);
    let m_x = correlate_rows(&v0, w, h, &k1);
    let m_xx = correlate_rows(&v0, w, h, &k2);
    let m_y = correlate_rows(&v1, w, h, kernel);
    let m_xy = correlate_rows(&v1, w, h, &k1);
    let m_yy = correlate_rows(&v2, w, h, kernel);

    let coeffs = (0..w * h)
        .map(|i| {
            let rhs = [m_1[i], m_xx[i], m_yy[i]];
            let c = dot3(inv[0], rhs);
            let a_xx = dot3(inv[1], rhs);
            let a_yy = dot3(inv[2], rhs);
            PolyCoeffs {
                a: Sym2::new(a_xx, 0.5 * m_xy[i] / s22, a_yy),
                b: [m_x[i] / s2, m_y[i] / s2],
                c,
            }
        })
        .collect();

    Ok(PolyField {
        width: w,
        height: h,
        coeffs,
    })
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    adj.map(|row| row.map(|v| v / det))
}
