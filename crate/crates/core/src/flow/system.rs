use super::{FlowField, FlowParams, NormalSystem, PolyField, Sym2};
use crate::error::{Error, Result};
use crate::image::{blur_plane, gaussian_kernel};

/// Builds the neighborhood-aggregated normal equations with the Gaussian
/// weight configured in `params`.
pub fn build_system(
    exp1: &PolyField,
    exp2: &PolyField,
    prior: &FlowField,
    params: &FlowParams,
) -> Result<NormalSystem> {
    let kernel = gaussian_kernel(params.neighborhood_sigma, params.neighborhood_radius);
    build_system_weighted(exp1, exp2, prior, &kernel)
}

/// Per pixel: `A = (A1(x) + A2(x~)) / 2` and
/// `db = -(b2(x~) - b1(x)) / 2 + A r` where `r = round(prior d(x))` and
/// `x~ = x + r`. The `A r` term keeps the solved `d` an absolute displacement
/// rather than an increment over the rounded prior. `G = sum w A^T A` and
/// `h = sum w A^T db` are then aggregated with the separable weight `kernel`.
///
/// Pixels whose `x~` leaves the image contribute nothing and are flagged
/// invalid.
pub fn build_system_weighted(
    exp1: &PolyField,
    exp2: &PolyField,
    prior: &FlowField,
    kernel: &[f64],
) -> Result<NormalSystem> {
    assemble(exp1, exp2, prior, kernel, true)
}

/// [`build_system_weighted`]; without `with_residual` the `bb` plane is not
/// aggregated and comes back empty.
pub(crate) fn assemble(
    exp1: &PolyField,
    exp2: &PolyField,
    prior: &FlowField,
    kernel: &[f64],
    with_residual: bool,
) -> Result<NormalSystem> {
    let (w, h) = (exp1.width, exp1.height);
    for other in [(exp2.width, exp2.height), (prior.width, prior.height)] {
        if other != (w, h) {
            return Err(Error::DimensionMismatch {
                left: (w, h),
                right: other,
            });
        }
    }

    let n = w * h;
    let mut planes = vec![vec![0.0; n]; if with_residual { 6 } else { 5 }];
    let mut valid = vec![false; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let pd = prior.d[i];
            let r = [round_half_away(pd[0]), round_half_away(pd[1])];
            let tx = x as f64 + r[0];
            let ty = y as f64 + r[1];
            if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 {
                continue;
            }
            valid[i] = true;
            let c1 = &exp1.coeffs[i];
            let c2 = exp2.at(tx as usize, ty as usize);
            let a = Sym2::new(
                0.5 * (c1.a.xx + c2.a.xx),
                0.5 * (c1.a.xy + c2.a.xy),
                0.5 * (c1.a.yy + c2.a.yy),
            );
            let ar = a.mul_vec(r);
            let db = [
                -0.5 * (c2.b[0] - c1.b[0]) + ar[0],
                -0.5 * (c2.b[1] - c1.b[1]) + ar[1],
            ];
            let g = a.gram();
            let hv = a.mul_vec(db);
            planes[0][i] = g.xx;
            planes[1][i] = g.xy;
            planes[2][i] = g.yy;
            planes[3][i] = hv[0];
            planes[4][i] = hv[1];
            if with_residual {
                planes[5][i] = db[0] * db[0] + db[1] * db[1];
            }
        }
    }

    let mut agg: Vec<Vec<f64>> = if kernel.len() == 1 {
        planes
            .into_iter()
            .map(|p| p.into_iter().map(|v| v * kernel[0] * kernel[0]).collect())
            .collect()
    } else {
        planes.iter().map(|p| blur_plane(p, w, h, kernel)).collect()
    };

    Ok(NormalSystem {
        width: w,
        height: h,
        g: (0..n)
            .map(|i| Sym2::new(agg[0][i], agg[1][i], agg[2][i]))
            .collect(),
        h: (0..n).map(|i| [agg[3][i], agg[4][i]]).collect(),
        bb: if with_residual { agg.pop().expect("six planes") } else { Vec::new() },
        valid,
    })
}

/// Rounds half away from zero with truncating casts, which avoids a libm
/// call on targets without a rounding instruction.
#[inline]
fn round_half_away(v: f64) -> f64 {
    if v >= 0.0 {
        (v + 0.5) as i64 as f64
    } else {
        (v - 0.5) as i64 as f64
    }
}

/// Solves `G d = h`. Returns `ok = false` and `d = 0` when
/// `det(G) <= eps * trace(G)^2`, i.e. when the neighborhood does not
/// constrain both flow components.
pub fn solve_point(g: Sym2, h: [f64; 2], eps: f64) -> ([f64; 2], bool) {
    let det = g.det();
    let tr = g.trace();
    if !(det > eps * tr * tr) {
        return ([0.0, 0.0], false);
    }
    let d = [
        (g.yy * h[0] - g.xy * h[1]) / det,
        (g.xx * h[1] - g.xy * h[0]) / det,
    ];
    (d, true)
}

/// Minimized objective `sum w |db|^2 - d^T h`, clamped at zero.
#[inline]
pub fn residual(h: [f64; 2], d: [f64; 2], bb: f64) -> f64 {
    (bb - (d[0] * h[0] + d[1] * h[1])).max(0.0)
}
