use super::system::assemble;
use super::{
    gaussian_pyramid, poly_expand_with_kernel, residual, solve_point,
    FlowField, FlowParams, PolyField,
};
use crate::error::{Error, Result};
use crate::image::{gaussian_kernel, Image};

/// Coarse-to-fine estimation of the displacement from `f1` to `f2`.
///
/// At each pyramid level, coarsest first, `iterations_per_level` rounds of
/// build/solve are run; every round uses the previous displacement as prior.
/// The flow of a finished level is upsampled (positions and magnitudes) to
/// seed the next finer one.
pub fn estimate_flow(f1: &Image, f2: &Image, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if f1.dims() != f2.dims() {
        return Err(Error::DimensionMismatch {
            left: f1.dims(),
            right: f2.dims(),
        });
    }
    let p1 = expand_pyramid(f1, params)?;
    let p2 = expand_pyramid(f2, params)?;
    flow_from_expansions(&p1, &p2, params)
}

/// Streaming estimator that keeps the expansion pyramid of the last frame so
/// each new frame is expanded only once.
#[derive(Debug, Clone)]
pub struct FlowEstimator {
    params: FlowParams,
    prev: Option<Vec<PolyField>>,
}

impl FlowEstimator {
    pub fn new(params: FlowParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, prev: None })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Feeds the next frame. Returns the flow from the previously pushed frame,
    /// or `None` for the first frame after construction or [`reset`](Self::reset).
    pub fn push(&mut self, frame: &Image) -> Result<Option<FlowField>> {
        let cur = expand_pyramid(frame, &self.params)?;
        let flow = match &self.prev {
            Some(prev) => {
                let (pw, ph) = (prev[0].width, prev[0].height);
                if (pw, ph) != frame.dims() {
                    return Err(Error::DimensionMismatch {
                        left: (pw, ph),
                        right: frame.dims(),
                    });
                }
                Some(flow_from_expansions(prev, &cur, &self.params)?)
            }
            None => None,
        };
        self.prev = Some(cur);
        Ok(flow)
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

fn expand_pyramid(img: &Image, params: &FlowParams) -> Result<Vec<PolyField>> {
    let kernel = gaussian_kernel(params.expansion_sigma, params.expansion_radius);
    gaussian_pyramid(img, params.pyramid_levels, params.pyramid_scale)?
        .iter()
        .map(|level| poly_expand_with_kernel(level, &kernel))
        .collect()
}

fn flow_from_expansions(
    p1: &[PolyField],
    p2: &[PolyField],
    params: &FlowParams,
) -> Result<FlowField> {
    let kernel = gaussian_kernel(params.neighborhood_sigma, params.neighborhood_radius);
    let mut flow: Option<FlowField> = None;
    for (level, (e1, e2)) in p1.iter().zip(p2).enumerate().rev() {
        let prior = match flow.take() {
            Some(coarse) => upscale_flow(&coarse, e1.width, e1.height),
            None => FlowField::zeros(e1.width, e1.height),
        };
        flow = Some(refine_level(e1, e2, prior, params, &kernel, level == 0)?);
    }
    Ok(flow.expect("at least one level"))
}

fn refine_level(
    e1: &PolyField,
    e2: &PolyField,
    mut flow: FlowField,
    params: &FlowParams,
    kernel: &[f64],
    finest: bool,
) -> Result<FlowField> {
    for it in 0..params.iterations_per_level {
        // residuals only survive from the last round at the finest level
        let with_residual = finest && it + 1 == params.iterations_per_level;
        let sys = assemble(e1, e2, &flow, kernel, with_residual)?;
        for i in 0..flow.d.len() {
            if !sys.valid[i] {
                flow.valid[i] = false;
                flow.e[i] = 0.0;
                continue;
            }
            let (d, ok) = solve_point(sys.g[i], sys.h[i], params.singularity_epsilon);
            let bb = if with_residual { sys.bb[i] } else { 0.0 };
            if ok {
                flow.d[i] = d;
                flow.e[i] = residual(sys.h[i], d, bb);
            } else {
                // keep the prior so coarse estimates survive textureless patches
                flow.e[i] = bb.max(0.0);
            }
            flow.valid[i] = ok;
        }
    }
    Ok(flow)
}

/// Resamples a coarse flow field to `width x height`, scaling the vectors by
/// the per-axis size ratio. The result is fully valid (it is only a prior).
pub fn upscale_flow(coarse: &FlowField, width: usize, height: usize) -> FlowField {
    let sx = coarse.width as f64 / width as f64;
    let sy = coarse.height as f64 / height as f64;
    // center-aligned bilinear taps, clamped at the borders
    let taps = |n: usize, src_n: usize, s: f64| -> Vec<(usize, usize, f64)> {
        (0..n)
            .map(|i| {
                let c = ((i as f64 + 0.5) * s - 0.5).clamp(0.0, (src_n - 1) as f64);
                let i0 = c as usize;
                (i0, (i0 + 1).min(src_n - 1), c - i0 as f64)
            })
            .collect()
    };
    let tx = taps(width, coarse.width, sx);
    let ty = taps(height, coarse.height, sy);
    let cw = coarse.width;
    let mut out = FlowField::zeros(width, height);
    for (y, &(y0, y1, fy)) in ty.iter().enumerate() {
        let (r0, r1) = (&coarse.d[y0 * cw..(y0 + 1) * cw], &coarse.d[y1 * cw..(y1 + 1) * cw]);
        let dst = &mut out.d[y * width..(y + 1) * width];
        for (d, &(x0, x1, fx)) in dst.iter_mut().zip(&tx) {
            for c in 0..2 {
                let top = r0[x0][c] * (1.0 - fx) + r0[x1][c] * fx;
                let bottom = r1[x0][c] * (1.0 - fx) + r1[x1][c] * fx;
                d[c] = top * (1.0 - fy) + bottom * fy;
            }
            d[0] /= sx;
            d[1] /= sy;
        }
    }
    out
}
