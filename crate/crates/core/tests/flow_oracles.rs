mod common;

use common::{dense_poly_fit, median_endpoint_error, random_image, smooth_texture};
use flowpilot::flow::{
    build_system, build_system_weighted, estimate_flow, poly_expand, residual, solve_point,
    FlowField, FlowParams, PolyCoeffs, PolyField, Sym2,
};
use flowpilot::Image;
use proptest::prelude::*;

#[test]
fn separable_expansion_matches_dense_fit() {
    let params = FlowParams::default();
    let r = params.expansion_radius;
    for seed in 0..5 {
        let img = random_image(32, 32, seed);
        let field = poly_expand(&img, &params).unwrap();
        for y in r..32 - r {
            for x in r..32 - r {
                let oracle = dense_poly_fit(&img, x, y, params.expansion_sigma, r);
                let got = field.at(x, y);
                let diffs = [
                    got.a.xx - oracle.a.xx,
                    got.a.xy - oracle.a.xy,
                    got.a.yy - oracle.a.yy,
                    got.b[0] - oracle.b[0],
                    got.b[1] - oracle.b[1],
                    got.c - oracle.c,
                ];
                assert!(
                    diffs.iter().all(|d| d.abs() < 1e-6),
                    "pixel ({x},{y}) diffs {diffs:?}"
                );
            }
        }
    }
}

fn hand_field(seed: u64) -> PolyField {
    // deterministic but irregular coefficients
    let coeffs = (0..25)
        .map(|i| {
            let t = (i as f64 + 1.0) * (seed as f64 + 1.3);
            PolyCoeffs {
                a: Sym2::new(1.0 + (t * 0.7).sin(), 0.3 * (t * 1.1).cos(), 1.5 + (t * 0.3).cos()),
                b: [(t * 0.9).sin(), (t * 0.5).cos()],
                c: 0.0,
            }
        })
        .collect();
    PolyField {
        width: 5,
        height: 5,
        coeffs,
    }
}

#[test]
fn aggregation_matches_direct_sums() {
    let e1 = hand_field(1);
    let e2 = hand_field(2);
    let sys = build_system_weighted(&e1, &e2, &FlowField::zeros(5, 5), &[1.0, 1.0, 1.0]).unwrap();
    // center pixel (2,2): every neighbor is inside, no padding involved
    let mut g = [0.0; 3];
    let mut h = [0.0; 2];
    let mut bb = 0.0;
    for y in 1..4 {
        for x in 1..4 {
            let c1 = e1.at(x, y);
            let c2 = e2.at(x, y);
            let a = [
                [(c1.a.xx + c2.a.xx) / 2.0, (c1.a.xy + c2.a.xy) / 2.0],
                [(c1.a.xy + c2.a.xy) / 2.0, (c1.a.yy + c2.a.yy) / 2.0],
            ];
            let db = [-(c2.b[0] - c1.b[0]) / 2.0, -(c2.b[1] - c1.b[1]) / 2.0];
            // A^T A and A^T db written out element by element
            g[0] += a[0][0] * a[0][0] + a[1][0] * a[1][0];
            g[1] += a[0][0] * a[0][1] + a[1][0] * a[1][1];
            g[2] += a[0][1] * a[0][1] + a[1][1] * a[1][1];
            h[0] += a[0][0] * db[0] + a[1][0] * db[1];
            h[1] += a[0][1] * db[0] + a[1][1] * db[1];
            bb += db[0] * db[0] + db[1] * db[1];
        }
    }
    let got = sys.g[12];
    assert!((got.xx - g[0]).abs() < 1e-12);
    assert!((got.xy - g[1]).abs() < 1e-12);
    assert!((got.yy - g[2]).abs() < 1e-12);
    assert!((sys.h[12][0] - h[0]).abs() < 1e-12);
    assert!((sys.h[12][1] - h[1]).abs() < 1e-12);
    assert!((sys.bb[12] - bb).abs() < 1e-12);
}

#[test]
fn residual_equals_objective_at_solution() {
    // direct evaluation of sum w |A d - db|^2 over the same 3x3 window
    let e1 = hand_field(3);
    let e2 = hand_field(4);
    let sys = build_system_weighted(&e1, &e2, &FlowField::zeros(5, 5), &[1.0, 1.0, 1.0]).unwrap();
    let (d, ok) = solve_point(sys.g[12], sys.h[12], 1e-6);
    assert!(ok);
    let mut objective = 0.0;
    for y in 1..4 {
        for x in 1..4 {
            let c1 = e1.at(x, y);
            let c2 = e2.at(x, y);
            let a = Sym2::new(
                (c1.a.xx + c2.a.xx) / 2.0,
                (c1.a.xy + c2.a.xy) / 2.0,
                (c1.a.yy + c2.a.yy) / 2.0,
            );
            let ad = a.mul_vec(d);
            let db = [-(c2.b[0] - c1.b[0]) / 2.0, -(c2.b[1] - c1.b[1]) / 2.0];
            objective += (ad[0] - db[0]).powi(2) + (ad[1] - db[1]).powi(2);
        }
    }
    let e = residual(sys.h[12], d, sys.bb[12]);
    assert!((e - objective).abs() < 1e-10, "{e} vs {objective}");
}

/// f(x) = x^T A x + b^T x + c sampled on the pixel grid.
fn quadratic_image(w: usize, h: usize, a: Sym2, b: [f64; 2], c: f64, shift: [f64; 2]) -> Image {
    Image::from_fn(w, h, |x, y| {
        let p = [x as f64 - shift[0], y as f64 - shift[1]];
        let ap = a.mul_vec(p);
        p[0] * ap[0] + p[1] * ap[1] + b[0] * p[0] + b[1] * p[1] + c
    })
}

#[test]
fn exact_quadratic_translation_is_recovered() {
    let a1 = Sym2::new(0.004, 0.001, 0.006);
    let b1 = [0.02, -0.03];
    let params = FlowParams::default();
    let margin = params.expansion_radius + params.neighborhood_radius;
    for d in [[1.5, -0.75], [3.0, 2.0], [-0.25, 0.4]] {
        let f1 = quadratic_image(48, 48, a1, b1, 0.3, [0.0, 0.0]);
        let f2 = quadratic_image(48, 48, a1, b1, 0.3, d);
        let e1 = poly_expand(&f1, &params).unwrap();
        let e2 = poly_expand(&f2, &params).unwrap();
        let sys = build_system(&e1, &e2, &FlowField::zeros(48, 48), &params).unwrap();
        for y in margin..48 - margin {
            for x in margin..48 - margin {
                let (p1, p2) = (e1.at(x, y), e2.at(x, y));
                // A2 = A1 on exact quadratics
                assert!((p1.a.xx - p2.a.xx).abs() < 1e-9);
                assert!((p1.a.xy - p2.a.xy).abs() < 1e-9);
                assert!((p1.a.yy - p2.a.yy).abs() < 1e-9);
                // closed form d = -1/2 A1^-1 (b2 - b1)
                let db = [p2.b[0] - p1.b[0], p2.b[1] - p1.b[1]];
                let det = p1.a.det();
                let closed = [
                    -0.5 * (p1.a.yy * db[0] - p1.a.xy * db[1]) / det,
                    -0.5 * (p1.a.xx * db[1] - p1.a.xy * db[0]) / det,
                ];
                let (solved, ok) = solve_point(sys.g[y * 48 + x], sys.h[y * 48 + x], 1e-6);
                assert!(ok);
                for k in 0..2 {
                    assert!((solved[k] - d[k]).abs() <= 1e-9, "{solved:?} vs {d:?}");
                    assert!((closed[k] - d[k]).abs() <= 1e-9, "{closed:?} vs {d:?}");
                }
            }
        }
    }
}

#[test]
fn known_integer_shifts() {
    let f1 = smooth_texture(128, 128, 2.0, 7);
    let small = estimate_flow(&f1, &f1.shifted_circular(3, 0), &FlowParams::default()).unwrap();
    let err_small = median_endpoint_error(&small, [3.0, 0.0], 16);
    assert!(err_small <= 0.3, "(3,0) median error {err_small}");

    let f2 = f1.shifted_circular(10, 4);
    let multi = estimate_flow(&f1, &f2, &FlowParams::default()).unwrap();
    let err_multi = median_endpoint_error(&multi, [10.0, 4.0], 16);
    assert!(err_multi <= 0.5, "(10,4) median error {err_multi}");

    let single = FlowParams {
        pyramid_levels: 1,
        ..FlowParams::default()
    };
    let flat = estimate_flow(&f1, &f2, &single).unwrap();
    let err_flat = median_endpoint_error(&flat, [10.0, 4.0], 16);
    eprintln!("median errors: (3,0) {err_small:.3}, (10,4) {err_multi:.3}, single-level {err_flat:.3}");
    assert!(err_flat > 0.5, "single level unexpectedly recovered (10,4): {err_flat}");
}

#[test]
fn more_iterations_reduce_error() {
    let f1 = smooth_texture(128, 128, 2.0, 11);
    let f2 = f1.shifted_circular(5, -3);
    let errs: Vec<f64> = (1..=3)
        .map(|iterations_per_level| {
            let params = FlowParams {
                iterations_per_level,
                ..FlowParams::default()
            };
            let flow = estimate_flow(&f1, &f2, &params).unwrap();
            median_endpoint_error(&flow, [5.0, -3.0], 16)
        })
        .collect();
    assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
}

#[test]
fn mirrored_inputs_mirror_the_flow() {
    let f1 = smooth_texture(96, 64, 2.0, 3);
    let f2 = f1.shifted_circular(2, 1);
    let params = FlowParams::default();
    let flow = estimate_flow(&f1, &f2, &params).unwrap();
    let mflow = estimate_flow(&f1.mirrored(), &f2.mirrored(), &params).unwrap();
    for y in 0..64 {
        for x in 0..96 {
            let a = flow.at(x, y);
            let b = mflow.at(95 - x, y);
            assert_eq!(flow.is_valid(x, y), mflow.is_valid(95 - x, y));
            assert!((a[0] + b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn zero_motion_on_arbitrary_frames(seed in any::<u64>()) {
        let img = random_image(48, 48, seed);
        let flow = estimate_flow(&img, &img, &FlowParams::default()).unwrap();
        for i in 0..flow.d.len() {
            if flow.valid[i] {
                prop_assert!(flow.d[i][0].abs() < 1e-6 && flow.d[i][1].abs() < 1e-6);
                prop_assert!(flow.e[i] <= 1e-9);
            }
            prop_assert!(flow.e[i] >= 0.0);
        }
    }

    #[test]
    fn solve_point_satisfies_system(
        xx in 0.0f64..10.0, yy in 0.0f64..10.0, xy in -5.0f64..5.0,
        hx in -10.0f64..10.0, hy in -10.0f64..10.0,
    ) {
        let g = Sym2::new(xx, xy, yy);
        let (d, ok) = solve_point(g, [hx, hy], 1e-6);
        if ok {
            let gd = g.mul_vec(d);
            let r = ((gd[0] - hx).powi(2) + (gd[1] - hy).powi(2)).sqrt();
            let hn = (hx * hx + hy * hy).sqrt();
            prop_assert!(r <= 1e-9 * (1.0 + hn), "residual {r}");
        } else {
            prop_assert_eq!(d, [0.0, 0.0]);
        }
    }
}
