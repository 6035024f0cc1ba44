//! Adaptive Gauss–Kronrod (7/15) quadrature on finite and half-infinite
//! intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

const MAX_DEPTH: u32 = 48;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return whole;
    }
    let mid = 0.5 * (a + b);
    let (left, el) = gk15(f, a, mid);
    let (right, er) = gk15(f, mid, b);
    adapt(f, a, mid, left, el, 0.5 * tol, depth + 1)
        + adapt(f, mid, b, right, er, 0.5 * tol, depth + 1)
}

/// Integral of `f` over `[a, b]` to roughly `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = gk15(&mut f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    adapt(&mut f, a, b, whole, err, tol, 0)
}

/// Integral over `[a, b]` split at the given interior breakpoints, where
/// the integrand may have kinks or jumps.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|t| *t > a && *t < b)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);
    let pieces = (nodes.len() - 1) as f64;
    nodes
        .windows(2)
        .map(|w| integrate(&mut f, w[0], w[1], abs_tol / pieces, rel_tol))
        .sum()
}

/// Integral over `[a, inf)` via the map `t = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - u;
            let v = f(a + u / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_trig() {
        assert_relative_eq!(integrate(|x| x * x, 0.0, 1.0, 1e-14, 1e-14), 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(integrate(f64::sin, 0.0, PI, 1e-13, 1e-13), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        // integral of sqrt(1 - x^2) on [-1, 1] is pi / 2
        let v = integrate(|x: f64| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-11, 1e-11);
        assert_relative_eq!(v, PI / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn half_infinite_gaussian() {
        let v = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, 1e-13, 1e-12);
        assert_relative_eq!(v, PI.sqrt() / 2.0, epsilon = 1e-11);
    }

    #[test]
    fn jump_with_breakpoint() {
        let v = integrate_with_breaks(|x| if x < 0.3 { 1.0 } else { 2.0 }, 0.0, 1.0, &[0.3], 1e-13, 1e-13);
        assert_relative_eq!(v, 0.3 + 1.4, epsilon = 1e-12);
    }
}
