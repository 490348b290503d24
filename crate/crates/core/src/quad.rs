//! Quadrature helpers shared by the coefficient and construction modules.

/// 8-point Gauss-Legendre nodes on [-1, 1] (positive half).
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Gauss-Legendre 8-point rule on [a, b].
pub fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Composite 8-point rule with `panels` equal panels.
pub fn gauss8_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            gauss8(f, lo, lo + width)
        })
        .sum()
}

/// Composite rule on [a, b] with panel doubling until the relative change
/// drops below `rtol` (or `max_doublings` is reached).
pub fn gauss8_doubling<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    rtol: f64,
    max_doublings: usize,
) -> f64 {
    let mut panels = start_panels.max(1);
    let mut prev = gauss8_composite(f, a, b, panels);
    for _ in 0..max_doublings {
        panels *= 2;
        let next = gauss8_composite(f, a, b, panels);
        if (next - prev).abs() <= rtol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Gauss-Legendre over geometrically spaced panels between `a > 0` and `b`,
/// for integrands that vary on a logarithmic scale.
pub fn gauss8_geometric<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    debug_assert!(a > 0.0 && b >= a);
    let ratio = (b / a).powf(1.0 / panels.max(1) as f64);
    let mut lo = a;
    let mut acc = 0.0;
    for i in 0..panels.max(1) {
        let hi = if i + 1 == panels.max(1) { b } else { lo * ratio };
        acc += gauss8(f, lo, hi);
        lo = hi;
    }
    acc
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln ∫_a^b exp(g(t)) dt` evaluated with per-panel rescaling; the panel
/// count adapts to the variation of `g` across the interval.
pub fn log_integral<G: Fn(f64) -> f64 + ?Sized>(g: &G, a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let ga = g(a);
    let gb = g(b);
    let gm = g(0.5 * (a + b));
    let spread = [ga, gb, gm]
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let variation = if spread.0.is_finite() { spread.1 - spread.0 } else { 0.0 };
    let monotone = (ga <= gm && gm <= gb) || (ga >= gm && gm >= gb);
    if variation > 512.0 && monotone && ga.is_finite() && gb.is_finite() {
        // Steep exponential: the mass sits at the larger endpoint, where
        // ∫ e^g ≈ e^{g(end)} / |g'(end)|.
        let (end, dir) = if gb >= ga { (b, -1.0) } else { (a, 1.0) };
        let delta = (b - a) * 1e-7;
        let slope = ((g(end + dir * delta) - g(end)) / delta).abs();
        return g(end) - slope.ln();
    }
    let panels = (variation.ceil() as usize).clamp(2, 512);
    let width = (b - a) / panels as f64;
    let mut total = f64::NEG_INFINITY;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = lo + width;
        let shift = g(0.5 * (lo + hi));
        if shift == f64::NEG_INFINITY {
            continue;
        }
        let part = gauss8(&|t: f64| (g(t) - shift).exp(), lo, hi);
        if part > 0.0 {
            total = log_add(total, shift + part.ln());
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_exact_for_polynomials() {
        let f = |x: f64| x.powi(15) + 3.0 * x * x;
        let exact = 1.0 / 16.0 + 1.0;
        assert!((gauss8(&f, 0.0, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn log_integral_matches_linear_space() {
        let g = |t: f64| 2.0 * t;
        let exact = ((2.0f64 * 3.0).exp() - 1.0) / 2.0;
        let got = log_integral(&g, 0.0, 3.0).exp();
        assert!((got - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn log_integral_survives_overflow() {
        let g = |t: f64| t;
        // ln ∫_0^1000 e^t dt = ln(e^1000 - 1) ≈ 1000
        let got = log_integral(&g, 0.0, 1000.0);
        assert!((got - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn log_integral_steep_endpoint() {
        let g = |t: f64| 3.0 * t;
        let got = log_integral(&g, 1e3, 1e6);
        let exact = 3e6 - 3f64.ln();
        assert!((got - exact).abs() < 1e-6);
    }

    #[test]
    fn log_add_handles_neg_infinity() {
        assert_eq!(log_add(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
