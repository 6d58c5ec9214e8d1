//! Adaptive Gauss–Kronrod quadrature and integrals with an end point
//! singularity.
//!
//! Regular integrals use a 21-point Kronrod rule with global bisection of the
//! worst subinterval. Near a singular point `s` the range is cut into dyadic
//! shells `[s + L/2^(k+1), s + L/2^k]`; the partial sums over shells form the
//! increasing sequence of truncated integrals, which is accelerated with Wynn's
//! epsilon algorithm.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    /// Relative tolerance on the final value.
    pub rel_tol: f64,
    /// Absolute tolerance, for integrals that vanish.
    pub abs_tol: f64,
    /// Number of shells examined before giving up on a singular integral.
    pub max_refinements: usize,
    /// Truncated values above this are reported as divergent.
    pub divergence_cap: f64,
    /// Subinterval budget of one adaptive integral.
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_refinements: 30,
            divergence_cap: 1e12,
            max_segments: 2000,
        }
    }
}

impl QuadOptions {
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            ..self
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_958_109_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One application of the 21-point rule: (Kronrod value, |Kronrod − Gauss|).
fn gk21(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let (v, e) = gk21(f, a, b);
    let mut segments = vec![Segment { a, b, value: v, error: e }];
    let mut total = v;
    let mut previous = v;
    loop {
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Ok(total);
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= opts.max_segments {
            return Err(Error::NotConverged {
                last: total,
                previous,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // The interval cannot be split further in floating point.
            return Err(Error::NotConverged {
                last: total,
                previous,
            });
        }
        let (v1, e1) = gk21(f, s.a, mid);
        let (v2, e2) = gk21(f, mid, s.b);
        previous = total;
        segments.push(Segment { a: s.a, b: mid, value: v1, error: e1 });
        segments.push(Segment { a: mid, b: s.b, value: v2, error: e2 });
        total = segments.iter().map(|s| s.value).sum();
    }
}

/// Which side of the singular point the range lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Result of a singular integral: the value (possibly `+∞`) and the largest
/// truncated integral actually computed, which is a lower bound for
/// nonnegative integrands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularValue {
    pub value: f64,
    pub lower_bound: f64,
}

/// Integral of a nonnegative `f` over `[s, s + length]` (right side) or
/// `[s − length, s]` (left side), where `f` may blow up at `s`.
pub fn integrate_singular_side(
    f: &dyn Fn(f64) -> f64,
    s: f64,
    length: f64,
    side: Side,
    opts: &QuadOptions,
) -> Result<SingularValue> {
    if length <= 0.0 {
        return Ok(SingularValue { value: 0.0, lower_bound: 0.0 });
    }
    let shell_opts = QuadOptions {
        rel_tol: (opts.rel_tol * 1e-2).max(1e-14),
        ..*opts
    };
    let mut partial = Vec::with_capacity(opts.max_refinements);
    let mut sum = 0.0;
    let mut last_shell = f64::NAN;
    let mut flat_shells = 0;
    let mut accepted: Option<f64> = None;
    let mut last_estimate = f64::NAN;
    for k in 0..opts.max_refinements {
        let outer = length * 0.5f64.powi(k as i32);
        let inner = 0.5 * outer;
        let (lo, hi) = match side {
            Side::Right => (s + inner, s + outer),
            Side::Left => (s - outer, s - inner),
        };
        let shell = integrate_interval(f, lo, hi, &shell_opts)?;
        sum += shell;
        partial.push(sum);
        if !sum.is_finite() || sum > opts.divergence_cap {
            return Ok(SingularValue { value: f64::INFINITY, lower_bound: sum });
        }
        if k >= 8 && last_shell > 0.0 && shell >= last_shell * (1.0 - 1e-6) {
            flat_shells += 1;
            if flat_shells >= 3 {
                return Ok(SingularValue { value: f64::INFINITY, lower_bound: sum });
            }
        } else {
            flat_shells = 0;
        }
        let shrinking = !(last_shell > 0.0) || shell < last_shell * (1.0 - 1e-6);
        last_shell = shell;
        if shell == 0.0 && sum == 0.0 && k >= 2 {
            return Ok(SingularValue { value: 0.0, lower_bound: 0.0 });
        }
        if k >= 3 && shrinking {
            let (estimate, error) = wynn_epsilon(&partial);
            let tol = opts.rel_tol * estimate.abs();
            if error <= tol && estimate >= sum * (1.0 - 1e-12) && (estimate - last_estimate).abs() <= 10.0 * tol.max(opts.abs_tol) {
                if let Some(prev) = accepted {
                    if (estimate - prev).abs() <= 10.0 * tol.max(opts.abs_tol) {
                        return Ok(SingularValue { value: estimate.max(sum), lower_bound: sum });
                    }
                }
                accepted = Some(estimate);
            } else {
                accepted = None;
            }
            last_estimate = estimate;
        }
    }
    let (estimate, _) = wynn_epsilon(&partial);
    Err(Error::NotConverged {
        last: estimate,
        previous: last_estimate,
    })
}

/// Wynn's epsilon acceleration of a convergent sequence. Returns the best even
/// column estimate and the difference between its last two entries.
pub fn wynn_epsilon(seq: &[f64]) -> (f64, f64) {
    const WINDOW: usize = 14;
    let start = seq.len().saturating_sub(WINDOW);
    let seq = &seq[start..];
    let n = seq.len();
    let last = seq[n - 1];
    let mut best = (last, if n >= 2 { (last - seq[n - 2]).abs() } else { f64::INFINITY });
    if n < 3 {
        return best;
    }
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = seq.to_vec();
    let mut column = 0;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 {
                if column % 2 == 0 {
                    // The column has converged exactly.
                    return (cur[j + 1], 0.0);
                }
                return best;
            }
            next.push(prev[j + 1] + 1.0 / d);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return best;
        }
        prev = cur;
        cur = next;
        column += 1;
        if column % 2 == 0 && cur.len() >= 2 {
            let m = cur.len();
            let err = (cur[m - 1] - cur[m - 2]).abs();
            if err < best.1 {
                best = (cur[m - 1], err);
            }
        }
    }
    best
}

/// Integral over `[a, b]` with a possible singular point `s` inside or on
/// the boundary.
pub fn integrate_with_singularity(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    s: f64,
    opts: &QuadOptions,
) -> Result<SingularValue> {
    if !(a..=b).contains(&s) {
        let v = integrate_interval(f, a, b, opts)?;
        return Ok(SingularValue { value: v, lower_bound: v });
    }
    let left = integrate_singular_side(f, s, s - a, Side::Left, opts)?;
    let right = integrate_singular_side(f, s, b - s, Side::Right, opts)?;
    Ok(SingularValue {
        value: left.value + right.value,
        lower_bound: left.lower_bound + right.lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> QuadOptions {
        QuadOptions::default()
    }

    #[test]
    fn polynomials_are_exact() {
        let v = integrate_interval(&|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &opts()).unwrap();
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn smooth_transcendental() {
        let v = integrate_interval(&|x: f64| x.exp() * x.sin(), 0.0, 3.0, &opts()).unwrap();
        let exact = 0.5 * (3f64.exp() * (3f64.sin() - 3f64.cos()) + 1.0);
        assert!((v - exact).abs() < 1e-11 * exact.abs());
    }

    #[test]
    fn peaked_integrand() {
        let eps: f64 = 1e-4;
        let v = integrate_interval(&|x| eps / ((x - 0.3).powi(2) + eps * eps), 0.0, 1.0, &opts()).unwrap();
        let exact = (0.7 / eps).atan() + (0.3 / eps).atan();
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn inverse_square_root_singularity() {
        let f = |x: f64| (x - 0.3).abs().powf(-0.5);
        let v = integrate_with_singularity(&f, 0.0, 1.0, 0.3, &opts()).unwrap();
        let exact = 2.0 * (0.3f64.sqrt() + 0.7f64.sqrt());
        assert!((v.value - exact).abs() < 1e-9 * exact, "{} vs {}", v.value, exact);
        assert!(v.lower_bound <= v.value);
    }

    #[test]
    fn strong_but_integrable_singularity() {
        let f = |x: f64| x.powf(-0.9);
        let v = integrate_with_singularity(&f, 0.0, 1.0, 0.0, &opts()).unwrap();
        assert!((v.value - 10.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn mixed_power_singularity() {
        // x^-0.8 + x^-0.3 + 1: the shells mix three geometric rates.
        let f = |x: f64| x.powf(-0.8) + x.powf(-0.3) + 1.0;
        let v = integrate_with_singularity(&f, 0.0, 1.0, 0.0, &opts()).unwrap();
        let exact = 5.0 + 1.0 / 0.7 + 1.0;
        assert!((v.value - exact).abs() < 1e-8 * exact, "{}", v.value);
    }

    #[test]
    fn log_divergence_is_infinite() {
        let f = |x: f64| 1.0 / (x - 0.3).abs();
        let v = integrate_with_singularity(&f, 0.0, 1.0, 0.3, &opts()).unwrap();
        assert!(v.value.is_infinite());
    }

    #[test]
    fn power_divergence_is_infinite() {
        let f = |x: f64| (x - 0.3).abs().powf(-1.5);
        let v = integrate_with_singularity(&f, 0.0, 1.0, 0.3, &opts()).unwrap();
        assert!(v.value.is_infinite());
    }

    #[test]
    fn bounded_integrand_with_declared_singularity() {
        let v = integrate_with_singularity(&|x: f64| x.cos(), 0.0, 1.0, 0.5, &opts()).unwrap();
        assert!((v.value - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn truncations_increase() {
        let f = |x: f64| x.powf(-0.5);
        let mut partial = 0.0;
        for k in 0..20 {
            let lo = 0.5f64.powi(k + 1);
            let shell = integrate_interval(&f, lo, 2.0 * lo, &opts()).unwrap();
            assert!(shell > 0.0);
            partial += shell;
        }
        assert!(partial < 2.0);
    }

    #[test]
    fn wynn_accelerates_geometric_series() {
        let seq: Vec<f64> = (1..8).map(|k| 1.0 - 0.9f64.powi(k)).collect();
        let (e, _) = wynn_epsilon(&seq);
        assert!((e - 1.0).abs() < 1e-12);
    }
}
