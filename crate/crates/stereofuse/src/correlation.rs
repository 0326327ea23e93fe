//! Subpixel correlation criteria and their closed-form maximizers.
//!
//! Both criteria interpolate intensity to first order inside the window,
//! which turns the correlation into a low-degree rational function of the
//! subpixel shift t. ECC stays linear-over-sqrt-quadratic and has a direct
//! stationary point; EMCC is a ratio of two quadratics whose unique
//! maximum follows from the derivative-numerator root analysis.

use crate::error::{FusionError, Result};

/// Norms and denominators below this are treated as textureless.
pub const DEGENERACY_EPS: f64 = 1e-8;

/// Search interval for the subpixel correction.
pub const T_LIMIT: f64 = 0.99;

/// Zero-mean left/right window vectors at an integer disparity, plus
/// their central x-difference vectors.
#[derive(Debug, Clone)]
pub struct TaylorPatchPair {
    pub ul: Vec<f64>,
    pub ur: Vec<f64>,
    pub dul: Vec<f64>,
    pub dur: Vec<f64>,
}

impl TaylorPatchPair {
    pub fn new(ul: Vec<f64>, ur: Vec<f64>, dul: Vec<f64>, dur: Vec<f64>) -> Result<Self> {
        let n = ul.len();
        if ur.len() != n || dul.len() != n || dur.len() != n {
            return Err(FusionError::DimensionMismatch(
                "patch pair vectors must share one length".into(),
            ));
        }
        Ok(Self { ul, ur, dul, dur })
    }

    pub fn len(&self) -> usize {
        self.ul.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ul.is_empty()
    }
}

/// Ratio of two quadratics A(t)/B(t).
#[derive(Debug, Clone, Copy)]
pub struct RationalQuadratic {
    /// Numerator coefficients [a0, a1, a2].
    pub a: [f64; 3],
    /// Denominator coefficients [b0, b1, b2].
    pub b: [f64; 3],
}

impl RationalQuadratic {
    #[inline]
    pub fn numerator(&self, t: f64) -> f64 {
        self.a[0] + t * (self.a[1] + t * self.a[2])
    }

    #[inline]
    pub fn denominator(&self, t: f64) -> f64 {
        self.b[0] + t * (self.b[1] + t * self.b[2])
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.numerator(t) / self.denominator(t)
    }

    /// Minimum of the denominator over [lo, hi].
    pub fn denominator_min(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.denominator(lo).min(self.denominator(hi));
        if self.b[2].abs() > 0.0 {
            let v = -self.b[1] / (2.0 * self.b[2]);
            if v > lo && v < hi {
                m = m.min(self.denominator(v));
            }
        }
        m
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ECC as a function of t: uL.(uR + t duR) / (|uL| |uR + t duR|).
pub fn ecc(pair: &TaylorPatchPair, t: f64) -> Result<f64> {
    let nl = dot(&pair.ul, &pair.ul).sqrt();
    let n0 = dot(&pair.ul, &pair.ur);
    let n1 = dot(&pair.ul, &pair.dur);
    let q0 = dot(&pair.ur, &pair.ur);
    let q1 = 2.0 * dot(&pair.ur, &pair.dur);
    let q2 = dot(&pair.dur, &pair.dur);
    let nr = (q0 + t * (q1 + t * q2)).max(0.0).sqrt();
    if nl < DEGENERACY_EPS || nr < DEGENERACY_EPS {
        return Err(FusionError::DegenerateWindow);
    }
    Ok((n0 + t * n1) / (nl * nr))
}

/// Closed-form stationary point of the ECC criterion, compared against
/// the interval ends, over [-T_LIMIT, T_LIMIT].
pub fn ecc_maximize(pair: &TaylorPatchPair) -> Result<(f64, f64)> {
    let nl = dot(&pair.ul, &pair.ul).sqrt();
    if nl < DEGENERACY_EPS {
        return Err(FusionError::DegenerateWindow);
    }
    let n0 = dot(&pair.ul, &pair.ur);
    let n1 = dot(&pair.ul, &pair.dur);
    let q0 = dot(&pair.ur, &pair.ur);
    let q1 = 2.0 * dot(&pair.ur, &pair.dur);
    let q2 = dot(&pair.dur, &pair.dur);

    // d/dt [ (n0 + n1 t) / sqrt(q0 + q1 t + q2 t^2) ] = 0 collapses to a
    // linear equation because the t^2 terms cancel:
    //   t (n1 q1 - 2 n0 q2) = n0 q1 - 2 n1 q0.
    let den = n1 * q1 - 2.0 * n0 * q2;
    let mut candidates = [0.0f64, -T_LIMIT, T_LIMIT, 0.0];
    let mut n_cand = 3;
    if den.abs() >= DEGENERACY_EPS {
        let t_stat = (n0 * q1 - 2.0 * n1 * q0) / den;
        if t_stat.is_finite() {
            candidates[3] = t_stat.clamp(-T_LIMIT, T_LIMIT);
            n_cand = 4;
        }
    }

    let mut best_t = 0.0;
    let mut best_v = f64::NEG_INFINITY;
    let mut any = false;
    for &t in &candidates[..n_cand] {
        if let Ok(v) = ecc(pair, t) {
            any = true;
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
    }
    if !any {
        return Err(FusionError::DegenerateWindow);
    }
    Ok((best_t, best_v))
}

/// EMCC as a function of t, with the correction split symmetrically:
/// left window shifted by -t/2 and right window by +t/2.
pub fn emcc(pair: &TaylorPatchPair, t: f64) -> Result<f64> {
    let f = emcc_as_rational(pair);
    let b = f.denominator(t);
    if b < DEGENERACY_EPS {
        return Err(FusionError::DegenerateWindow);
    }
    Ok(f.numerator(t) / b)
}

/// Expand the EMCC criterion into numerator/denominator quadratics in t.
pub fn emcc_as_rational(pair: &TaylorPatchPair) -> RationalQuadratic {
    let ll = dot(&pair.ul, &pair.ul);
    let rr = dot(&pair.ur, &pair.ur);
    let lr = dot(&pair.ul, &pair.ur);
    let l_dr = dot(&pair.ul, &pair.dur);
    let dl_r = dot(&pair.dul, &pair.ur);
    let dl_dr = dot(&pair.dul, &pair.dur);
    let l_dl = dot(&pair.ul, &pair.dul);
    let r_dr = dot(&pair.ur, &pair.dur);
    let dldl = dot(&pair.dul, &pair.dul);
    let drdr = dot(&pair.dur, &pair.dur);

    // 2 (uL - t/2 duL).(uR + t/2 duR)
    let a = [2.0 * lr, l_dr - dl_r, -dl_dr / 2.0];
    // |uL - t/2 duL|^2 + |uR + t/2 duR|^2
    let b = [ll + rr, r_dr - l_dl, (dldl + drdr) / 4.0];
    RationalQuadratic { a, b }
}

/// Maximize A(t)/B(t) over a closed interval via the derivative-numerator
/// roots c0 + c1 t + c2 t^2 with
///   c0 = a1 b0 - b1 a0,  c1 = 2 (a2 b0 - b2 a0),  c2 = a2 b1 - b2 a1.
/// The interior candidates are compared against the interval ends; for a
/// constant ratio the tie-break is t = 0.
pub fn maximize_rational_quadratic(f: &RationalQuadratic, lo: f64, hi: f64) -> (f64, f64) {
    let c0 = f.a[1] * f.b[0] - f.b[1] * f.a[0];
    let c1 = 2.0 * (f.a[2] * f.b[0] - f.b[2] * f.a[0]);
    let c2 = f.a[2] * f.b[1] - f.b[2] * f.a[1];

    let scale = c0.abs() + c1.abs() + c2.abs();
    let mut candidates: Vec<f64> = vec![0.0_f64.clamp(lo, hi), lo, hi];
    if scale > 0.0 {
        if c2.abs() > 1e-14 * scale {
            let disc = c1 * c1 - 4.0 * c0 * c2;
            if disc > 0.0 {
                let sq = disc.sqrt();
                // 2 c2 t + c1 = +sqrt(disc) marks the maximum; keep the
                // companion root as well so endpoint comparison stays exact.
                candidates.push((-c1 + sq) / (2.0 * c2));
                candidates.push((-c1 - sq) / (2.0 * c2));
            }
        } else if c1.abs() > 1e-14 * scale {
            candidates.push(-c0 / c1);
        }
    }

    let mut best_t = 0.0_f64.clamp(lo, hi);
    let mut best_v = f64::NEG_INFINITY;
    for &t in &candidates {
        if !(t >= lo && t <= hi) || !t.is_finite() {
            continue;
        }
        let v = f.eval(t);
        if v.is_finite() && v > best_v + 0.0 {
            best_v = v;
            best_t = t;
        }
    }
    (best_t, best_v)
}

/// Closed-form EMCC maximizer over [-T_LIMIT, T_LIMIT].
pub fn emcc_maximize(pair: &TaylorPatchPair) -> Result<(f64, f64)> {
    let f = emcc_as_rational(pair);
    if f.denominator_min(-T_LIMIT, T_LIMIT) < DEGENERACY_EPS {
        return Err(FusionError::DegenerateWindow);
    }
    Ok(maximize_rational_quadratic(&f, -T_LIMIT, T_LIMIT))
}

/// Element-wise aggregation weights applied to all four vectors.
/// The zero-mean property is intentionally not re-imposed.
pub fn apply_weights(pair: &TaylorPatchPair, w: &[f64]) -> Result<TaylorPatchPair> {
    if w.len() != pair.len() {
        return Err(FusionError::DimensionMismatch(format!(
            "weights length {} vs pair length {}",
            w.len(),
            pair.len()
        )));
    }
    let mul = |v: &[f64]| v.iter().zip(w).map(|(x, wi)| x * wi).collect();
    Ok(TaylorPatchPair {
        ul: mul(&pair.ul),
        ur: mul(&pair.ur),
        dul: mul(&pair.dul),
        dur: mul(&pair.dur),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_mean(v: &mut [f64]) {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    }

    pub(crate) fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> TaylorPatchPair {
        let mut ul: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut ur: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        zero_mean(&mut ul);
        zero_mean(&mut ur);
        let dul: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let dur: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        TaylorPatchPair { ul, ur, dul, dur }
    }

    fn grid_max<F: Fn(f64) -> Option<f64>>(f: F, step: f64) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        let n = (2.0 * T_LIMIT / step).round() as i64;
        for i in 0..=n {
            let t = -T_LIMIT + i as f64 * step;
            if let Some(v) = f(t) {
                if v > best.1 {
                    best = (t, v);
                }
            }
        }
        best
    }

    #[test]
    fn ecc_self_correlation_is_one() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let pair = TaylorPatchPair {
            ur: ul.clone(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
            ul,
        };
        assert!((ecc(&pair, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecc_anti_correlation_is_minus_one() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let pair = TaylorPatchPair {
            ur: ul.iter().map(|v| -v).collect(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
            ul,
        };
        assert!((ecc(&pair, 0.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecc_bounded_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let pair = random_pair(&mut rng, 25);
            let t = rng.gen::<f64>() * 2.0 * T_LIMIT - T_LIMIT;
            let v = ecc(&pair, t).unwrap();
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ecc_maximize_no_gradient_returns_zero() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let pair = TaylorPatchPair {
            ur: ul.clone(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
            ul,
        };
        let (t, v) = ecc_maximize(&pair).unwrap();
        assert_eq!(t, 0.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecc_maximize_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let pair = random_pair(&mut rng, 25);
            let (tc, vc) = ecc_maximize(&pair).unwrap();
            let (tg, vg) = grid_max(|t| ecc(&pair, t).ok(), 1e-4);
            assert!((vc - vg).abs() < 1e-6, "value {vc} vs grid {vg}");
            // t comparison only where the optimum is sharp
            let v_plus = ecc(&pair, (tg + 1e-3).min(T_LIMIT)).unwrap();
            if (vg - v_plus).abs() > 1e-9 {
                assert!((tc - tg).abs() <= 2e-4, "t {tc} vs grid {tg}");
            }
        }
    }

    #[test]
    fn ecc_improves_on_zero_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let pair = random_pair(&mut rng, 25);
            let (_, v) = ecc_maximize(&pair).unwrap();
            assert!(v >= ecc(&pair, 0.0).unwrap() - 1e-12);
        }
    }

    #[test]
    fn emcc_identical_patches_give_one() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let pair = TaylorPatchPair {
            ur: ul.clone(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
            ul,
        };
        assert!((emcc(&pair, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn emcc_at_zero_is_moravec_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let pair = random_pair(&mut rng, 25);
            let moravec = 2.0 * dot(&pair.ul, &pair.ur)
                / (dot(&pair.ul, &pair.ul) + dot(&pair.ur, &pair.ur));
            assert!((emcc(&pair, 0.0).unwrap() - moravec).abs() < 1e-12);
        }
    }

    #[test]
    fn emcc_bounded_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let pair = random_pair(&mut rng, 25);
            let t = rng.gen::<f64>() * 2.0 * T_LIMIT - T_LIMIT;
            let v = emcc(&pair, t).unwrap();
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rational_matches_emcc_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let pair = random_pair(&mut rng, 25);
            let f = emcc_as_rational(&pair);
            for i in 0..11 {
                let t = -1.0 + 0.2 * i as f64;
                if f.denominator(t) > DEGENERACY_EPS {
                    assert!((f.eval(t) - emcc(&pair, t).unwrap()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rational_constant_when_gradients_vanish() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let ur = vec![0.1, 0.0, -0.2, 0.3, -0.2];
        let pair = TaylorPatchPair {
            ul: ul.clone(),
            ur: ur.clone(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
        };
        let f = emcc_as_rational(&pair);
        assert_eq!(f.a[1], 0.0);
        assert_eq!(f.a[2], 0.0);
        assert_eq!(f.b[1], 0.0);
        assert_eq!(f.b[2], 0.0);
        assert!((f.a[0] - 2.0 * dot(&ul, &ur)).abs() < 1e-12);
        assert!((f.b[0] - (dot(&ul, &ul) + dot(&ur, &ur))).abs() < 1e-12);
    }

    #[test]
    fn rational_homogeneous_under_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = random_pair(&mut rng, 25);
        let k = 3.7;
        let scaled = TaylorPatchPair {
            ul: pair.ul.iter().map(|v| v * k).collect(),
            ur: pair.ur.iter().map(|v| v * k).collect(),
            dul: pair.dul.iter().map(|v| v * k).collect(),
            dur: pair.dur.iter().map(|v| v * k).collect(),
        };
        let f = emcc_as_rational(&pair);
        let g = emcc_as_rational(&scaled);
        for i in 0..3 {
            assert!((g.a[i] - k * k * f.a[i]).abs() < 1e-9 * (1.0 + f.a[i].abs() * k * k));
            assert!((g.b[i] - k * k * f.b[i]).abs() < 1e-9 * (1.0 + f.b[i].abs() * k * k));
        }
        assert!((f.eval(0.3) - g.eval(0.3)).abs() < 1e-10);
    }

    #[test]
    fn concave_parabola_maximized_at_zero() {
        let f = RationalQuadratic {
            a: [1.0, 0.0, -1.0],
            b: [1.0, 0.0, 0.0],
        };
        let (t, v) = maximize_rational_quadratic(&f, -1.0, 1.0);
        assert_eq!(t, 0.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn linear_derivative_path_matches_grid() {
        // f = t / (1 + t^2): c2 = 0 never fires here (c2 = -1), but the
        // stationary points sit exactly at the interval ends.
        let f = RationalQuadratic {
            a: [0.0, 1.0, 0.0],
            b: [1.0, 0.0, 1.0],
        };
        let (tc, vc) = maximize_rational_quadratic(&f, -1.0, 1.0);
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut t = -1.0;
        while t <= 1.0 {
            let v = f.eval(t);
            if v > best.1 {
                best = (t, v);
            }
            t += 1e-5;
        }
        assert!((vc - best.1).abs() < 1e-4);
        assert!((tc - best.0).abs() < 1e-4);
    }

    #[test]
    fn random_rationals_match_grid_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tested = 0;
        while tested < 2000 {
            let a = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            let b = [rng.gen::<f64>() + 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            let f = RationalQuadratic { a, b };
            if f.denominator_min(-1.0, 1.0) < 0.05 {
                continue;
            }
            tested += 1;
            let (_, vc) = maximize_rational_quadratic(&f, -1.0, 1.0);
            let mut vg = f64::NEG_INFINITY;
            for i in 0..=20_000 {
                let t = -1.0 + i as f64 * 1e-4;
                vg = vg.max(f.eval(t));
            }
            assert!((vc - vg).abs() < 1e-6, "closed {vc} vs grid {vg}");
        }
    }

    #[test]
    fn proposition_second_derivative_signs() {
        // At the derivative-numerator roots, the curvature signs follow
        // sqrt(disc)/B^2: negative at t0, positive at t1.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tested = 0;
        while tested < 2000 {
            let a = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            let b = [rng.gen::<f64>() + 1.0, rng.gen::<f64>() - 0.5, rng.gen::<f64>().abs() * 0.3];
            let f = RationalQuadratic { a, b };
            let c0 = f.a[1] * f.b[0] - f.b[1] * f.a[0];
            let c1 = 2.0 * (f.a[2] * f.b[0] - f.b[2] * f.a[0]);
            let c2 = f.a[2] * f.b[1] - f.b[2] * f.a[1];
            let disc = c1 * c1 - 4.0 * c0 * c2;
            if c2.abs() < 1e-6 || disc <= 1e-8 {
                continue;
            }
            // f'(t) = (c0 + c1 t + c2 t^2) / B(t)^2 and f''(root) =
            // (c1 + 2 c2 root) / B^2 = -+ sqrt(disc) / B^2, so the
            // -sqrt branch is the maximum for either sign of c2.
            let t0 = (-c1 - disc.sqrt()) / (2.0 * c2);
            let t1 = (-c1 + disc.sqrt()) / (2.0 * c2);
            if f.denominator(t0).abs() < 0.05 || f.denominator(t1).abs() < 0.05 {
                continue;
            }
            // keep only roots where the exact curvature sqrt(disc)/B^2
            // dominates the finite-difference noise floor
            if t0.abs() > 10.0
                || t1.abs() > 10.0
                || disc.sqrt() / f.denominator(t0).powi(2) < 1e-3
                || disc.sqrt() / f.denominator(t1).powi(2) < 1e-3
            {
                continue;
            }
            tested += 1;
            let h = 1e-5;
            let d2 = |t: f64| (f.eval(t + h) - 2.0 * f.eval(t) + f.eval(t - h)) / (h * h);
            assert!(d2(t0) < 0.0, "expected maximum at t0");
            assert!(d2(t1) > 0.0, "expected minimum at t1");
        }
    }

    #[test]
    fn emcc_maximize_gradient_free_ties_to_zero() {
        let ul = vec![0.2, -0.1, -0.1, 0.3, -0.3];
        let pair = TaylorPatchPair {
            ur: ul.clone(),
            dul: vec![0.0; 5],
            dur: vec![0.0; 5],
            ul,
        };
        let (t, v) = emcc_maximize(&pair).unwrap();
        assert_eq!(t, 0.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn emcc_maximize_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let pair = random_pair(&mut rng, 25);
            let (tc, vc) = emcc_maximize(&pair).unwrap();
            let (tg, vg) = grid_max(|t| emcc(&pair, t).ok(), 1e-4);
            assert!((vc - vg).abs() < 1e-6, "value {vc} vs grid {vg}");
            let v_plus = emcc(&pair, (tg + 1e-3).min(T_LIMIT)).unwrap();
            if (vg - v_plus).abs() > 1e-9 {
                assert!((tc - tg).abs() <= 2e-4);
            }
            assert!(vc >= emcc(&pair, 0.0).unwrap() - 1e-12);
        }
    }

    #[test]
    fn scale_invariance_of_both_criteria() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let pair = random_pair(&mut rng, 25);
            let k = 10.0_f64.powf(rng.gen::<f64>() * 2.0 - 1.0);
            let scaled = TaylorPatchPair {
                ul: pair.ul.iter().map(|v| v * k).collect(),
                ur: pair.ur.iter().map(|v| v * k).collect(),
                dul: pair.dul.iter().map(|v| v * k).collect(),
                dur: pair.dur.iter().map(|v| v * k).collect(),
            };
            let t = rng.gen::<f64>() * 1.8 - 0.9;
            assert!((ecc(&pair, t).unwrap() - ecc(&scaled, t).unwrap()).abs() < 1e-10);
            assert!((emcc(&pair, t).unwrap() - emcc(&scaled, t).unwrap()).abs() < 1e-10);
            let (ta, va) = emcc_maximize(&pair).unwrap();
            let (tb, vb) = emcc_maximize(&scaled).unwrap();
            assert!((ta - tb).abs() < 1e-10);
            assert!((va - vb).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_identity_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pair = random_pair(&mut rng, 9);
        let same = apply_weights(&pair, &vec![1.0; 9]).unwrap();
        assert_eq!(same.ul, pair.ul);
        assert_eq!(same.dur, pair.dur);
        assert!(apply_weights(&pair, &vec![1.0; 8]).is_err());
    }

    #[test]
    fn center_only_weights_degenerate_downstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let pair = random_pair(&mut rng, 9);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let masked = apply_weights(&pair, &w).unwrap();
        // zero-mean vectors keep a single sample, norms can survive, but
        // the Pearson normalization of a one-sample window is meaningless;
        // the criterion itself stays bounded while energies saturate.
        match ecc(&masked, 0.0) {
            Ok(v) => assert!(v.abs() <= 1.0 + 1e-12),
            Err(FusionError::DegenerateWindow) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn half_window_weights_equal_masked_subvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pair = random_pair(&mut rng, 10);
        let w: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let weighted = apply_weights(&pair, &w).unwrap();
        let sub = TaylorPatchPair {
            ul: pair.ul[..5].to_vec(),
            ur: pair.ur[..5].to_vec(),
            dul: pair.dul[..5].to_vec(),
            dur: pair.dur[..5].to_vec(),
        };
        let t = 0.37;
        assert!((ecc(&weighted, t).unwrap() - ecc(&sub, t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn synthetic_subpixel_shift_recovered() {
        // Smooth 1-D cubic profile sampled at shifted positions; the
        // closed-form t should land near the true residual shift.
        let s = |x: f64| 0.5 + 0.3 * (x / 3.0).sin() + 0.1 * (x / 7.0).cos();
        let n = 41;
        let shift = 0.3;
        let mut ul: Vec<f64> = (0..n).map(|i| s(i as f64)).collect();
        let mut ur: Vec<f64> = (0..n).map(|i| s(i as f64 - shift)).collect();
        zero_mean(&mut ul);
        zero_mean(&mut ur);
        let dur: Vec<f64> = (0..n)
            .map(|i| (s(i as f64 + 1.0 - shift) - s(i as f64 - 1.0 - shift)) / 2.0)
            .collect();
        let dul: Vec<f64> = (0..n)
            .map(|i| (s(i as f64 + 1.0) - s(i as f64 - 1.0)) / 2.0)
            .collect();
        let pair = TaylorPatchPair { ul, ur, dul, dur };
        let (t_ecc, _) = ecc_maximize(&pair).unwrap();
        assert!((t_ecc - shift).abs() < 0.05, "ecc t* = {t_ecc}");
        let (t_emcc, _) = emcc_maximize(&pair).unwrap();
        assert!((t_emcc - shift).abs() < 0.05, "emcc t* = {t_emcc}");
    }
}
