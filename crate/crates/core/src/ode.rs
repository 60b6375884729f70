//! Dormand–Prince 8(5,3) with its seventh-order continuous extension.
//!
//! The eighth-order solution is propagated, the error estimate blends the
//! embedded fifth- and third-order solutions, the last stage is reused (FSAL)
//! and the step size follows a plain I-controller. Error norms are RMS over
//! `abs_tol + rel_tol * max(|y0|, |y1|)`. Integration may run forward or
//! backward in time.

use crate::error::{Error, Result};

const A21: f64 = 0.05260015195876773;

const A31: f64 = 0.0197250569845379;
const A32: f64 = 0.0591751709536137;

const A41: f64 = 0.02958758547680685;
const A43: f64 = 0.08876275643042054;

const A51: f64 = 0.2413651341592667;
const A53: f64 = -0.8845494793282861;
const A54: f64 = 0.924834003261792;

const A61: f64 = 0.037037037037037035;
const A64: f64 = 0.17082860872947386;
const A65: f64 = 0.12546768756682242;

const A71: f64 = 0.037109375;
const A74: f64 = 0.17025221101954405;
const A75: f64 = 0.06021653898045596;
const A76: f64 = -0.017578125;

const A81: f64 = 0.03709200011850479;
const A84: f64 = 0.17038392571223998;
const A85: f64 = 0.10726203044637328;
const A86: f64 = -0.015319437748624402;
const A87: f64 = 0.008273789163814023;

const A91: f64 = 0.6241109587160757;
const A94: f64 = -3.3608926294469414;
const A95: f64 = -0.868219346841726;
const A96: f64 = 27.59209969944671;
const A97: f64 = 20.154067550477894;
const A98: f64 = -43.48988418106996;

const A101: f64 = 0.47766253643826434;
const A104: f64 = -2.4881146199716677;
const A105: f64 = -0.590290826836843;
const A106: f64 = 21.230051448181193;
const A107: f64 = 15.279233632882423;
const A108: f64 = -33.28821096898486;
const A109: f64 = -0.020331201708508627;

const A111: f64 = -0.9371424300859873;
const A114: f64 = 5.186372428844064;
const A115: f64 = 1.0914373489967295;
const A116: f64 = -8.149787010746927;
const A117: f64 = -18.52006565999696;
const A118: f64 = 22.739487099350505;
const A119: f64 = 2.4936055526796523;
const A1110: f64 = -3.0467644718982196;

const A121: f64 = 2.273310147516538;
const A124: f64 = -10.53449546673725;
const A125: f64 = -2.0008720582248625;
const A126: f64 = -17.9589318631188;
const A127: f64 = 27.94888452941996;
const A128: f64 = -2.8589982771350235;
const A129: f64 = -8.87285693353063;
const A1210: f64 = 12.360567175794303;
const A1211: f64 = 0.6433927460157636;

const A141: f64 = 0.056167502283047954;
const A147: f64 = 0.25350021021662483;
const A148: f64 = -0.2462390374708025;
const A149: f64 = -0.12419142326381637;
const A1410: f64 = 0.15329179827876568;
const A1411: f64 = 0.00820105229563469;
const A1412: f64 = 0.007567897660545699;
const A1413: f64 = -0.008298;

const A151: f64 = 0.03183464816350214;
const A156: f64 = 0.028300909672366776;
const A157: f64 = 0.053541988307438566;
const A158: f64 = -0.05492374857139099;
const A1511: f64 = -0.00010834732869724932;
const A1512: f64 = 0.0003825710908356584;
const A1513: f64 = -0.00034046500868740456;
const A1514: f64 = 0.1413124436746325;

const A161: f64 = -0.42889630158379194;
const A166: f64 = -4.697621415361164;
const A167: f64 = 7.683421196062599;
const A168: f64 = 4.06898981839711;
const A169: f64 = 0.3567271874552811;
const A1613: f64 = -0.0013990241651590145;
const A1614: f64 = 2.9475147891527724;
const A1615: f64 = -9.15095847217987;

const B1: f64 = 0.054293734116568765;
const B6: f64 = 4.450312892752409;
const B7: f64 = 1.8915178993145003;
const B8: f64 = -5.801203960010585;
const B9: f64 = 0.3111643669578199;
const B10: f64 = -0.1521609496625161;
const B11: f64 = 0.20136540080403034;
const B12: f64 = 0.04471061572777259;
const BHH1: f64 = 0.2440944881889764;
const BHH2: f64 = 0.7338466882816118;
const BHH3: f64 = 0.022058823529411766;

const C2: f64 = 0.05260015195876773;
const C3: f64 = 0.0789002279381516;
const C4: f64 = 0.1183503419072274;
const C5: f64 = 0.2816496580927726;
const C6: f64 = 0.3333333333333333;
const C7: f64 = 0.25;
const C8: f64 = 0.3076923076923077;
const C9: f64 = 0.6512820512820513;
const C10: f64 = 0.6;
const C11: f64 = 0.8571428571428571;
const C14: f64 = 0.1;
const C15: f64 = 0.2;
const C16: f64 = 0.7777777777777778;

const ER1: f64 = 0.01312004499419488;
const ER6: f64 = -1.2251564463762044;
const ER7: f64 = -0.4957589496572502;
const ER8: f64 = 1.6643771824549864;
const ER9: f64 = -0.35032884874997366;
const ER10: f64 = 0.3341791187130175;
const ER11: f64 = 0.08192320648511571;
const ER12: f64 = -0.022355307863886294;

const D41: f64 = -8.428938276109013;
const D46: f64 = 0.5667149535193777;
const D47: f64 = -3.0689499459498917;
const D48: f64 = 2.38466765651207;
const D49: f64 = 2.117034582445028;
const D410: f64 = -0.871391583777973;
const D411: f64 = 2.2404374302607883;
const D412: f64 = 0.6315787787694688;
const D413: f64 = -0.08899033645133331;
const D414: f64 = 18.148505520854727;
const D415: f64 = -9.194632392478356;
const D416: f64 = -4.436036387594894;
const D51: f64 = 10.427508642579134;
const D56: f64 = 242.28349177525817;
const D57: f64 = 165.20045171727028;
const D58: f64 = -374.5467547226902;
const D59: f64 = -22.113666853125306;
const D510: f64 = 7.733432668472264;
const D511: f64 = -30.674084731089398;
const D512: f64 = -9.332130526430229;
const D513: f64 = 15.697238121770845;
const D514: f64 = -31.139403219565178;
const D515: f64 = -9.35292435884448;
const D516: f64 = 35.81684148639408;
const D61: f64 = 19.985053242002433;
const D66: f64 = -387.0373087493518;
const D67: f64 = -189.17813819516758;
const D68: f64 = 527.8081592054236;
const D69: f64 = -11.57390253995963;
const D610: f64 = 6.8812326946963;
const D611: f64 = -1.0006050966910838;
const D612: f64 = 0.7777137798053443;
const D613: f64 = -2.778205752353508;
const D614: f64 = -60.19669523126412;
const D615: f64 = 84.32040550667716;
const D616: f64 = 11.99229113618279;
const D71: f64 = -25.69393346270375;
const D76: f64 = -154.18974869023643;
const D77: f64 = -231.5293791760455;
const D78: f64 = 357.6391179106141;
const D79: f64 = 93.40532418362432;
const D710: f64 = -37.45832313645163;
const D711: f64 = 104.0996495089623;
const D712: f64 = 29.8402934266605;
const D713: f64 = -43.53345659001114;
const D714: f64 = 96.32455395918828;
const D715: f64 = -39.17726167561544;
const D716: f64 = -149.72683625798564;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 1.0 / 3.0;
const FAC_MAX: f64 = 6.0;
const MAX_STEPS: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
    /// Largest normalised error estimate among accepted steps (at most 1).
    pub max_error: f64,
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 7],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at `t0 + theta * h`, `theta` in `[0, 1]`.
    pub fn at_fraction(&self, theta: f64) -> [f64; N] {
        let s = theta;
        let s1 = 1.0 - theta;
        let [c2, c3, c4, c5, c6, c7, c8] = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            let conpar = c5[i] + s * (c6[i] + s1 * (c7[i] + s * c8[i]));
            out[i] = self.y0[i] + s * (c2[i] + s1 * (c3[i] + s * (c4[i] + s1 * conpar)));
        }
        out
    }

    pub fn at(&self, t: f64) -> [f64; N] {
        self.at_fraction((t - self.t0) / self.h)
    }
}

/// An accepted step as seen by the observer. The continuous extension costs
/// three extra right-hand-side evaluations and is built on first request.
pub struct Step<'a, const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    /// Slopes at both ends.
    pub f0: [f64; N],
    pub f1: [f64; N],
    stages: [[f64; N]; 7],
    rhs: &'a mut dyn FnMut(f64, &[f64; N]) -> [f64; N],
    evaluations: u64,
    dense: Option<DenseStep<N>>,
}

impl<const N: usize> Step<'_, N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn dense(&mut self) -> &DenseStep<N> {
        if self.dense.is_none() {
            let built = self.build_dense();
            self.dense = Some(built);
        }
        self.dense.as_ref().expect("built above")
    }

    fn build_dense(&mut self) -> DenseStep<N> {
        let (t, hs, y, y1) = (self.t0, self.h, self.y0, self.y1);
        let k1 = self.f0;
        let k13 = self.f1;
        let [k6, k7, k8, k9, k10, k11, k12] = self.stages;
        let rhs = &mut *self.rhs;
        let k14 = rhs(
            t + C14 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A141, &k1),
                    (A147, &k7),
                    (A148, &k8),
                    (A149, &k9),
                    (A1410, &k10),
                    (A1411, &k11),
                    (A1412, &k12),
                    (A1413, &k13),
                ],
            ),
        );
        let k15 = rhs(
            t + C15 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A151, &k1),
                    (A156, &k6),
                    (A157, &k7),
                    (A158, &k8),
                    (A1511, &k11),
                    (A1512, &k12),
                    (A1513, &k13),
                    (A1514, &k14),
                ],
            ),
        );
        let k16 = rhs(
            t + C16 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A161, &k1),
                    (A166, &k6),
                    (A167, &k7),
                    (A168, &k8),
                    (A169, &k9),
                    (A1613, &k13),
                    (A1614, &k14),
                    (A1615, &k15),
                ],
            ),
        );
        self.evaluations += 3;

        let ks = [
            &k1, &k6, &k7, &k8, &k9, &k10, &k11, &k12, &k13, &k14, &k15, &k16,
        ];
        let d = [
            [
                D41, D46, D47, D48, D49, D410, D411, D412, D413, D414, D415, D416,
            ],
            [
                D51, D56, D57, D58, D59, D510, D511, D512, D513, D514, D515, D516,
            ],
            [
                D61, D66, D67, D68, D69, D610, D611, D612, D613, D614, D615, D616,
            ],
            [
                D71, D76, D77, D78, D79, D710, D711, D712, D713, D714, D715, D716,
            ],
        ];
        let mut cont = [[0.0; N]; 7];
        for i in 0..N {
            let diff = y1[i] - y[i];
            let bspl = hs * k1[i] - diff;
            cont[0][i] = diff;
            cont[1][i] = bspl;
            cont[2][i] = diff - hs * k13[i] - bspl;
            for (row, coeffs) in d.iter().enumerate() {
                let s: f64 = coeffs.iter().zip(ks.iter()).map(|(c, k)| c * k[i]).sum();
                cont[3 + row][i] = hs * s;
            }
        }
        DenseStep {
            t0: t,
            h: hs,
            y0: y,
            y1,
            cont,
        }
    }
}

fn combine<const N: usize>(terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = [0.0; N];
    for (i, o) in out.iter_mut().enumerate() {
        *o = terms.iter().map(|(c, k)| c * k[i]).sum();
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let s = combine(terms);
    let mut out = *y;
    for i in 0..N {
        out[i] += h * s[i];
    }
    out
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    tol: &Tolerance,
) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    h_max: f64,
    tol: &Tolerance,
) -> f64 {
    let zero = [0.0; N];
    let d0 = error_norm(y0, &zero, y0, tol);
    let d1 = error_norm(f0, &zero, y0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(h_max);
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let f1 = f(t0 + dir * h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = error_norm(&diff, &zero, y0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(h_max)
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t_end`, calling `observer` on
/// every accepted step. `max_step(t)` caps the step magnitude at time `t`.
pub fn solve<const N: usize, F, S, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerance,
    max_step: S,
    mut observer: O,
) -> Result<([f64; N], Stats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: Fn(f64) -> f64,
    O: FnMut(&mut Step<N>),
{
    let mut stats = Stats::default();
    if t_end == t0 {
        return Ok((y0, stats));
    }
    let dir = (t_end - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, dir, max_step(t), tol);
    stats.evaluations += 1;
    let mut last_rejected = false;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return Ok((y, stats));
        }
        h = h.min(max_step(t)).min(remaining);
        if remaining - h <= 1e-12 * t.abs().max(1.0) {
            h = remaining;
        }
        if h < 1e-14 * t.abs().max(1.0) || stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::StepFailure { t, h });
        }
        let hs = dir * h;

        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + C6 * hs,
            &axpy(&y, hs, &[(A61, &k1), (A64, &k4), (A65, &k5)]),
        );
        let k7 = f(
            t + C7 * hs,
            &axpy(&y, hs, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
        );
        let k8 = f(
            t + C8 * hs,
            &axpy(
                &y,
                hs,
                &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
            ),
        );
        let k9 = f(
            t + C9 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A91, &k1),
                    (A94, &k4),
                    (A95, &k5),
                    (A96, &k6),
                    (A97, &k7),
                    (A98, &k8),
                ],
            ),
        );
        let k10 = f(
            t + C10 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A101, &k1),
                    (A104, &k4),
                    (A105, &k5),
                    (A106, &k6),
                    (A107, &k7),
                    (A108, &k8),
                    (A109, &k9),
                ],
            ),
        );
        let k11 = f(
            t + C11 * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        );
        let t1 = if h == remaining { t_end } else { t + hs };
        let k12 = f(
            t1,
            &axpy(
                &y,
                hs,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
        );
        stats.evaluations += 11;

        let b = combine(&[
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let e5 = combine(&[
            (ER1, &k1),
            (ER6, &k6),
            (ER7, &k7),
            (ER8, &k8),
            (ER9, &k9),
            (ER10, &k10),
            (ER11, &k11),
            (ER12, &k12),
        ]);
        let mut y1 = y;
        let mut e3 = [0.0; N];
        for i in 0..N {
            y1[i] += hs * b[i];
            e3[i] = b[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        }
        let n5 = error_norm(&e5, &y, &y1, tol).powi(2);
        let n3 = error_norm(&e3, &y, &y1, tol).powi(2);
        let deno = if n5 + 0.01 * n3 > 0.0 {
            n5 + 0.01 * n3
        } else {
            1.0
        };
        let en = h * n5 / deno.sqrt();
        if !en.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }
        let mut fac = if en == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * en.powf(-1.0 / 8.0)).clamp(FAC_MIN, FAC_MAX)
        };

        if en <= 1.0 {
            let k13 = f(t1, &y1);
            stats.evaluations += 1;
            let mut step = Step {
                t0: t,
                h: hs,
                y0: y,
                y1,
                f0: k1,
                f1: k13,
                stages: [k6, k7, k8, k9, k10, k11, k12],
                rhs: &mut f,
                evaluations: 0,
                dense: None,
            };
            observer(&mut step);
            stats.evaluations += step.evaluations;
            stats.accepted += 1;
            stats.max_error = stats.max_error.max(en);
            t = t1;
            y = y1;
            k1 = k13;
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
        } else {
            stats.rejected += 1;
            last_rejected = true;
        }
        h *= fac;
    }
}
