//! Adaptive Dormand-Prince 8(5,3) integration of a complex second-order
//! linear system written as `(y, y')`, with exact power-of-two rescaling to
//! keep exponentially growing solutions representable.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

pub type State = [Complex64; 2];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at s = {at}")]
    StepSizeUnderflow { at: f64 },
    #[error("step budget exhausted at s = {at}")]
    TooManySteps { at: f64 },
    #[error("non-finite state at s = {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// Integrator state carried across consecutive segments.
#[derive(Debug, Clone, Copy)]
pub struct Marcher {
    pub tol: Tolerances,
    /// The true solution is `state * exp(ln_scale)`.
    pub ln_scale: f64,
    step_hint: Option<f64>,
    pub steps: usize,
}

const RESCALE_ABOVE: f64 = 1e100;
const RESCALE_EXP: i32 = -332;
const MAX_STEPS: usize = 2_000_000;

impl Marcher {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, ln_scale: 0.0, step_hint: None, steps: 0 }
    }

    /// Advance `state` from `s0` to `s1` under `rhs(s, state)`.
    pub fn advance(
        &mut self,
        rhs: &mut impl FnMut(f64, &State) -> State,
        s0: f64,
        s1: f64,
        mut state: State,
    ) -> Result<State, OdeError> {
        let span = s1 - s0;
        if span == 0.0 {
            return Ok(state);
        }
        let dir = span.signum();
        let min_step = 1e-14 * span.abs().max(s0.abs()).max(s1.abs()).max(1e-300);
        let mut h = self.step_hint.map(|h| h.abs()).unwrap_or(span.abs() / 64.0).min(span.abs()) * dir;
        let mut s = s0;
        let mut k1 = rhs(s, &state);
        let mut last_rejected = false;
        loop {
            if (s1 - s) * dir <= 0.0 {
                break;
            }
            if self.steps > MAX_STEPS {
                return Err(OdeError::TooManySteps { at: s });
            }
            let mut clipped = false;
            if (s + h - s1) * dir > 0.0 {
                h = s1 - s;
                clipped = true;
            }
            let (y_new, k_new, err) = dop853_step(rhs, s, &state, &k1, h, &self.tol);
            if !err.is_finite() {
                h *= 0.25;
                if h.abs() < min_step {
                    return Err(OdeError::NonFinite { at: s });
                }
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(0.125);
            if err <= 1.0 {
                s = if clipped { s1 } else { s + h };
                state = y_new;
                k1 = k_new;
                self.steps += 1;
                let big = state[0].norm().max(state[1].norm());
                if big > RESCALE_ABOVE {
                    let f = 2f64.powi(RESCALE_EXP);
                    state = [state[0] * f, state[1] * f];
                    k1 = [k1[0] * f, k1[1] * f];
                    self.ln_scale -= f64::from(RESCALE_EXP) * std::f64::consts::LN_2;
                }
                let mut fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
                if last_rejected {
                    fac = fac.max(1.0);
                }
                let h_new = h / fac;
                if !clipped || h_new.abs() < h.abs() {
                    h = h_new;
                }
                if !clipped {
                    self.step_hint = Some(h);
                }
                last_rejected = false;
            } else {
                h /= (fac11 / 0.9).min(1.0 / 0.333);
                last_rejected = true;
                if h.abs() < min_step {
                    return Err(OdeError::StepSizeUnderflow { at: s });
                }
            }
        }
        if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OdeError::NonFinite { at: s1 });
        }
        Ok(state)
    }

    pub fn rescale(&mut self, state: State) -> State {
        let big = state[0].norm().max(state[1].norm());
        if big > RESCALE_ABOVE {
            let f = 2f64.powi(RESCALE_EXP);
            self.ln_scale -= f64::from(RESCALE_EXP) * std::f64::consts::LN_2;
            [state[0] * f, state[1] * f]
        } else {
            state
        }
    }
}

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (coef, k) in terms {
        let w = coef * h;
        out[0] += k[0] * w;
        out[1] += k[1] * w;
    }
    out
}

/// One DOP853 step. Returns the new state, the derivative there (FSAL) and
/// the scaled error norm.
fn dop853_step(
    rhs: &mut impl FnMut(f64, &State) -> State,
    s: f64,
    y: &State,
    k1: &State,
    h: f64,
    tol: &Tolerances,
) -> (State, State, f64) {
    let k2 = rhs(s + C2 * h, &axpy(y, &[(A21, k1)], h));
    let k3 = rhs(s + C3 * h, &axpy(y, &[(A31, k1), (A32, &k2)], h));
    let k4 = rhs(s + C4 * h, &axpy(y, &[(A41, k1), (A43, &k3)], h));
    let k5 = rhs(s + C5 * h, &axpy(y, &[(A51, k1), (A53, &k3), (A54, &k4)], h));
    let k6 = rhs(s + C6 * h, &axpy(y, &[(A61, k1), (A64, &k4), (A65, &k5)], h));
    let k7 = rhs(s + C7 * h, &axpy(y, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)], h));
    let k8 = rhs(s + C8 * h, &axpy(y, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)], h));
    let k9 = rhs(s + C9 * h, &axpy(y, &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)], h));
    let k10 = rhs(
        s + C10 * h,
        &axpy(y, &[(A101, k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)], h),
    );
    let k11 = rhs(
        s + C11 * h,
        &axpy(
            y,
            &[(A111, k1), (A114, &k4), (A115, &k5), (A116, &k6), (A117, &k7), (A118, &k8), (A119, &k9), (A1110, &k10)],
            h,
        ),
    );
    let k12 = rhs(
        s + h,
        &axpy(
            y,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
            h,
        ),
    );
    let incr = axpy(
        &[Complex64::default(); 2],
        &[(B1, k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k11), (B12, &k12)],
        1.0,
    );
    let y_new = [y[0] + incr[0] * h, y[1] + incr[1] * h];

    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..2 {
        let sk = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
        let e2 = incr[i] - k1[i] * BHH1 - k9[i] * BHH2 - k12[i] * BHH3;
        err2 += (e2.norm() / sk).powi(2);
        let e = k1[i] * ER1
            + k6[i] * ER6
            + k7[i] * ER7
            + k8[i] * ER8
            + k9[i] * ER9
            + k10[i] * ER10
            + k11[i] * ER11
            + k12[i] * ER12;
        err += (e.norm() / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err * (1.0 / (deno * 2.0)).sqrt();
    let k_new = rhs(s + h, &y_new);
    (y_new, k_new, err)
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances { rtol: 1e-12, atol: 1e-14 }
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let mut m = Marcher::new(tol());
        let mut rhs = |_s: f64, y: &State| [y[1], -y[0]];
        let out = m.advance(&mut rhs, 0.0, 10.0, [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert!((out[0].re - 10f64.sin()).abs() < 1e-10);
        assert!((out[1].re - 10f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn growth_beyond_f64_range_is_rescaled() {
        let mut m = Marcher::new(tol());
        let k = 400.0;
        let mut rhs = |_s: f64, y: &State| [y[1], y[0] * (k * k)];
        let out = m.advance(&mut rhs, 0.0, 2.0, [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        // y = sinh(k s)/k, so log y(2) = 800 - ln(2k)
        let log_y = out[0].norm().ln() + m.ln_scale;
        assert!((log_y - (800.0 - (2.0 * k).ln())).abs() < 1e-9);
        assert!(((out[1] / out[0]).re - k).abs() < 1e-9);
    }

    #[test]
    fn integrates_backwards() {
        let mut m = Marcher::new(tol());
        let mut rhs = |_s: f64, y: &State| [y[1], y[0]];
        let one = Complex64::new(1.0, 0.0);
        let out = m.advance(&mut rhs, 1.0, 0.0, [one, one]).unwrap();
        assert!((out[0].re - (-1f64).exp()).abs() < 1e-12);
    }
}
