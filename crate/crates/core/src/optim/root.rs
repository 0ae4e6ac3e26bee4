use crate::error::{Error, Result};
use crate::scalar::Scalar;

const FIRST_STEP: f64 = 0.1;
const MAX_EXPANSION: f64 = 50.0;

/// Finds `x` with `|f(x)| <= tol`. The bracket grows geometrically on both
/// sides of `init` (out to +/-50) until `f` changes sign, then Brent's
/// method shrinks it.
pub fn solve_scalar_root<F, G>(mut f: G, init: F, tol: F) -> Result<F>
where
    F: Scalar,
    G: FnMut(F) -> Result<F>,
{
    let f0 = f(init)?;
    if f0.abs() <= tol {
        return Ok(init);
    }
    let limit = F::lit(MAX_EXPANSION);
    let mut step = F::lit(FIRST_STEP);
    let (mut right, mut f_right) = (init, f0);
    let (mut left, mut f_left) = (init, f0);
    loop {
        let r = init + step;
        let fr = f(r)?;
        if fr.abs() <= tol {
            return Ok(r);
        }
        if fr.signum() != f_right.signum() {
            return brent(&mut f, right, r, f_right, fr, tol);
        }
        (right, f_right) = (r, fr);

        let l = init - step;
        let fl = f(l)?;
        if fl.abs() <= tol {
            return Ok(l);
        }
        if fl.signum() != f_left.signum() {
            return brent(&mut f, l, left, fl, f_left, tol);
        }
        (left, f_left) = (l, fl);

        if step >= limit {
            return Err(Error::NoSignChange {
                init: init.to_f64().unwrap_or(f64::NAN),
                limit: MAX_EXPANSION,
            });
        }
        step = (step + step).min(limit);
    }
}

fn brent<F, G>(f: &mut G, a0: F, b0: F, fa0: F, fb0: F, tol: F) -> Result<F>
where
    F: Scalar,
    G: FnMut(F) -> Result<F>,
{
    let two = F::lit(2.0);
    let three = F::lit(3.0);
    let half = F::lit(0.5);
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb.abs() <= tol {
            return Ok(b);
        }
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let width_tol = two * F::epsilon() * b.abs() + F::min_positive_value();
        let m = half * (c - b);
        if m.abs() <= width_tol {
            // bracket at machine resolution
            return Ok(b);
        }
        if e.abs() >= width_tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = F::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - F::one()));
                q = (qa - F::one()) * (r - F::one()) * (s - F::one());
            }
            if p > F::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (width_tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > width_tol { b + d } else { b + width_tol * m.signum() };
        fb = f(b)?;
    }
    Ok(b)
}
