//! Extended-precision brute-force pair sums, written against the cosine form
//! of the interference terms so they share no code with the library kernels.

#![allow(dead_code)]

use twofloat::{consts::PI, TwoFloat};

use talbot_core::Model;

fn tf(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

/// `(ρ, J)` at `(x, z)` in double-double arithmetic.
pub fn brute_force_pair_sums(model: &Model, x: f64, z: f64, lambda: f64) -> (f64, f64) {
    let n = model.n_slits();
    let k = tf(2.0) * PI / tf(model.lambda_db());
    let s0 = tf(model.sigma0());
    let (x, z, lam) = (tf(x), tf(z), tf(lambda));
    let spread = tf(2.0) * k * s0 * s0;
    let ratio = z / spread;
    let sz2 = s0 * s0 * (tf(1.0) + ratio * ratio);
    let pc = z / (tf(8.0) * k * s0 * s0 * sz2);
    let d = tf(model.period());
    let centre = tf((n as f64 - 1.0) / 2.0);

    let mut rho = tf(0.0);
    let mut num = tf(0.0);
    for a in 0..n {
        let xa = (tf(a as f64) - centre) * d;
        let ua = (x - xa) * (x - xa);
        for b in 0..n {
            let xb = (tf(b as f64) - centre) * d;
            let ub = (x - xb) * (x - xb);
            let phi = pc * (ua - ub);
            let beta = (ua + ub) / (tf(4.0) * sz2);
            let damp = (-(lam * z * (xa - xb) * (xa - xb))).exp();
            let w = (-beta).exp() * damp;
            rho += phi.cos() * w;
            num += (z * phi.cos() - spread * phi.sin()) * (x - xa) * w;
        }
    }
    let norm = tf(n as f64) * (tf(2.0) * PI * sz2).sqrt();
    let rho = rho / norm;
    let cur = num / norm / (tf(4.0) * k * k * s0 * s0 * sz2);
    (rho.hi() + rho.lo(), cur.hi() + cur.lo())
}
