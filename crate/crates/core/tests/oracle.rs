//! Split-step oracle against the closed form across propagation distance.

use talbot_core::oracle::{cross_validate, ALIASING_THRESHOLD};
use talbot_core::Model;

#[test]
fn agreement_does_not_degrade_with_distance() {
    let m = Model::reference();
    let zt = m.talbot_distance();
    let window = 10.0 * m.period();
    let errors: Vec<(f64, f64)> = (0..=15)
        .map(|i| {
            let z = zt / 8.0 * (1 + i) as f64;
            (z / zt, cross_validate(&m, z, window).unwrap().max_rel)
        })
        .collect();
    let base = errors[0].1;
    for &(t, e) in &errors {
        assert!(e < 1e-3, "z = {t} z_T: max relative error {e:e}");
        assert!(e - base <= ALIASING_THRESHOLD, "z = {t} z_T: error grew from {base:e} to {e:e}");
    }
}

#[test]
fn few_slit_gratings_agree_too() {
    for n in [1, 2, 7] {
        let m = Model::reference().with_slits(n).unwrap();
        let zt = m.talbot_distance();
        for z in [0.25 * zt, 0.5 * zt, zt] {
            let r = cross_validate(&m, z, 10.0 * m.period()).unwrap();
            assert!(r.max_rel < 1e-3 && r.pearson > 1.0 - 1e-9, "N = {n}, z = {z:e}: {r:?}");
        }
    }
}
