use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvcavity_core::levels::{orientation_axes, orientation_levels, transition_frequencies, FieldConfig, ZeroFieldParams};
use nvcavity_core::units::to_mhz;

use crate::Outcome;

pub fn levels() -> Outcome {
    let zfp = ZeroFieldParams::default();
    let tol = 1e-9 * zfp.d;

    let zero = match transition_frequencies(&zfp, &FieldConfig { magnitude: 0.0, phi: 0.3 }) {
        Ok(d) => d,
        Err(e) => return Outcome::error(e),
    };
    let zero_ok = zero
        .orientations
        .iter()
        .all(|o| (o.omega_minus - (zfp.d - zfp.e)).abs() < tol && (o.omega_plus - (zfp.d + zfp.e)).abs() < tol);

    // two-and-two degeneracy at a generic in-plane angle
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut pair_ok = true;
    for _ in 0..20 {
        let field = FieldConfig { magnitude: 0.02, phi: rng.random_range(0.0..std::f64::consts::TAU) };
        let Ok(d) = transition_frequencies(&zfp, &field) else {
            pair_ok = false;
            break;
        };
        for pair in [d.subensemble_i, d.subensemble_ii] {
            let (a, b) = (&d.orientations[pair[0]], &d.orientations[pair[1]]);
            pair_ok &= (a.omega_minus - b.omega_minus).abs() < tol && (a.omega_plus - b.omega_plus).abs() < tol;
        }
    }

    let four = match transition_frequencies(&zfp, &FieldConfig { magnitude: 0.02, phi: 0.0 }) {
        Ok(d) => d,
        Err(e) => return Outcome::error(e),
    };
    let o0 = four.orientations[0];
    let four_ok = four.ambiguous
        && four
            .orientations
            .iter()
            .all(|o| (o.omega_minus - o0.omega_minus).abs() < tol && (o.omega_plus - o0.omega_plus).abs() < tol);

    // d omega_+ / dB for a field along the NV axis, far above D / gamma
    let axis = orientation_axes()[0];
    let (b, db) = (1.0, 1e-4);
    let slope = match (orientation_levels(&zfp, &(axis * (b + db)), &axis), orientation_levels(&zfp, &(axis * (b - db)), &axis)) {
        (Ok(hi), Ok(lo)) => (hi.omega_plus - lo.omega_plus) / (2.0 * db),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
    };
    let rel = slope / zfp.gyromagnetic() - 1.0;
    let slope_ok = rel.abs() < 1e-3;

    Outcome::new(
        zero_ok && pair_ok && four_ok && slope_ok,
        format!(
            "B = 0 at D -+ E: {zero_ok}; pairwise degeneracy (20 angles): {pair_ok}; four-fold at phi = 0: {four_ok}; \
             aligned slope {:.6} MHz/T vs g mu_B/h {:.6} MHz/T ({:+.2e}, limit 1e-3)",
            to_mhz(slope),
            to_mhz(zfp.gyromagnetic()),
            rel
        ),
    )
}
