//! Driver for the brute-force verification suite: adjacency sensitivity
//! enumeration, the signal/memory/noise decomposition identity, and the
//! limiting-regime equivalences. Prints one line per check and reports
//! whether everything held.

use fodp_core::config::{MechanismConfig, PrivacyConfig};
use fodp_core::data::{generate_synthetic, SyntheticSpec};
use fodp_core::mechanism::{TraceLevel, Trainer, UpdateRule};
use fodp_core::model::MlpShape;
use fodp_core::oracle::{brute_force_sensitivity, check_decomposition, check_reductions};
use fodp_core::rng::{gaussian_vector, SeededRng, Substream};
use fodp_core::sampling::draw_mask;
use fodp_core::vector::GradientVector;

/// Run all verifier checks; returns true when every check passed.
pub fn run_verification(trials: usize, seed: u64) -> anyhow::Result<bool> {
    let mut all_ok = true;

    // Sensitivity enumeration over random 8-example instances, with the
    // aligned worst-case probe required to witness the bound tightly.
    for beta in [1.0, 0.9, 0.5] {
        let mech = MechanismConfig::default().with_beta(beta);
        let clip_c = 1.0;
        let bound = beta * clip_c;
        let mut worst = f64::NEG_INFINITY;
        let mut ok = true;
        for trial in 0..trials {
            let master = SeededRng::new(seed ^ (trial as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let mut data_rng = master.substream(Substream::Data);
            let gradients: Vec<GradientVector> = (0..8)
                .map(|_| gaussian_vector(&mut data_rng, 5, 1.5))
                .collect();
            let mask = draw_mask(&mut master.substream(Substream::Mask), 8, 0.6);
            let mut noise_rng = master.substream(Substream::Noise);
            let prefix: Vec<GradientVector> = (0..5)
                .map(|_| gaussian_vector(&mut noise_rng, 5, 2.0))
                .collect();
            let report = brute_force_sensitivity(&gradients, &mask, &prefix, &mech, clip_c)?;
            worst = worst.max(report.max_observed);
            // Bounded above by beta * C, and the aligned probe must hit it.
            ok &= !report.violation && report.max_observed >= 0.999 * report.bound;
        }
        all_ok &= ok;
        println!(
            "sensitivity beta={beta:.2}: {trials} trials, max observed {worst:.12} vs bound {bound:.12} [{}]",
            if ok { "ok" } else { "VIOLATION" }
        );
    }

    // Decomposition identity on a 30-step fractional run with window 8.
    {
        let spec = SyntheticSpec {
            num_classes: 3,
            dim: 6,
            train_per_class: 12,
            test_per_class: 3,
            cluster_std: 0.6,
            center_scale: 1.0,
        };
        let master = SeededRng::new(seed);
        let (dataset, _) = generate_synthetic(&spec, &mut master.substream(Substream::Data))?;
        let privacy = PrivacyConfig {
            q: 0.3,
            steps_t: 30,
            ..PrivacyConfig::default()
        };
        let transcript = Trainer::with_fresh_init(
            &dataset,
            MlpShape::new(6, 8, 6, 3),
            MechanismConfig::default(),
            privacy,
            UpdateRule::QueryLevel,
            0.5,
            0.5,
            TraceLevel::Full,
            &master,
        )?
        .run(30)?;
        let max_rel = check_decomposition(&transcript)?;
        let ok = max_rel < 1e-9;
        all_ok &= ok;
        println!(
            "decomposition: 30 steps, window 8, max relative error {max_rel:.3e} [{}]",
            if ok { "ok" } else { "VIOLATION" }
        );
    }

    // Limiting-regime equivalences.
    for check in check_reductions(seed, &MechanismConfig::default(), &PrivacyConfig::default())? {
        all_ok &= check.passed;
        println!(
            "reduction {}: {} [{}]",
            check.name,
            check.detail,
            if check.passed { "ok" } else { "VIOLATION" }
        );
    }

    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verification_suite_passes() {
        assert!(run_verification(10, 1234).unwrap());
    }
}
