use posbias_core::{MaskKind, PeMode};
use posbias_train::gradcheck::check_gradients;
use posbias_train::model::{ModelConfig, Rows};

#[test]
fn every_mask_pe_residual_combination() {
    let masks = [
        MaskKind::Causal,
        MaskKind::SlidingWindow { width: 3 },
        MaskKind::Prefix { prefix_len: 2 },
        MaskKind::Complete,
    ];
    let pes = ["nope", "sin", "decay", "rope"];
    let mut seed = 0;
    for mask in masks {
        for pe in pes {
            for residual in [false, true] {
                seed += 1;
                let cfg = ModelConfig {
                    depth: 2,
                    residual,
                    mask,
                    pe: pe.parse::<PeMode>().unwrap(),
                    dim: 6,
                    hidden: 6,
                    l_labels: 4,
                };
                for rows in [Rows::QueryOnly, Rows::All] {
                    let r = check_gradients(&cfg, 7, 3, seed, rows).unwrap();
                    assert!(r.max_rel_error < 1e-4, "{mask} {pe} residual={residual} {rows:?}: {:e} at {}", r.max_rel_error, r.worst);
                }
            }
        }
    }
}
