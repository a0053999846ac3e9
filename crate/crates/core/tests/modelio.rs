mod common;

use std::path::Path;

use common::{random_parametric, rng};
use scenverify::checker::Checker;
use scenverify::modelio::uav::{generate_uav, UavConfig, UavPreset};
use scenverify::modelio::{self, analog_models};
use scenverify::{sampling, Specification};

#[test]
fn random_models_round_trip() {
    let mut r = rng(21);
    for n in [3, 10, 40] {
        for mdp in [false, true] {
            let um = random_parametric(&mut r, n, mdp);
            let text = modelio::serialize(&um);
            assert_eq!(modelio::parse(&text).unwrap(), um, "{text}");
        }
    }
}

#[test]
fn shipped_files_match_the_builtin_models() {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models"));
    for b in analog_models() {
        let from_disk = modelio::load(&dir.join(b.file_name)).unwrap();
        assert_eq!(from_disk, b.load(), "{}", b.name);
    }
}

#[test]
fn uav_models_instantiate_at_every_sample() {
    let mut configs = Vec::new();
    for preset in [UavPreset::Uniform, UavPreset::BiasY, UavPreset::BiasNegX] {
        let mut c = UavConfig::new(4, 4, 1, 2);
        c.preset = preset;
        configs.push(c);
    }
    let mut cost = UavConfig::new(4, 3, 1, 2);
    cost.cost_mode = true;
    configs.push(cost);
    for cfg in configs {
        let um = generate_uav(&cfg).unwrap();
        assert!(um.model.validate().is_empty());
        assert_eq!(um.model.num_states(), cfg.num_states());
        let samples = sampling::draw(&um.distribution, &um.model, 1000, 6).unwrap();
        let fixed = um
            .model
            .valuation(um.model.cost_parameters().into_iter().map(|w| (w, 1.0)));
        for u in &samples.samples {
            um.model.instantiate(&u.filled_from(&fixed)).unwrap();
        }
        // the qualitative analysis accepts the model for its intended property
        let spec = if cfg.cost_mode {
            Specification::cost_at_most(20.0).unwrap()
        } else {
            Specification::reach_at_least(0.9).unwrap()
        };
        Checker::new(&um.model, spec).unwrap();
    }
}
