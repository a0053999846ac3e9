use crate::model::Specification;

use super::{parse, UncertainModel};

/// Threshold of the running example: P≤0.13(◇ s3).
pub const FIG1_LAMBDA: f64 = 0.13;

const FIG1: &str = include_str!("../../../../models/fig1.umc");

/// The eight-state running example with v ~ Uniform[0, 1] and target {s3}.
pub fn generate_fig1() -> UncertainModel {
    parse(FIG1).expect("bundled fig1 model parses")
}

/// A model shipped with the library together with the property it is meant for.
#[derive(Debug, Clone)]
pub struct BundledModel {
    pub name: &'static str,
    pub file_name: &'static str,
    pub source: &'static str,
    pub spec: Specification,
}

impl BundledModel {
    pub fn load(&self) -> UncertainModel {
        parse(self.source)
            .unwrap_or_else(|e| panic!("bundled model {} does not parse: {e}", self.name))
    }
}

/// The running example and the small benchmark analogs.
pub fn analog_models() -> Vec<BundledModel> {
    vec![
        BundledModel {
            name: "fig1",
            file_name: "fig1.umc",
            source: FIG1,
            spec: Specification::reach_at_most(FIG1_LAMBDA).unwrap(),
        },
        BundledModel {
            name: "brp",
            file_name: "brp.umc",
            source: include_str!("../../../../models/brp.umc"),
            spec: Specification::reach_at_most(0.01).unwrap(),
        },
        BundledModel {
            name: "crowds",
            file_name: "crowds.umc",
            source: include_str!("../../../../models/crowds.umc"),
            spec: Specification::reach_at_most(0.35).unwrap(),
        },
        BundledModel {
            name: "consensus",
            file_name: "consensus.umdp",
            source: include_str!("../../../../models/consensus.umdp"),
            spec: Specification::reach_at_least(0.5).unwrap(),
        },
        BundledModel {
            name: "maintenance",
            file_name: "maintenance.umdp",
            source: include_str!("../../../../models/maintenance.umdp"),
            spec: Specification::cost_at_most(12.0).unwrap(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_shape() {
        let um = generate_fig1();
        let m = &um.model;
        assert_eq!(m.num_states(), 8);
        assert!(m.is_mc());
        assert_eq!(m.parameters().len(), 1);
        assert_eq!(m.parameters()[0].name, "v");
        assert_eq!(m.target(), &[m.state_index("s3").unwrap()]);
        assert_eq!(m.states()[m.initial()], "s0");
    }

    #[test]
    fn all_bundled_models_parse_and_round_trip() {
        for b in analog_models() {
            let um = b.load();
            assert_eq!(
                super::super::parse(&super::super::serialize(&um)).unwrap(),
                um,
                "{}",
                b.name
            );
        }
    }
}
