use serde_json::json;

use crate::campaign::{Campaign, JobConfig};

pub const SUITES: &[(&str, &str)] = &[
    ("scalar-duality", "relative duality of a ball in a cube, massless and massive"),
    ("em-duality", "EM structure checks and relative duality in d = 2 and d = 3"),
    ("boost-region", "conformal-image boost regions for several directions and ε"),
    ("mollifier", "support inclusion and convergence of mollified data"),
    ("schur", "multiplication operator norms, Schur domination and infrared HS norms"),
    ("huygens", "massless d = 3 interior suppression with a massive control"),
    ("fock-ccr", "single-mode Weyl relations and relative commutant dimensions"),
    ("outer-regularity", "gap series of shrinking neighborhoods of a ball"),
];

pub fn suite(name: &str) -> Option<Campaign> {
    let jobs = match name {
        "scalar-duality" => vec![JobConfig::new("scalar_space", "duality")],
        "em-duality" => vec![
            JobConfig::new("em_space", "structure"),
            JobConfig::new("em_space", "duality").named("em-duality-d2"),
            JobConfig::new("em_space", "duality").named("em-duality-d3").with_parameters(json!({
                "dim": 3,
                "ambient_half_width": 2.5,
                "region_radius": 1.8,
            })),
        ],
        "boost-region" => vec![JobConfig::new("em_space", "boost-region")],
        "mollifier" => vec![JobConfig::new("scalar_space", "mollifier")],
        "schur" => vec![JobConfig::new("spectral", "mult-operator")],
        "huygens" => vec![JobConfig::new("propagator", "huygens").with_parameters(json!({ "dim": 3, "mass": 0.0 }))],
        "fock-ccr" => vec![JobConfig::new("fock", "ccr"), JobConfig::new("fock", "commutant")],
        "outer-regularity" => vec![JobConfig::new("scalar_space", "outer-regularity")],
        _ => return None,
    };
    Some(Campaign {
        name: name.into(),
        seed: 0,
        output_dir: None,
        jobs,
    })
}
