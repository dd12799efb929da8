//! Published benchmark values used by the acceptance checks.

/// A reference quantity with a short description of where it applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub key: &'static str,
    pub value: f64,
    pub description: &'static str,
}

pub const REFERENCES: &[Reference] = &[
    Reference { key: "square_re20_cd", value: 2.3817, description: "steady square, Re = 20, Q1 B-splines: drag coefficient" },
    Reference { key: "square_re20_cd_min", value: 2.214, description: "steady square, Re = 20: lowest literature drag" },
    Reference { key: "square_re20_cd_max", value: 2.40, description: "steady square, Re = 20: highest literature drag" },
    Reference { key: "square_re100_cd_avg", value: 1.4776, description: "square, Re = 100, Q1 B-splines: mean drag" },
    Reference { key: "square_re100_cl_rms", value: 0.1897, description: "square, Re = 100, Q1 B-splines: RMS lift" },
    Reference { key: "square_re100_st", value: 0.1470, description: "square, Re = 100, Q1 B-splines: Strouhal number" },
];

/// Looks up a reference value by key.
pub fn reference(key: &str) -> f64 {
    REFERENCES.iter().find(|r| r.key == key).unwrap_or_else(|| panic!("no reference value {key}")).value
}
