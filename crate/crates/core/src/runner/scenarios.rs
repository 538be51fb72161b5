//! Scenario configs shipped with the binary.

pub const BUILTIN: &[(&str, &str)] = &[
    ("brownian", include_str!("../../scenarios/brownian.toml")),
    ("ou", include_str!("../../scenarios/ou.toml")),
    ("lqg", include_str!("../../scenarios/lqg.toml")),
    ("double_well", include_str!("../../scenarios/double_well.toml")),
    ("double_well_feedback", include_str!("../../scenarios/double_well_feedback.toml")),
];

pub fn find(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
