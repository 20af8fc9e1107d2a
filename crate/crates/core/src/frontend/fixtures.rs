//! Reference problems shipped with the binary.

pub const FIXTURES: &[(&str, &str)] = &[
    ("laplace", include_str!("../../fixtures/laplace.jv")),
    ("wave", include_str!("../../fixtures/wave.jv")),
    ("pkdv", include_str!("../../fixtures/pkdv.jv")),
    ("maxwell", include_str!("../../fixtures/maxwell.jv")),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}
