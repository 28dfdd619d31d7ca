use super::{ArchProfile, ProfileError};
use crate::Scalar;

/// JSON Schema describing the profile file layout.
pub const PROFILE_SCHEMA: &str = include_str!("../../data/profile.schema.json");

const BUILTINS: &[(&str, &str)] = &[
    ("k20", include_str!("../../data/profiles/k20.json")),
    ("k4200", include_str!("../../data/profiles/k4200.json")),
    ("m60", include_str!("../../data/profiles/m60.json")),
    ("gtx1050", include_str!("../../data/profiles/gtx1050.json")),
    ("v100", include_str!("../../data/profiles/v100.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// Raw JSON of a shipped profile. Names are case-insensitive.
pub fn builtin_profile_json(name: &str) -> Result<&'static str, ProfileError> {
    BUILTINS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, text)| *text)
        .ok_or_else(|| ProfileError::UnknownBuiltin(name.to_string()))
}

pub fn builtin_profile<T: Scalar>(name: &str) -> Result<ArchProfile<T>, ProfileError> {
    ArchProfile::from_json(builtin_profile_json(name)?)
}
