//! Bundled reproduction scenarios, embedded at build time.

pub const NAMES: [&str; 5] = [
    "vircadia_2user",
    "hubs_seminar_8user",
    "vrchat_4user",
    "rr_campus",
    "local_vs_remote",
];

pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "vircadia_2user" => Some(include_str!("../scenarios/vircadia_2user.toml")),
        "hubs_seminar_8user" => Some(include_str!("../scenarios/hubs_seminar_8user.toml")),
        "vrchat_4user" => Some(include_str!("../scenarios/vrchat_4user.toml")),
        "rr_campus" => Some(include_str!("../scenarios/rr_campus.toml")),
        "local_vs_remote" => Some(include_str!("../scenarios/local_vs_remote.toml")),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_bundled_scenario_validates() {
        for name in NAMES {
            let text = bundled(name).expect("bundled");
            let cfg = parse_config(text)
                .unwrap_or_else(|e| panic!("scenario {name} does not validate: {e}"));
            assert_eq!(cfg.scenario, name);
        }
    }

    #[test]
    fn unknown_name_is_absent() {
        assert!(bundled("atlantis").is_none());
    }
}
