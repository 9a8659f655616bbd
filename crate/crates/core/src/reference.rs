//! Reference graph documents shipped with the crate.

/// Ejector + 0.4 l reservoir.
pub const RESERVOIR_SETUP: &str = include_str!("../graphs/reservoir_setup.toml");
/// Ejector + 31.83 m × 4 mm hose of the same internal volume.
pub const HOSE_SETUP: &str = include_str!("../graphs/hose_setup.toml");
/// Ejector, 5 hoses, distributor, 4 cups.
pub const USE_CASE_1: &str = include_str!("../graphs/use_case_1.toml");
/// Head + 12 add-on modules with 32 cups.
pub const USE_CASE_2: &str = include_str!("../graphs/use_case_2.toml");

/// Suction at 3 s, blow-off added at 6 s, 9 s in total.
pub fn pick_and_place_script() -> crate::trace::InputScript {
    crate::trace::InputScript::new(
        vec![(0.0, vec![0.0, 0.0]), (3.0, vec![24.0, 0.0]), (6.0, vec![24.0, 24.0])],
        9.0,
    )
}
