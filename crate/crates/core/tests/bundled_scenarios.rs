use std::path::PathBuf;

use oflp_core::scenario::Scenario;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn full_grids_have_the_published_slot_totals() {
    assert_eq!(scenario("gps_galileo").grid.slot_count(), 23_868);
    assert_eq!(scenario("qzss").grid.slot_count(), 18_360);
}

#[test]
fn gps_grid_is_the_product_of_its_axes() {
    // 9 a × 8 e × 1 i × 12 RAAN × 6 ω × 1 ν
    assert_eq!(scenario("gps").grid.slot_count(), 9 * 8 * 12 * 6);
}

#[test]
fn every_bundled_scenario_loads_its_clients() {
    for (name, n_clients, n_slots) in [
        ("gps_galileo", 59, 23_868),
        ("gps_galileo_desk", 6, 48),
        ("gps", 31, 5_184),
        ("gps_desk", 6, 36),
        ("qzss", 6, 18_360),
        ("qzss_desk", 6, 60),
    ] {
        let s = scenario(name);
        assert_eq!(s.clients().unwrap().len(), n_clients, "{name}");
        assert_eq!(s.grid.slot_count(), n_slots, "{name}");
        assert_eq!(s.scenario_hash().unwrap().len(), 64);
    }
}

#[test]
fn constellation_tables_have_expected_rows() {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for (file, rows) in [("gps.csv", 31), ("galileo.csv", 28), ("gps_galileo.csv", 59), ("qzss.csv", 6)] {
        let sats = oflp_core::elements::load_constellation(&data.join(file)).unwrap();
        assert_eq!(sats.len(), rows, "{file}");
    }
}
