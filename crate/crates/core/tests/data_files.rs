use std::path::Path;

use maxstable::gridfun::{load_bank, make_grid, standard_bank};

#[test]
fn checked_in_bank_matches_the_builtin_one() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let loaded = load_bank(&dir.join("bank.txt"), Some(&dir.join("bank_overrides.txt"))).unwrap();
    let builtin = standard_bank(&make_grid(201).unwrap());
    assert_eq!(loaded.ids().collect::<Vec<_>>(), builtin.ids().collect::<Vec<_>>());
    for (a, b) in loaded.functions().iter().zip(builtin.functions()) {
        assert_eq!(a.values(), b.values(), "{}", a.id());
        assert_eq!(a.overrides(), b.overrides(), "{}", a.id());
    }
    assert_eq!(loaded.grid().points(), builtin.grid().points());
}

#[test]
fn table_without_overrides_drops_point_masses() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let loaded = load_bank(&dir.join("bank.txt"), None).unwrap();
    assert!(loaded.functions().iter().all(|f| f.overrides().is_empty()));
    assert_eq!(loaded.get("pm_only").unwrap().sup_norm(), 0.0);
}
