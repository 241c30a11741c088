//! The fixture files are the sample catalog rendered to disk. Set
//! `GEOSENSOR_WRITE_FIXTURES=1` to regenerate them.

use std::path::PathBuf;

use geosensor_core::sample;

fn fixtures() -> Vec<(&'static str, String)> {
    vec![
        ("ndvi.asc", sample::ndvi_asc()),
        ("lst_day.asc", sample::lst_day_asc()),
        ("in_situ_lst.csv", sample::in_situ_lst_csv()),
        ("in_situ_ret.csv", sample::in_situ_ret_csv()),
    ]
}

#[test]
fn fixture_files_match_the_sample_catalog() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let write = std::env::var_os("GEOSENSOR_WRITE_FIXTURES").is_some();
    for (name, text) in fixtures() {
        let path = dir.join(name);
        if write {
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, text, "{name} is stale");
    }
}
