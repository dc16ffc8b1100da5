fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = std::path::Path::new(&crate_dir).join("include/panoptic_forge.h");

    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("PANOPTIC_FORGE_H".to_string()),
        cpp_compat: true,
        header: Some("/* C ABI for the panoptic-forge toolkit. Generated by cbindgen. */".into()),
        ..Default::default()
    };

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen failed")
        .write_to_file(header);

    println!("cargo:rerun-if-changed=src/lib.rs");
}
