fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR is set");
    cbindgen::generate(&crate_dir)
        .expect("generating the C header")
        .write_to_file(std::path::Path::new(&crate_dir).join("include/motiondesc.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
