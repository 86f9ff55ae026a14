fn main() {
    // system BLAS/LAPACK backing the dense SVD
    println!("cargo:rustc-link-lib=dylib=openblas");
    println!("cargo:rerun-if-changed=build.rs");
}
