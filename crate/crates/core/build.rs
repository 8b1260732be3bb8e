use std::env;
use std::path::Path;

// The netlib backend links against `-lcblas`, which Debian does not ship as a
// standalone library. OpenBLAS exports the full CBLAS interface, so expose it
// under the expected name.
fn main() {
    let out_dir = env::var("OUT_DIR").unwrap();
    let shim = Path::new(&out_dir).join("libcblas.so");
    if !shim.exists() {
        for candidate in [
            "/usr/lib/x86_64-linux-gnu/libopenblas.so",
            "/usr/lib/libopenblas.so",
        ] {
            if Path::new(candidate).exists() {
                let _ = std::os::unix::fs::symlink(candidate, &shim);
                break;
            }
        }
    }
    println!("cargo:rustc-link-search=native={}", out_dir);
}
