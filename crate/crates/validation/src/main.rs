//! The `bimba` command line, rebuilt here so the acceptance target can
//! drive it as a subprocess.
fn main() {
    std::process::exit(bimba_tool::run(std::env::args_os()));
}
