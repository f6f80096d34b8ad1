fn main() {
    std::process::exit(bimba_tool::run(std::env::args_os()));
}
