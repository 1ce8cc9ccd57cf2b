fn main() -> std::process::ExitCode {
    weaklabel::cli::main()
}
