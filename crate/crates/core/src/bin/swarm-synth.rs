fn main() -> std::process::ExitCode {
    swarm_synth::cli::main()
}
