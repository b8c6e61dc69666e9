// Own test binary: the environment is process-wide.

use clap::Parser;
use mdiqkd::cli::Cli;

#[test]
fn environment_fills_missing_flags() {
    std::env::set_var("MDIQKD_SEED", "41");
    std::env::set_var("MDIQKD_PAIRS", "123");
    let cli = Cli::try_parse_from(["mdiqkd", "show-config"]).unwrap();
    let cfg = cli.scenario().unwrap();
    assert_eq!(cfg.seed, 41);
    assert_eq!(cfg.finite.total_pairs, 123);

    let cli = Cli::try_parse_from(["mdiqkd", "--seed", "5", "show-config"]).unwrap();
    assert_eq!(cli.scenario().unwrap().seed, 5);
}
