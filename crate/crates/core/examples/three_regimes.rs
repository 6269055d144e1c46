//! Weak error of the hybrid three-regime model against its limit.
//!
//! `cargo run --release --example three_regimes -- 20000`

use hybridjump::generator::TestFunction;
use hybridjump::regimes::{self, ExperimentConfig, ThreeRegimeExample};

fn main() -> hybridjump::Result<()> {
    let paths = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let ex = ThreeRegimeExample::<f64>::standard(0.01);
    let cfg = ExperimentConfig { paths, ..Default::default() };
    let report = regimes::three_regime_experiment(&ex, &TestFunction::sine(), &cfg)?;
    println!("{:>10} {:>12} {:>12} {:>12}", "eps", "error", "ci_low", "ci_high");
    for (eps, e) in report.values.iter().zip(&report.errors) {
        println!("{eps:>10} {:>12.5} {:>12.5} {:>12.5}", e.estimate, e.ci_low, e.ci_high);
    }
    if let Some(fit) = report.fit {
        println!("slope {:.3} (se {:.3}, R^2 {:.3})", fit.slope, fit.std_error, fit.r_squared);
    }
    Ok(())
}
