//! The whole workflow on a small calving sweep: generate, train the three
//! emulators and score them on the held-out thresholds.
//!
//! Writes under `target/example_run` unless a directory is given.

use std::path::PathBuf;

use icegnn::cli::{cmd_evaluate, cmd_generate, cmd_train, metrics_table, RunConfig};
use icegnn::gnn::ModelKind;

fn main() -> icegnn::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("target/example_run"));
    let mut config = RunConfig::from_toml(
        r#"
scenario = "helheim"

[sim]
fine_edge = 1200.0
coarse_edge = 3000.0
n_steps = 100
save_every = 10

[arch]
width = 16
mlp_hidden = 16
message = 16

[train]
epochs = 60
lr = 0.002
"#,
    )?;
    config.out = out;

    let g = cmd_generate(&config)?;
    println!("{} scenarios, {} nodes, {} samples", g.n_scenarios, g.n_nodes, g.n_samples);
    for kind in ModelKind::ALL {
        let mut c = config.clone();
        c.model = kind;
        let s = cmd_train(&c, |_| {})?;
        println!(
            "{kind:<5} {:>6} parameters  best epoch {:>3}  loss {:.3e}",
            s.n_parameters, s.history.best_epoch, s.history.best_loss
        );
    }
    print!("{}", metrics_table(&cmd_evaluate(&config, None)?));
    println!("artifacts in {}", config.out.display());
    Ok(())
}
