//! Drives the config runner from code: the JSON a `cylres` invocation would
//! read, executed in memory.

use cylres::runner::{execute, Command, RunConfig};

const CONFIG: &str = r#"{
  "geometry": {"kind": "dif1", "params": {"a": 0.5, "beta": 0.5, "gamma": -1.0}, "alpha": 0.7},
  "cross_section": {"kind": "interval", "length": 3.141592653589793, "bc": "dirichlet"},
  "scaling": {"R": 10.0, "w": 2.0, "lambda": [0.0, 0.3]},
  "grid": {"X_max": 30.0, "N_x": 120, "N_y": 12},
  "eigen": {"shift": [0.85, 0.0], "count": 6},
  "window": {"re": [0.8, 0.9], "im": [-0.05, 0.05]}
}"#;

fn main() -> cylres::Result<()> {
    let cfg = RunConfig::from_json(CONFIG)?;
    let out = execute(Command::Resonances, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&out.results["resonances"])?);
    for name in out.files.keys() {
        println!("artifact: {name}");
    }
    Ok(())
}
