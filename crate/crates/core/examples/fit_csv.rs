//! Drives the command-line interface in-process: simulate a dataset to CSV,
//! fit it, and read back the estimate and sidecar.

use std::fs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("sarrs-fit-csv-{}", std::process::id()));
    let d = dir.display().to_string();
    let run = |args: &[&str]| sarrs::cli::run(std::iter::once("sarrs").chain(args.iter().copied()));

    let code = run(&["simulate", "--preset", "paper-high-dim", "--b", "1", "--seed", "21", "--out", &d]);
    assert_eq!(code, 0);
    let x = dir.join("x.csv").display().to_string();
    let y = dir.join("y.csv").display().to_string();
    let out = dir.join("a_hat.csv").display().to_string();
    let code = run(&["fit", "--x", &x, "--y", &y, "--out", &out, "--penalty", "grmcp", "--record-timings"]);
    assert_eq!(code, 0);

    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("a_hat.json"))?)?;
    println!("{}", serde_json::to_string_pretty(&sidecar)?);
    let rows = fs::read_to_string(&out)?.lines().count();
    println!("a_hat.csv: {rows} rows");
    fs::remove_dir_all(&dir)?;
    Ok(())
}
