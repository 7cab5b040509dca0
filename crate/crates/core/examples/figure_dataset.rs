// Regenerates one figure's panels at reduced resolution and prints the head
// of each table: `cargo run --release --example figure_dataset -- 2b`.
use mpjc::harness::{figures, RunOptions};

fn main() -> mpjc::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "2a".into());
    let opts = RunOptions { points: Some(41), ..RunOptions::default() };
    for fid in figures::resolve(&id)? {
        for (panel, table) in figures::figure(&fid, &opts)? {
            println!("panel {panel}: {} rows, columns {}", table.rows.len(), table.columns.join(","));
            for row in table.rows.iter().step_by(7) {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.5}")).collect();
                println!("  {}", cells.join(" "));
            }
        }
    }
    Ok(())
}
