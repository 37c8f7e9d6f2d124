//! `make-fixture`: writes `rest.mesh`, `init.mesh` and `locks.txt` for a
//! built-in test problem.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use untangle_core::io::write_problem;
use untangle_core::{generate_fixture, FixtureSpec};

#[derive(Parser, Debug)]
#[command(name = "make-fixture", version, about = "Write a built-in untangling problem as Medit files")]
struct Args {
    /// point_swap_square:N, triangle_fan_12, cavity_cube:N:ANGLE or
    /// stretched_bar[:NX:NY:LENGTH:STRETCH].
    fixture: FixtureSpec,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let mesh = generate_fixture(&args.fixture)?;
    fs::create_dir_all(&args.dir).with_context(|| format!("creating {}", args.dir.display()))?;
    write_problem(&mesh, &args.dir.join("rest.mesh"), &args.dir.join("init.mesh"), &args.dir.join("locks.txt"))?;
    println!(
        "{}: {} vertices, {} elements, {} locked; suggested --targets {}",
        args.fixture,
        mesh.num_vertices(),
        mesh.elements.len(),
        mesh.num_locked(),
        args.fixture.default_policy()
    );
    Ok(())
}
