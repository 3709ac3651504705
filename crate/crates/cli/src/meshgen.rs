use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use ltpoisson_core::mesh::write_mesh;
use ltpoisson_core::problems::Family;

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct MeshgenArgs {
    /// Problem family: square, square-jump, parallel-plate or flag.
    #[arg(long)]
    pub family: Family,
    /// Cells per unit length.
    #[arg(long)]
    pub n: usize,
    /// Mesh file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the family's problem config here.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Problem config reproducing the built-in data of `family`.
pub fn family_config(family: Family) -> String {
    let terminal = |name: &str, region: u32, value: f64| {
        format!("[[terminal]]\nname = \"{name}\"\nregion = {region}\nvalue = {value:?}\nmarkers = [\"{name}\"]\n")
    };
    match family {
        Family::Square | Family::SquareJump => format!(
            "[source]\ndensity = \"pi*(cos(pi*x)+cos(pi*y))\"\n\n[reference]\npoint = [0.0, 0.0]\nvalue = {:?}\n",
            2.0 / std::f64::consts::PI
        ),
        Family::ParallelPlate => format!("{}\n{}", terminal("left", 1, 0.0), terminal("right", 2, 1.0)),
        Family::Flag => {
            let c = ltpoisson_core::problems::FLAG_CHARGE;
            format!(
                "[[source.point]]\nx = {:?}\ny = {:?}\ncharge = 1.0\nside = 0.04\n\n{}\n{}",
                c.x,
                c.y,
                terminal("gamma1", 1, 1.0),
                terminal("gamma2", 2, 0.8)
            )
        }
    }
}

pub fn run(args: &MeshgenArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mesh = args.family.mesh(args.n)?;
    let file = std::fs::File::create(&args.out)?;
    write_mesh(&mesh, BufWriter::new(file))?;
    if let Some(path) = &args.config {
        std::fs::write(path, family_config(args.family))?;
    }
    println!("{}: {} nodes, {} triangles", args.family.name(), mesh.num_nodes(), mesh.num_triangles());
    Ok(())
}
