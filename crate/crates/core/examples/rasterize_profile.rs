//! Voxelises the dumbbell cross-section and draws it.
//!
//! ```text
//! cargo run --example rasterize_profile -- 0.0005
//! ```

use calibrom::geometry::{rasterize, region_masks, ProfileGeometry};

fn main() -> calibrom::Result<()> {
    let dx: f64 = std::env::args()
        .nth(1)
        .map_or(0.5e-3, |s| s.parse().expect("dx in metres"));
    let profile = ProfileGeometry::dumbbell();
    let grid = rasterize(&profile, dx)?;
    let regions = region_masks(&grid, &profile)?;

    println!("{:#?}", grid.summary());
    println!(
        "area {:.4e} m², staircase perimeter {:.4e} m",
        grid.area(),
        grid.perimeter()
    );
    println!(
        "cores: large {} cells, small {} cells; surface ring {} cells",
        regions.large_cylinder_core.len(),
        regions.small_cylinder_core.len(),
        regions.surface_ring.len()
    );

    let mut tag = vec![' '; grid.nx * grid.ny];
    for c in 0..grid.n_interior() {
        let (i, j) = grid.cell(c);
        tag[j * grid.nx + i] = '.';
    }
    for (cells, ch) in [
        (&regions.surface_ring, 'o'),
        (&regions.large_cylinder_core, 'L'),
        (&regions.small_cylinder_core, 's'),
    ] {
        for &c in cells {
            let (i, j) = grid.cell(c);
            tag[j * grid.nx + i] = ch;
        }
    }
    for row in tag.chunks(grid.nx).rev() {
        println!("{}", row.iter().collect::<String>());
    }
    Ok(())
}
