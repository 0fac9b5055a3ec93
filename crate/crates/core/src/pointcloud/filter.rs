use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;

type Cell = (i64, i64, i64);

fn cell_of(p: &Vec3, anchor: &Vec3, size: f64) -> Cell {
    let r = (p - anchor) / size;
    (r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64)
}

/// Uniform hash grid over point indices.
struct Grid {
    size: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl Grid {
    fn new(points: &[Vec3], size: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, &Vec3::zeros(), size)).or_default().push(i);
        }
        Self { size, cells }
    }

    fn cell(&self, p: &Vec3) -> Cell {
        cell_of(p, &Vec3::zeros(), self.size)
    }

    /// Indices in all cells at Chebyshev ring distance exactly `ring`.
    fn ring(&self, c: Cell, ring: i64, mut f: impl FnMut(usize)) {
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                for dz in -ring..=ring {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                        continue;
                    }
                    if let Some(v) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        v.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}

/// Keeps the points that have at least `min_neighbors` other points within
/// `radius` (inclusive). Input order is preserved.
pub fn radius_outlier_removal(cloud: &PointCloud, radius: f64, min_neighbors: usize) -> Result<PointCloud> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if min_neighbors < 1 {
        return Err(Error::invalid("min_neighbors must be at least 1"));
    }
    let pts = &cloud.points;
    let grid = Grid::new(pts, radius);
    let r2 = radius * radius;
    let keep: Vec<bool> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let c = grid.cell(p);
            let mut count = 0usize;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(v) = grid.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                            for &j in v {
                                if j != i && (pts[j] - p).norm_squared() <= r2 {
                                    count += 1;
                                    if count >= min_neighbors {
                                        return true;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            false
        })
        .collect();
    let idx: Vec<usize> = (0..pts.len()).filter(|&i| keep[i]).collect();
    Ok(cloud.select(&idx))
}

/// Voxel down-sampling with the grid anchored at the cloud's minimum corner.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    match cloud.bounds() {
        Some((lo, _)) => voxel_downsample_anchored(cloud, voxel_size, &lo),
        None => {
            check_voxel(voxel_size)?;
            Ok(cloud.clone())
        }
    }
}

fn check_voxel(voxel_size: f64) -> Result<()> {
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::invalid(format!("voxel size must be positive, got {voxel_size}")));
    }
    Ok(())
}

/// Replaces all points in each occupied voxel by their mean (colors are
/// averaged too). Output is ordered by voxel index; track lengths are
/// dropped.
pub fn voxel_downsample_anchored(cloud: &PointCloud, voxel_size: f64, anchor: &Vec3) -> Result<PointCloud> {
    check_voxel(voxel_size)?;
    struct Acc {
        sum: Vec3,
        rgb: [u32; 3],
        n: u32,
    }
    let mut cells: BTreeMap<Cell, Acc> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let acc = cells.entry(cell_of(p, anchor, voxel_size)).or_insert(Acc {
            sum: Vec3::zeros(),
            rgb: [0; 3],
            n: 0,
        });
        acc.sum += p;
        acc.n += 1;
        if let Some(c) = &cloud.colors {
            for (sum, v) in acc.rgb.iter_mut().zip(c[i]) {
                *sum += v as u32;
            }
        }
    }
    let points = cells.values().map(|a| a.sum / a.n as f64).collect();
    let mut out = PointCloud::new(points);
    if cloud.colors.is_some() {
        let colors = cells
            .values()
            .map(|a| a.rgb.map(|s| ((s + a.n / 2) / a.n) as u8))
            .collect();
        out = out.with_colors(colors)?;
    }
    Ok(out)
}

/// Arithmetic mean of all points.
pub fn centroid(cloud: &PointCloud) -> Result<Vec3> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("centroid of an empty cloud".into()));
    }
    Ok(cloud.points.iter().sum::<Vec3>() / cloud.len() as f64)
}

/// Median distance from each point to its nearest other point, or `None`
/// for clouds with fewer than two points.
pub fn median_nn_distance(cloud: &PointCloud) -> Option<f64> {
    let pts = &cloud.points;
    if pts.len() < 2 {
        return None;
    }
    let (lo, hi) = cloud.bounds()?;
    let extent = (hi - lo).max();
    if extent <= 0.0 {
        return Some(0.0);
    }
    let size = extent / (pts.len() as f64).cbrt();
    let grid = Grid::new(pts, size);
    let mut d: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let c = grid.cell(p);
            let mut best = f64::INFINITY;
            let mut ring = 0i64;
            loop {
                grid.ring(c, ring, |j| {
                    if j != i {
                        best = best.min((pts[j] - p).norm_squared());
                    }
                });
                // Every unvisited cell is at least `ring * size` away.
                let reach = ring as f64 * size;
                if best <= reach * reach {
                    break;
                }
                ring += 1;
            }
            best.sqrt()
        })
        .collect();
    let n = d.len();
    let mid = n / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower + upper))
    }
}
