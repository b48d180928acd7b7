use super::TopomapError;
use crate::coords::CoordinateMap2D;

/// Nearest-electrode ownership of every pixel of an `grid_h × grid_w` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelAssignment {
    pub grid_h: usize,
    pub grid_w: usize,
    /// Row-major owner electrode index per pixel.
    pub owner: Vec<usize>,
    /// `(row, col)` of each electrode.
    pub electrode_pixels: Vec<(usize, usize)>,
}

impl PixelAssignment {
    pub fn n_electrodes(&self) -> usize {
        self.electrode_pixels.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn owner_at(&self, row: usize, col: usize) -> usize {
        self.owner[row * self.grid_w + col]
    }

    /// Number of pixels owned by each electrode.
    pub fn owned_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_electrodes()];
        for &o in &self.owner {
            counts[o] += 1;
        }
        counts
    }
}

fn axis_pixels(values: impl Iterator<Item = f64> + Clone, size: usize, axis: &'static str) -> Result<Vec<usize>, TopomapError> {
    let (lo, hi) = values.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(TopomapError::DegenerateAxis { axis });
    }
    let span = (size - 1) as f64;
    Ok(values.map(|v| ((v - lo) / (hi - lo) * span + 0.5).floor() as usize).collect())
}

/// Map coordinates onto integer pixels: independent min-max scaling of u onto
/// columns `[0, w-1]` and of v onto rows `[0, h-1]`, rounded by floor(x + 0.5).
pub fn scale_to_grid(map: &CoordinateMap2D, h: usize, w: usize) -> Result<Vec<(usize, usize)>, TopomapError> {
    if h < 2 || w < 2 {
        return Err(TopomapError::GridTooSmall { h, w });
    }
    let cols = axis_pixels(map.coords2d.iter().map(|p| p[0]), w, "u")?;
    let rows = axis_pixels(map.coords2d.iter().map(|p| p[1]), h, "v")?;
    let pixels: Vec<(usize, usize)> = rows.into_iter().zip(cols).collect();
    let mut seen = vec![usize::MAX; h * w];
    for (i, &(r, c)) in pixels.iter().enumerate() {
        let slot = &mut seen[r * w + c];
        if *slot != usize::MAX {
            return Err(TopomapError::PixelCollision { first: *slot, second: i, row: r, col: c });
        }
        *slot = i;
    }
    Ok(pixels)
}

/// Assign every pixel to the electrode at the smallest Euclidean pixel
/// distance, ties to the lowest electrode index.
///
/// Electrodes are swept in column order outward from each pixel's column and
/// the sweep stops once the column gap alone exceeds the best distance, which
/// keeps exact integer arithmetic while skipping most candidates.
pub fn build_assignment(pixels: &[(usize, usize)], h: usize, w: usize) -> PixelAssignment {
    assert!(!pixels.is_empty(), "assignment needs at least one electrode");
    let mut by_col: Vec<(i64, i64, usize)> =
        pixels.iter().enumerate().map(|(i, &(r, c))| (c as i64, r as i64, i)).collect();
    by_col.sort_unstable();

    let mut owner = vec![0; h * w];
    for row in 0..h as i64 {
        for col in 0..w as i64 {
            let start = by_col.partition_point(|e| e.0 < col);
            let mut best = (i64::MAX, usize::MAX);
            let consider = |best: &mut (i64, usize), e: &(i64, i64, usize)| {
                let d = (e.0 - col).pow(2) + (e.1 - row).pow(2);
                if d < best.0 || (d == best.0 && e.2 < best.1) {
                    *best = (d, e.2);
                }
            };
            for e in &by_col[start..] {
                if (e.0 - col).pow(2) > best.0 {
                    break;
                }
                consider(&mut best, e);
            }
            for e in by_col[..start].iter().rev() {
                if (e.0 - col).pow(2) > best.0 {
                    break;
                }
                consider(&mut best, e);
            }
            owner[row as usize * w + col as usize] = best.1;
        }
    }
    PixelAssignment { grid_h: h, grid_w: w, owner, electrode_pixels: pixels.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::TransformMethod;

    fn map_u(us: &[f64]) -> CoordinateMap2D {
        CoordinateMap2D {
            labels: (0..us.len()).map(|i| format!("E{i}")).collect(),
            coords2d: us.iter().enumerate().map(|(i, &u)| [u, i as f64]).collect(),
            method: TransformMethod::Parallel,
        }
    }

    #[test]
    fn rounding_rule_half_up() {
        let px = scale_to_grid(&map_u(&[-2.0, 0.0, 2.0]), 32, 32).unwrap();
        let cols: Vec<usize> = px.iter().map(|p| p.1).collect();
        assert_eq!(cols, vec![0, 16, 31]);
    }

    #[test]
    fn degenerate_axis() {
        let m = map_u(&[1.0, 1.0, 1.0]);
        assert!(matches!(scale_to_grid(&m, 32, 32), Err(TopomapError::DegenerateAxis { axis: "u" })));
    }

    #[test]
    fn collision_at_low_resolution() {
        let mut m = map_u(&[0.0, 0.4, 1.0]);
        m.coords2d = vec![[0.0, 0.0], [0.4, 0.4], [1.0, 1.0]];
        match scale_to_grid(&m, 2, 2) {
            Err(TopomapError::PixelCollision { first, second, .. }) => assert!(first < second),
            other => panic!("expected collision, got {other:?}"),
        }
    }

    #[test]
    fn single_electrode_owns_everything() {
        let a = build_assignment(&[(3, 4)], 8, 8);
        assert!(a.owner.iter().all(|&o| o == 0));
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let a = build_assignment(&[(0, 0), (1, 1)], 2, 2);
        assert_eq!(a.owner_at(0, 1), 0);
        assert_eq!(a.owner_at(1, 0), 0);
        assert_eq!(a.owner_at(1, 1), 1);
        let b = build_assignment(&[(1, 1), (0, 0)], 2, 2);
        assert_eq!(b.owner_at(0, 1), 0);
    }

    #[test]
    fn counts_cover_grid() {
        let a = build_assignment(&[(0, 0), (5, 9), (7, 2), (3, 3)], 8, 10);
        assert_eq!(a.owned_counts().iter().sum::<usize>(), 80);
    }
}
