//! Connected-component extraction and detection filtering.
//!
//! Components come out of a classic two-pass union-find labeling. Detections
//! are components that pass an area window and sit clear of the frame
//! border; boxes that hug the border are usually objects only partially in
//! view and produce unstable crops, so they are suppressed here and picked
//! up once fully visible.

use crate::geometry::{BoundingBox, FrameDims};
use crate::segmenter::ForegroundMask;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BlobError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobConfig {
    /// Components smaller than this are noise.
    pub min_area: u64,
    /// Components larger than this are scene-wide changes, not objects.
    pub max_area: u64,
    /// Minimal distance from the frame border for a detection to count.
    pub border_margin: u32,
    pub connectivity: Connectivity,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            min_area: 100,
            // 3/8 of a QVGA frame
            max_area: 28_800,
            border_margin: 8,
            connectivity: Connectivity::Eight,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<(), BlobError> {
        if self.min_area == 0 {
            return Err(BlobError::InvalidConfig(
                "min_area must be at least 1".into(),
            ));
        }
        if self.min_area > self.max_area {
            return Err(BlobError::InvalidConfig(format!(
                "min_area {} exceeds max_area {}",
                self.min_area, self.max_area
            )));
        }
        Ok(())
    }
}

/// One connected foreground region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub bbox: BoundingBox,
    pub pixel_count: u64,
}

/// Labeling result. `labels` is row-major; 0 is background and component
/// `k` of `components` carries label `k + 1`. Components are numbered by
/// the scan position of their first pixel.
#[derive(Debug, Clone)]
pub struct Labeled {
    pub dims: FrameDims,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            // path halving
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so labels stay ordered by first appearance
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

pub fn label_components(mask: &ForegroundMask, connectivity: Connectivity) -> Labeled {
    let dims = mask.dims();
    let width = dims.width as usize;
    let height = dims.height as usize;
    let data = mask.data();

    let mut provisional = vec![0u32; data.len()]; // 0 = background, else id+1
    let mut uf = UnionFind::new();

    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if !data[p] {
                continue;
            }
            // Neighbors already scanned: left, and the row above.
            let mut merged: Option<u32> = None;
            let absorb = |id: u32, uf: &mut UnionFind, merged: &mut Option<u32>| match merged {
                None => *merged = Some(id),
                Some(m) => uf.union(*m, id),
            };
            if x > 0 && provisional[p - 1] != 0 {
                absorb(provisional[p - 1] - 1, &mut uf, &mut merged);
            }
            if y > 0 {
                let up = p - width;
                if provisional[up] != 0 {
                    absorb(provisional[up] - 1, &mut uf, &mut merged);
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && provisional[up - 1] != 0 {
                        absorb(provisional[up - 1] - 1, &mut uf, &mut merged);
                    }
                    if x + 1 < width && provisional[up + 1] != 0 {
                        absorb(provisional[up + 1] - 1, &mut uf, &mut merged);
                    }
                }
            }
            let id = match merged {
                Some(id) => uf.find(id),
                None => uf.make(),
            };
            provisional[p] = id + 1;
        }
    }

    // Compact roots into final labels ordered by first scan appearance and
    // accumulate box extents.
    let mut root_to_label = vec![0u32; uf.parent.len()];
    let mut labels = vec![0u32; data.len()];
    let mut components: Vec<Component> = Vec::new();
    let mut extents: Vec<(u32, u32, u32, u32, u64)> = Vec::new(); // x0,y0,x1,y1,count

    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if provisional[p] == 0 {
                continue;
            }
            let root = uf.find(provisional[p] - 1);
            let mut label = root_to_label[root as usize];
            if label == 0 {
                extents.push((x as u32, y as u32, x as u32, y as u32, 0));
                label = extents.len() as u32;
                root_to_label[root as usize] = label;
            }
            labels[p] = label;
            let e = &mut extents[(label - 1) as usize];
            e.0 = e.0.min(x as u32);
            e.1 = e.1.min(y as u32);
            e.2 = e.2.max(x as u32);
            e.3 = e.3.max(y as u32);
            e.4 += 1;
        }
    }

    for (x0, y0, x1, y1, count) in extents {
        components.push(Component {
            bbox: BoundingBox::new(x0 as i32, y0 as i32, x1 - x0 + 1, y1 - y0 + 1),
            pixel_count: count,
        });
    }

    Labeled {
        dims,
        labels,
        components,
    }
}

/// One detected object on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub pixel_count: u64,
    pub frame: u64,
}

/// Labels the mask and keeps components that look like whole objects:
/// area within the configured window and at least `border_margin` pixels
/// from every frame edge. Results are ordered by (y, x, w, h).
pub fn extract_detections(
    mask: &ForegroundMask,
    cfg: &BlobConfig,
    frame_index: u64,
) -> Result<Vec<Detection>, BlobError> {
    cfg.validate()?;
    let labeled = label_components(mask, cfg.connectivity);
    let dims = mask.dims();
    let mut detections: Vec<Detection> = labeled
        .components
        .iter()
        .filter(|c| {
            c.pixel_count >= cfg.min_area
                && c.pixel_count <= cfg.max_area
                && c.bbox.border_distance(dims) >= cfg.border_margin as i64
        })
        .map(|c| Detection {
            bbox: c.bbox,
            pixel_count: c.pixel_count,
            frame: frame_index,
        })
        .collect();
    detections.sort_by_key(|d| (d.bbox.y, d.bbox.x, d.bbox.w, d.bbox.h));
    Ok(detections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::PixelRng;

    fn mask_from(rows: &[&str]) -> ForegroundMask {
        let height = rows.len() as u32;
        let width = rows[0].len() as u32;
        let mut data = Vec::with_capacity((width * height) as usize);
        for row in rows {
            for ch in row.chars() {
                data.push(ch == '#');
            }
        }
        ForegroundMask::from_data(FrameDims::new(width, height), data)
    }

    #[test]
    fn separate_squares_become_separate_components() {
        let mask = mask_from(&["##....##", "##....##", "........"]);
        let labeled = label_components(&mask, Connectivity::Eight);
        assert_eq!(labeled.components.len(), 2);
        assert_eq!(labeled.components[0].bbox, BoundingBox::new(0, 0, 2, 2));
        assert_eq!(labeled.components[0].pixel_count, 4);
        assert_eq!(labeled.components[1].bbox, BoundingBox::new(6, 0, 2, 2));
        // labels partition the pixels
        assert_eq!(labeled.labels[0], 1);
        assert_eq!(labeled.labels[6], 2);
        assert_eq!(labeled.labels[4], 0);
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let mask = mask_from(&["#..", ".#.", "..#"]);
        assert_eq!(
            label_components(&mask, Connectivity::Eight)
                .components
                .len(),
            1
        );
        assert_eq!(
            label_components(&mask, Connectivity::Four).components.len(),
            3
        );
    }

    #[test]
    fn u_shape_merges_into_one_component() {
        // The two arms get different provisional labels that must union.
        let mask = mask_from(&["#.#", "#.#", "###"]);
        let labeled = label_components(&mask, Connectivity::Four);
        assert_eq!(labeled.components.len(), 1);
        assert_eq!(labeled.components[0].pixel_count, 7);
        assert_eq!(labeled.components[0].bbox, BoundingBox::new(0, 0, 3, 3));
    }

    #[test]
    fn empty_mask_has_no_components() {
        let mask = ForegroundMask::all_background(FrameDims::new(10, 10));
        assert!(label_components(&mask, Connectivity::Eight)
            .components
            .is_empty());
    }

    /// Flood fill, the slow reference for the union-find labeling.
    fn flood_fill_components(mask: &ForegroundMask, conn: Connectivity) -> Vec<Vec<usize>> {
        let dims = mask.dims();
        let (w, h) = (dims.width as i64, dims.height as i64);
        let data = mask.data();
        let mut seen = vec![false; data.len()];
        let mut out = Vec::new();
        let offsets: &[(i64, i64)] = match conn {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        };
        for start in 0..data.len() {
            if !data[start] || seen[start] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut queue = vec![start];
            seen[start] = true;
            while let Some(p) = queue.pop() {
                pixels.push(p);
                let (x, y) = ((p as i64) % w, (p as i64) / w);
                for (dx, dy) in offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || nx >= w || ny < 0 || ny >= h {
                        continue;
                    }
                    let q = (ny * w + nx) as usize;
                    if data[q] && !seen[q] {
                        seen[q] = true;
                        queue.push(q);
                    }
                }
            }
            pixels.sort();
            out.push(pixels);
        }
        out
    }

    #[test]
    fn labeling_matches_flood_fill_on_random_masks() {
        for seed in 0..20u64 {
            let dims = FrameDims::new(31, 17);
            let mut rng = PixelRng::new(seed, 0, 0);
            let data: Vec<bool> = (0..dims.pixel_count())
                .map(|_| rng.next_f64() < 0.45)
                .collect();
            let mask = ForegroundMask::from_data(dims, data);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let labeled = label_components(&mask, conn);
                let reference = flood_fill_components(&mask, conn);
                assert_eq!(labeled.components.len(), reference.len(), "seed {seed}");
                // group pixels by final label
                let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); reference.len()];
                for (p, &l) in labeled.labels.iter().enumerate() {
                    if l != 0 {
                        by_label[(l - 1) as usize].push(p);
                    }
                }
                // flood fill seeds in scan order, matching label numbering
                for (got, want) in by_label.iter().zip(&reference) {
                    assert_eq!(got, want, "seed {seed}");
                }
                // component stats agree with the pixel sets
                for (comp, pixels) in labeled.components.iter().zip(&reference) {
                    assert_eq!(comp.pixel_count, pixels.len() as u64);
                    let xs: Vec<i32> = pixels.iter().map(|&p| (p % 31) as i32).collect();
                    let ys: Vec<i32> = pixels.iter().map(|&p| (p / 31) as i32).collect();
                    let x0 = *xs.iter().min().unwrap();
                    let y0 = *ys.iter().min().unwrap();
                    let x1 = *xs.iter().max().unwrap();
                    let y1 = *ys.iter().max().unwrap();
                    assert_eq!(
                        comp.bbox,
                        BoundingBox::new(x0, y0, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32)
                    );
                }
            }
        }
    }

    #[test]
    fn detections_filter_area_and_border() {
        let dims = FrameDims::new(40, 30);
        let mut mask = ForegroundMask::all_background(dims);
        // 4x4 far from border: kept with min_area <= 16
        for y in 10..14 {
            for x in 20..24 {
                mask.set(x, y, true);
            }
        }
        // 2x2 blob: below min_area
        for y in 20..22 {
            for x in 12..14 {
                mask.set(x, y, true);
            }
        }
        // 4x4 close to the left border: suppressed as partially visible
        for y in 10..14 {
            for x in 2..6 {
                mask.set(x, y, true);
            }
        }
        let cfg = BlobConfig {
            min_area: 10,
            max_area: 1000,
            border_margin: 8,
            ..Default::default()
        };
        let dets = extract_detections(&mask, &cfg, 5).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, BoundingBox::new(20, 10, 4, 4));
        assert_eq!(dets[0].pixel_count, 16);
        assert_eq!(dets[0].frame, 5);
    }

    #[test]
    fn oversized_components_are_dropped() {
        let dims = FrameDims::new(40, 40);
        let mut mask = ForegroundMask::all_background(dims);
        for y in 10..30 {
            for x in 10..30 {
                mask.set(x, y, true);
            }
        }
        let cfg = BlobConfig {
            min_area: 10,
            max_area: 399,
            border_margin: 8,
            ..Default::default()
        };
        assert!(extract_detections(&mask, &cfg, 0).unwrap().is_empty());
        let cfg = BlobConfig {
            max_area: 400,
            ..cfg
        };
        assert_eq!(extract_detections(&mask, &cfg, 0).unwrap().len(), 1);
    }

    #[test]
    fn detections_are_ordered_by_position() {
        let dims = FrameDims::new(60, 60);
        let mut mask = ForegroundMask::all_background(dims);
        let boxes = [(30, 40, 5, 5), (10, 40, 5, 5), (20, 15, 5, 5)];
        for &(bx, by, bw, bh) in &boxes {
            for y in by..by + bh {
                for x in bx..bx + bw {
                    mask.set(x, y, true);
                }
            }
        }
        let cfg = BlobConfig {
            min_area: 1,
            ..Default::default()
        };
        let dets = extract_detections(&mask, &cfg, 0).unwrap();
        let anchors: Vec<(i32, i32)> = dets.iter().map(|d| (d.bbox.y, d.bbox.x)).collect();
        assert_eq!(anchors, vec![(15, 20), (40, 10), (40, 30)]);
    }

    #[test]
    fn config_validation() {
        assert!(BlobConfig {
            min_area: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BlobConfig {
            min_area: 50,
            max_area: 10,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BlobConfig::default().validate().is_ok());
    }
}
