use serde::{Deserialize, Serialize};

use super::{BoundingBox, SceneAnnotation, VehicleClass, NUM_CLASSES};
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: usize = 120;
pub const DEFAULT_HEIGHT: usize = 80;

/// Class-valued raster: 0 is background, `1..=4` are vehicle class codes.
/// Cells are stored row-major, `cells[y * width + x]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisualLayout {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

impl VisualLayout {
    pub fn blank(width: usize, height: usize) -> Self {
        VisualLayout { width, height, cells: vec![0; width * height] }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Shape(format!("{} cells for a {width}x{height} grid", cells.len())));
        }
        if let Some(bad) = cells.iter().find(|&&c| c as usize > NUM_CLASSES) {
            return Err(Error::InvalidClass(*bad));
        }
        Ok(VisualLayout { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.width + x]
    }

    /// Pixel count per class, indexed by [`VehicleClass::index`].
    pub fn class_counts(&self) -> [u64; NUM_CLASSES] {
        let mut counts = [0u64; NUM_CLASSES];
        for &c in &self.cells {
            if c > 0 {
                counts[c as usize - 1] += 1;
            }
        }
        counts
    }

    pub fn is_blank(&self) -> bool {
        self.cells.iter().all(|&c| c == 0)
    }

    /// Paints the pixel rectangle covered by `bbox`.
    pub fn paint(&mut self, bbox: &BoundingBox, class: VehicleClass) {
        let (x0, x1) = pixel_span(bbox.b1(), bbox.b3(), self.width);
        let (y0, y1) = pixel_span(bbox.b2(), bbox.b4(), self.height);
        let code = class.code();
        for y in y0..y1 {
            self.cells[y * self.width + x0..y * self.width + x1].fill(code);
        }
    }
}

/// Half-open pixel range `[floor(lo * n), ceil(hi * n))`, never empty.
fn pixel_span(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let start = ((lo * n as f64).floor() as usize).min(n - 1);
    let end = ((hi * n as f64).ceil() as usize).min(n);
    (start, end.max(start + 1))
}

/// Renders a scene as a class raster. Later vehicles overwrite earlier ones.
pub fn rasterize(scene: &SceneAnnotation, width: usize, height: usize) -> VisualLayout {
    let mut layout = VisualLayout::blank(width, height);
    for v in scene.vehicles() {
        layout.paint(&v.bbox, v.class);
    }
    layout
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::VehicleRecord;

    fn one(class: VehicleClass, b: [f64; 4]) -> SceneAnnotation {
        SceneAnnotation::new(0, vec![VehicleRecord::new(1, class, BoundingBox::try_from(b).unwrap())]).unwrap()
    }

    #[test]
    fn empty_scene_is_blank() {
        let l = rasterize(&SceneAnnotation::empty(0), DEFAULT_WIDTH, DEFAULT_HEIGHT);
        assert!(l.is_blank());
        assert_eq!(l.cells().len(), 120 * 80);
    }

    #[test]
    fn full_frame_bus() {
        let l = rasterize(&one(VehicleClass::Bus, [0.0, 0.0, 1.0, 1.0]), 120, 80);
        assert!(l.cells().iter().all(|&c| c == 2));
    }

    #[test]
    fn quarter_car_block() {
        let l = rasterize(&one(VehicleClass::Car, [0.0, 0.0, 0.5, 0.5]), 120, 80);
        for y in 0..80 {
            for x in 0..120 {
                let expect = if x < 60 && y < 40 { 1 } else { 0 };
                assert_eq!(l.get(x, y), expect, "({x},{y})");
            }
        }
        assert_eq!(l.class_counts(), [2400, 0, 0, 0]);
    }

    #[test]
    fn degenerate_box_paints_one_pixel() {
        let l = rasterize(&one(VehicleClass::Van, [0.5, 0.5, 0.5, 0.5]), 120, 80);
        assert_eq!(l.class_counts(), [0, 0, 1, 0]);
        let l = rasterize(&one(VehicleClass::Van, [1.0, 1.0, 1.0, 1.0]), 120, 80);
        assert_eq!(l.get(119, 79), 3);
    }

    #[test]
    fn later_vehicles_overwrite() {
        let a = VehicleRecord::new(1, VehicleClass::Car, BoundingBox::new(0.0, 0.0, 0.5, 0.5).unwrap());
        let b = VehicleRecord::new(2, VehicleClass::Bus, BoundingBox::new(0.25, 0.25, 0.75, 0.75).unwrap());
        let l = rasterize(&SceneAnnotation::new(0, vec![a, b]).unwrap(), 120, 80);
        assert_eq!(l.get(40, 30), 2);
        let l = rasterize(&SceneAnnotation::new(0, vec![b, a]).unwrap(), 120, 80);
        assert_eq!(l.get(40, 30), 1);
    }

    #[test]
    fn from_cells_validates() {
        assert!(VisualLayout::from_cells(2, 2, vec![0, 1, 2, 3]).is_ok());
        assert!(VisualLayout::from_cells(2, 2, vec![0, 1, 2]).is_err());
        assert!(VisualLayout::from_cells(2, 2, vec![0, 1, 2, 5]).is_err());
    }
}
