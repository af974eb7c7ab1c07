use image::{imageops, Rgb, RgbImage};

use crate::geometry::{letterbox_params, LetterboxMeta};

pub const LETTERBOX_FILL: u8 = 114;

/// Planar RGB input tensor (`3 x height x width`), values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl InputTensor {
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = (self.width * self.height) as usize;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Letterboxes `image` into `target_w x target_h` with gray padding and
/// converts it to a normalized planar RGB tensor. Targets are expected to be
/// multiples of the model's largest stride.
pub fn preprocess(image: &RgbImage, target_w: u32, target_h: u32) -> (InputTensor, LetterboxMeta) {
    let meta = letterbox_params(image.width(), image.height(), target_w, target_h);
    let (new_w, new_h) = meta.content_size();
    let (off_x, off_y) = meta.content_offset();

    let mut canvas = RgbImage::from_pixel(target_w, target_h, Rgb([LETTERBOX_FILL; 3]));
    if (new_w, new_h) == image.dimensions() {
        imageops::replace(&mut canvas, image, off_x as i64, off_y as i64);
    } else {
        let resized = imageops::resize(image, new_w, new_h, imageops::FilterType::Triangle);
        imageops::replace(&mut canvas, &resized, off_x as i64, off_y as i64);
    }

    let n = (target_w * target_h) as usize;
    let mut data = vec![0.0f32; 3 * n];
    for (i, p) in canvas.pixels().enumerate() {
        for c in 0..3 {
            data[c * n + i] = p.0[c] as f32 / 255.0;
        }
    }
    (
        InputTensor {
            width: target_w,
            height: target_h,
            data,
        },
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_pure_rescale() {
        let img = RgbImage::from_fn(640, 640, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 255]));
        let (t, meta) = preprocess(&img, 640, 640);
        assert_eq!((meta.scale, meta.pad_x, meta.pad_y), (1.0, 0.0, 0.0));
        assert_eq!(t.channel(0)[3], 3.0 / 255.0);
        assert_eq!(t.channel(1)[640 * 7], 7.0 / 255.0);
        assert_eq!(t.channel(2)[12345], 1.0);
    }

    #[test]
    fn full_hd_meta_and_padding() {
        let img = RgbImage::new(1920, 1080);
        let (t, meta) = preprocess(&img, 640, 640);
        assert_eq!(meta, letterbox_params(1920, 1080, 640, 640));
        let fill = LETTERBOX_FILL as f32 / 255.0;
        for c in 0..3 {
            let plane = t.channel(c);
            for y in 0..640usize {
                let expected = if (140..500).contains(&y) { 0.0 } else { fill };
                assert!(plane[y * 640..(y + 1) * 640].iter().all(|&v| v == expected), "row {y}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let img = RgbImage::from_fn(432, 256, |x, y| Rgb([(x ^ y) as u8, x as u8, y as u8]));
        assert_eq!(preprocess(&img, 640, 640), preprocess(&img, 640, 640));
    }
}
