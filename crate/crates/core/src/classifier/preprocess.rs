use image::imageops::{self, FilterType};
use image::{DynamicImage, RgbImage};

use super::{ClassifierError, ImageTensor, Result, INPUT_SIZE};

/// Decodes PNG or JPEG bytes, squashes them to 224x224 with bilinear
/// filtering and scales each channel to [0, 1].
pub fn preprocess(image_bytes: &[u8]) -> Result<ImageTensor> {
    if image_bytes.is_empty() {
        return Err(ClassifierError::InvalidImage("no image data".into()));
    }
    let img = image::load_from_memory(image_bytes)
        .map_err(|e| ClassifierError::InvalidImage(e.to_string()))?;
    preprocess_image(&img)
}

pub fn preprocess_image(img: &DynamicImage) -> Result<ImageTensor> {
    let rgb = img.to_rgb8();
    if rgb.width() == 0 || rgb.height() == 0 {
        return Err(ClassifierError::InvalidImage("empty raster".into()));
    }
    let side = INPUT_SIZE as u32;
    let resized: RgbImage = if rgb.dimensions() == (side, side) {
        rgb
    } else {
        imageops::resize(&rgb, side, side, FilterType::Triangle)
    };
    let data = resized
        .into_raw()
        .into_iter()
        .map(|b| f32::from(b) / 255.0)
        .collect();
    ImageTensor::new(data)
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use image::{ImageFormat, Rgb};
    use proptest::prelude::*;

    use super::*;

    fn encode(img: &RgbImage, format: ImageFormat) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, format).unwrap();
        out.into_inner()
    }

    #[test]
    fn non_square_photo_is_squashed() {
        let img = RgbImage::from_fn(100, 200, |x, y| Rgb([(x * 2) as u8, y as u8, 77]));
        let t = preprocess(&encode(&img, ImageFormat::Png)).unwrap();
        assert_eq!(t.values().len(), 224 * 224 * 3);
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn white_and_black_extremes() {
        let white = RgbImage::from_pixel(224, 224, Rgb([255, 255, 255]));
        let t = preprocess(&encode(&white, ImageFormat::Png)).unwrap();
        assert!(t.values().iter().all(|v| *v == 1.0));

        let black = RgbImage::from_pixel(31, 17, Rgb([0, 0, 0]));
        let t = preprocess(&encode(&black, ImageFormat::Png)).unwrap();
        assert!(t.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jpeg_is_supported() {
        let img = RgbImage::from_pixel(64, 48, Rgb([200, 30, 30]));
        let t = preprocess(&encode(&img, ImageFormat::Jpeg)).unwrap();
        assert!(t.mean_rgb()[0] > 0.7);
    }

    #[test]
    fn undecodable_bytes() {
        assert!(matches!(
            preprocess(&[]),
            Err(ClassifierError::InvalidImage(_))
        ));
        assert!(matches!(
            preprocess(b"definitely not a png"),
            Err(ClassifierError::InvalidImage(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn output_stays_in_unit_range(
            w in 1u32..40, h in 1u32..40, seed in any::<u64>()
        ) {
            let img = RgbImage::from_fn(w, h, |x, y| {
                let v = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(u64::from(x * 31 + y * 17));
                Rgb([(v >> 8) as u8, (v >> 24) as u8, (v >> 40) as u8])
            });
            let t = preprocess(&encode(&img, ImageFormat::Png)).unwrap();
            let min = t.values().iter().cloned().fold(f32::INFINITY, f32::min);
            let max = t.values().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(min >= 0.0 && max <= 1.0);
        }
    }
}
