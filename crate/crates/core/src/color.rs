//! RGB <-> HSV conversion with hue normalized to `[0, 1)`.

use crate::grid::{Grid2D, HsvImage, RgbImage};

/// Converts one RGB triple in `[0, 1]` to `(h, s, v)`.
pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    if delta == 0.0 || s == 0.0 {
        return [0.0, 0.0, max];
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h = 0.0;
    }
    [h, s, max]
}

/// Inverse of [`rgb_to_hsv_pixel`].
pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    if s == 0.0 {
        return [v, v, v];
    }
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    let (height, width) = img.dims();
    let mut h = Grid2D::zeros(height, width);
    let mut s = Grid2D::zeros(height, width);
    let mut v = Grid2D::zeros(height, width);
    for i in 0..height {
        for j in 0..width {
            let [ph, ps, pv] = rgb_to_hsv_pixel(img.pixel(i, j));
            h.set(i, j, ph);
            s.set(i, j, ps);
            v.set(i, j, pv);
        }
    }
    HsvImage { h, s, v }
}

pub fn hsv_to_rgb(hsv: &HsvImage) -> RgbImage {
    let (height, width) = hsv.dims();
    let mut r = Grid2D::zeros(height, width);
    let mut g = Grid2D::zeros(height, width);
    let mut b = Grid2D::zeros(height, width);
    for i in 0..height {
        for j in 0..width {
            let [pr, pg, pb] = hsv_to_rgb_pixel(hsv.pixel(i, j));
            r.set(i, j, pr.clamp(0.0, 1.0));
            g.set(i, j, pg.clamp(0.0, 1.0));
            b.set(i, j, pb.clamp(0.0, 1.0));
        }
    }
    RgbImage { r, g, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primaries() {
        assert_eq!(rgb_to_hsv_pixel([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv_pixel([0.5, 0.5, 0.5]), [0.0, 0.0, 0.5]);
        assert_eq!(rgb_to_hsv_pixel([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn pure_blue_by_sector_formula() {
        // max == b: sector = (r - g)/delta + 4 = 4, hue = 4/6.
        let [h, s, v] = rgb_to_hsv_pixel([0.0, 0.0, 1.0]);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((s, v), (1.0, 1.0));
    }

    #[test]
    fn magenta_wraps_below_one() {
        // max == r with g < b: (g - b)/delta = -1 -> 5 -> 5/6.
        let [h, _, _] = rgb_to_hsv_pixel([1.0, 0.0, 1.0]);
        assert!((h - 5.0 / 6.0).abs() < 1e-15);
        let [h, _, _] = rgb_to_hsv_pixel([1.0, 0.0, 1e-17]);
        assert!((0.0..1.0).contains(&h));
    }

    #[test]
    fn image_conversion_is_valid_hsv() {
        let img = RgbImage::from_fn(3, 4, |i, j| {
            [i as f64 / 3.0, j as f64 / 4.0, ((i + j) % 2) as f64]
        })
        .unwrap();
        let hsv = rgb_to_hsv(&img);
        HsvImage::new(hsv.h.clone(), hsv.s.clone(), hsv.v.clone()).unwrap();
    }

    proptest! {
        #[test]
        fn round_trip_chromatic(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let hsv = rgb_to_hsv_pixel([r, g, b]);
            prop_assume!(hsv[1] > 0.0);
            let back = hsv_to_rgb_pixel(hsv);
            for (x, y) in back.iter().zip([r, g, b]) {
                prop_assert!((x - y).abs() < 1e-9, "{:?} vs {:?}", back, [r, g, b]);
            }
        }

        #[test]
        fn hsv_ranges(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let [h, s, v] = rgb_to_hsv_pixel([r, g, b]);
            prop_assert!((0.0..1.0).contains(&h));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&v));
            if s == 0.0 { prop_assert_eq!(h, 0.0); }
        }
    }
}
