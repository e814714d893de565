//! Image renderings of the motion distribution map and the object map.

use crate::error::{AadError, Result};
use crate::frame_io::{encode_pgm, encode_ppm};
use crate::motion_stats::{Channel, StatsGrid};
use crate::object_map::ObjectMap;

/// `round(255 * |v| / max|v|)`, all zeros when the maximum is zero.
pub fn normalize_abs(values: &[f64]) -> Vec<u8> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .map(|v| {
            if max > 0.0 {
                (255.0 * v.abs() / max).round() as u8
            } else {
                0
            }
        })
        .collect()
}

fn upscale<T: Copy>(values: &[T], w: usize, h: usize, scale: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len() * scale * scale);
    for y in 0..h * scale {
        for x in 0..w * scale {
            out.push(values[(y / scale) * w + x / scale]);
        }
    }
    out
}

/// Mean vx in green, mean vy in blue, each normalized separately; every
/// cell becomes a `scale`×`scale` square. Cells never observed stay black.
pub fn stats_to_ppm(stats: &StatsGrid, scale: usize) -> Result<Vec<u8>> {
    if stats.is_empty() {
        return Err(AadError::InsufficientData("empty statistics grid".into()));
    }
    if scale == 0 {
        return Err(AadError::Config("render scale must be >= 1".into()));
    }
    let means = |ch| stats.channel(ch).map(|c| c.mean).collect::<Vec<f64>>();
    let g = normalize_abs(&means(Channel::Vx));
    let b = normalize_abs(&means(Channel::Vy));
    let rgb: Vec<[u8; 3]> = g.iter().zip(&b).map(|(&g, &b)| [0, g, b]).collect();
    let (w, h) = stats.dims();
    let flat: Vec<u8> = upscale(&rgb, w, h, scale).concat();
    Ok(encode_ppm(w * scale, h * scale, &flat))
}

/// Per-pixel probability of `class_id`, normalized to `[0, 255]`.
pub fn class_heat_map(map: &ObjectMap, class_id: usize) -> Result<Vec<u8>> {
    if map.width() == 0 || map.height() == 0 {
        return Err(AadError::InsufficientData("empty object map".into()));
    }
    let mut probs = Vec::with_capacity(map.width() * map.height());
    for y in 0..map.height() {
        for x in 0..map.width() {
            probs.push(if map.total(x, y) == 0 {
                0.0
            } else {
                map.class_probability(x, y, class_id)?
            });
        }
    }
    Ok(encode_pgm(map.width(), map.height(), &normalize_abs(&probs)))
}

/// Classes with at least one observation, in id order.
pub fn observed_classes(map: &ObjectMap) -> Vec<usize> {
    (0..map.classes())
        .filter(|&c| (0..map.height()).any(|y| (0..map.width()).any(|x| map.count(x, y, c) > 0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::decode_pgm;
    use crate::object_map::DetectionRecord;

    fn ppm_pixels(bytes: &[u8]) -> &[u8] {
        // "P6\n{w} {h}\n255\n"
        let mut newlines = 0;
        let start = bytes
            .iter()
            .position(|&b| {
                newlines += (b == b'\n') as u32;
                newlines == 3
            })
            .unwrap();
        &bytes[start + 1..]
    }

    #[test]
    fn unobserved_grid_is_black() {
        let stats = StatsGrid::new(3, 2);
        let img = stats_to_ppm(&stats, 2).unwrap();
        assert!(img.starts_with(b"P6\n6 4\n255\n"));
        assert!(ppm_pixels(&img).iter().all(|&v| v == 0));
    }

    #[test]
    fn two_cells_by_hand() {
        let mut stats = StatsGrid::new(2, 1);
        stats.cell_mut(0, Channel::Vx).mean = 2.0;
        stats.cell_mut(1, Channel::Vx).mean = -0.5;
        stats.cell_mut(0, Channel::Vy).mean = 0.3;
        stats.cell_mut(1, Channel::Vy).mean = 0.9;
        let img = stats_to_ppm(&stats, 1).unwrap();
        // green: 255, round(63.75) = 64; blue: round(85) = 85, 255
        assert_eq!(ppm_pixels(&img), &[0, 255, 85, 0, 64, 255]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(stats_to_ppm(&StatsGrid::new(0, 0), 1).is_err());
        assert!(stats_to_ppm(&StatsGrid::new(1, 1), 0).is_err());
    }

    #[test]
    fn single_class_heat_map_is_the_observed_mask() {
        let mut map = ObjectMap::new(6, 4, 1);
        map.accumulate(&[DetectionRecord {
            frame_index: 0,
            class_id: 0,
            score: 0.9,
            bbox: [1.0, 1.0, 3.0, 3.0],
        }]);
        let img = decode_pgm(&class_heat_map(&map, 0).unwrap()).unwrap();
        assert_eq!(img.dims(), (6, 4));
        let pixels = img.data();
        for y in 0..4 {
            for x in 0..6 {
                let expect = if map.total(x, y) > 0 { 255.0 } else { 0.0 };
                assert_eq!(pixels[y * 6 + x], expect);
            }
        }
        assert_eq!(observed_classes(&map), vec![0]);
    }
}
