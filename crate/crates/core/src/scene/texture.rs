use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

/// Fills every pixel outside `defined` with the average color of the defined
/// pixels at minimal Euclidean distance (ties averaged, rounded to nearest).
/// `defined` is row-major with one entry per pixel.
pub fn texture_extrapolate(image: &RgbImage, defined: &[bool]) -> Result<RgbImage> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if defined.len() != w * h {
        return Err(Error::InvalidArgument(format!(
            "mask has {} entries for a {w}x{h} image",
            defined.len()
        )));
    }
    if !defined.iter().any(|&d| d) {
        return Err(Error::InvalidArgument("mask defines no pixel".into()));
    }
    let dist = squared_distance_transform(defined, w, h);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if defined[y * w + x] {
                continue;
            }
            let d2 = dist[y * w + x];
            let mut sum = [0u64; 3];
            let mut n = 0u64;
            // Every source at exactly this distance has integer offsets on
            // the circle dx² + dy² = d2.
            let r = (d2 as f64).sqrt() as i64 + 1;
            for dx in 0..=r {
                let rest = d2 as i64 - dx * dx;
                if rest < 0 {
                    break;
                }
                let dy = isqrt(rest);
                if dy * dy != rest {
                    continue;
                }
                for (sx, sy) in signed_offsets(dx, dy) {
                    let (qx, qy) = (x as i64 + sx, y as i64 + sy);
                    if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                        continue;
                    }
                    if defined[qy as usize * w + qx as usize] {
                        let c = image.get_pixel(qx as u32, qy as u32).0;
                        for k in 0..3 {
                            sum[k] += c[k] as u64;
                        }
                        n += 1;
                    }
                }
            }
            debug_assert!(n > 0);
            let avg = sum.map(|s| ((s + n / 2) / n) as u8);
            out.put_pixel(x as u32, y as u32, Rgb(avg));
        }
    }
    Ok(out)
}

/// The distinct sign combinations of `(dx, dy)`.
fn signed_offsets(dx: i64, dy: i64) -> Vec<(i64, i64)> {
    let mut v = vec![(dx, dy)];
    if dx != 0 {
        v.push((-dx, dy));
    }
    if dy != 0 {
        v.push((dx, -dy));
    }
    if dx != 0 && dy != 0 {
        v.push((-dx, -dy));
    }
    v
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Exact squared Euclidean distance to the nearest `true` cell
/// (Felzenszwalb and Huttenlocher, separable lower envelopes).
pub fn squared_distance_transform(sources: &[bool], w: usize, h: usize) -> Vec<u64> {
    const INF: u64 = u64::MAX / 4;
    let mut grid: Vec<u64> = sources.iter().map(|&s| if s { 0 } else { INF }).collect();
    let mut buf = Vec::new();
    for x in 0..w {
        buf.clear();
        buf.extend((0..h).map(|y| grid[y * w + x]));
        let col = envelope_1d(&buf);
        for y in 0..h {
            grid[y * w + x] = col[y];
        }
    }
    for y in 0..h {
        let row = envelope_1d(&grid[y * w..(y + 1) * w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    grid
}

fn envelope_1d(f: &[u64]) -> Vec<u64> {
    const INF: u64 = u64::MAX / 4;
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q] < INF).collect();
    if finite.is_empty() {
        return vec![INF; n];
    }
    // Parabola vertices and the boundaries between them, in exact integer
    // arithmetic: the intersection of parabolas at p and q (p < q) sits at
    // s = ((f[q] + q²) - (f[p] + p²)) / (2(q - p)).
    let mut v: Vec<usize> = Vec::with_capacity(finite.len());
    let mut z: Vec<(i128, i128)> = Vec::with_capacity(finite.len());
    let key = |q: usize| f[q] as i128 + (q * q) as i128;
    let intersect = |p: usize, q: usize| (key(q) - key(p), 2 * (q as i128 - p as i128));
    // Compares num1/den1 <= num2/den2 for positive denominators.
    let le = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 <= b.0 * a.1;
    for &q in &finite {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push((i128::MIN / 4, 1));
                    break;
                }
                Some(&p) => {
                    let s = intersect(p, q);
                    if v.len() > 1 && le(s, *z.last().unwrap()) {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut out = vec![0; n];
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && le(z[k + 1], (q as i128, 1)) {
            k += 1;
        }
        let d = q as i128 - v[k] as i128;
        *o = (d * d) as u64 + f[v[k]];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_defined_is_identity() {
        let img = RgbImage::from_fn(7, 5, |x, y| Rgb([x as u8 * 30, y as u8 * 40, 9]));
        let out = texture_extrapolate(&img, &[true; 35]).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn single_source_fills_constant() {
        let img = RgbImage::from_pixel(9, 6, Rgb([0, 0, 0]));
        let mut img2 = img.clone();
        img2.put_pixel(4, 2, Rgb([10, 20, 30]));
        let mut mask = vec![false; 54];
        mask[2 * 9 + 4] = true;
        let out = texture_extrapolate(&img2, &mask).unwrap();
        assert!(out.pixels().all(|p| p.0 == [10, 20, 30]));
    }

    #[test]
    fn equidistant_tie_averages() {
        let mut img = RgbImage::from_pixel(5, 3, Rgb([0, 0, 0]));
        img.put_pixel(4, 1, Rgb([200, 0, 0]));
        let mut mask = vec![false; 15];
        mask[5] = true;
        mask[9] = true;
        let out = texture_extrapolate(&img, &mask).unwrap();
        for y in 0..3 {
            assert_eq!(out.get_pixel(2, y).0, [100, 0, 0]);
        }
        assert_eq!(out.get_pixel(1, 0).0, [0, 0, 0]);
        let again = texture_extrapolate(&out, &[true; 15]).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let (w, h) = (23, 17);
        let mask: Vec<bool> = (0..w * h).map(|i| (i * 7919) % 41 == 0).collect();
        let d = squared_distance_transform(&mask, w, h);
        for y in 0..h {
            for x in 0..w {
                let brute = (0..w * h)
                    .filter(|&k| mask[k])
                    .map(|k| {
                        let (qx, qy) = ((k % w) as i64, (k / w) as i64);
                        ((qx - x as i64).pow(2) + (qy - y as i64).pow(2)) as u64
                    })
                    .min()
                    .unwrap();
                assert_eq!(d[y * w + x], brute);
            }
        }
    }
}
