use super::Image;

/// Exact cat map: the pixel at (x, y) moves to ((2x + y) mod N, (x + y) mod N).
pub fn cat_map(img: &Image, iterations: usize) -> Image {
    let n = img.size();
    let mut cur = img.clone();
    for _ in 0..iterations {
        let mut next = cur.clone();
        for x in 0..n {
            for y in 0..n {
                next.set((2 * x + y) % n, (x + y) % n, cur.get(x, y));
            }
        }
        cur = next;
    }
    cur
}

/// Inverse of one cat-map step applied `iterations` times.
pub fn cat_map_inverse(img: &Image, iterations: usize) -> Image {
    let n = img.size();
    let mut cur = img.clone();
    for _ in 0..iterations {
        let mut next = cur.clone();
        for x in 0..n {
            for y in 0..n {
                next.set(x, y, cur.get((2 * x + y) % n, (x + y) % n));
            }
        }
        cur = next;
    }
    cur
}

/// `alpha - sum_{k=1}^{terms} sigmoid(m log(alpha / k))`, a smooth stand-in for `alpha mod 1`.
pub fn smooth_mod(alpha: f64, m: f64, terms: usize) -> f64 {
    let mut out = alpha;
    for k in 1..=terms {
        out -= 1.0 / (1.0 + (alpha / k as f64).powf(-m));
    }
    out
}

/// Smoothed target of pixel (x, y) in pixel units, or `None` where a log argument is nonpositive.
pub fn smooth_cat_target(x: usize, y: usize, n: usize, m: f64) -> Option<(f64, f64)> {
    let nf = n as f64;
    let a1 = (2 * x + y) as f64 / nf;
    let a2 = (x + y) as f64 / nf;
    if a1 <= 0.0 || a2 <= 0.0 {
        return None;
    }
    // a1 < 3 and a2 < 2 on the grid
    Some((smooth_mod(a1, m, 2) * nf, smooth_mod(a2, m, 1) * nf))
}

/// Smooth cat map: each output pixel samples the input bilinearly at its
/// smoothed target. As `m` grows this tends to `cat_map_inverse(img, 1)`.
pub fn smooth_cat_map(img: &Image, m: f64, iterations: usize) -> Image {
    let n = img.size();
    let mut cur = img.clone();
    for _ in 0..iterations {
        let mut next = cur.clone();
        for x in 0..n {
            for y in 0..n {
                if let Some((tx, ty)) = smooth_cat_target(x, y, n, m) {
                    next.set(x, y, cur.bilinear(tx, ty));
                }
            }
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Image {
        Image::from_fn(n, |x, y| (x * n + y) as f64 / (n * n - 1) as f64)
    }

    fn sorted(img: &Image) -> Vec<f64> {
        let mut v = img.pixels().to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn exact_map_permutes() {
        let img = ramp(8);
        assert_eq!(cat_map(&img, 0), img);
        for k in 1..5 {
            let out = cat_map(&img, k);
            assert_eq!(sorted(&out), sorted(&img));
            assert_eq!(cat_map_inverse(&out, k), img);
        }
    }

    #[test]
    fn period_of_four_by_four() {
        let img = ramp(4);
        let period = (1..=12).find(|&k| cat_map(&img, k) == img).unwrap();
        assert_eq!(period, 3);
    }

    #[test]
    fn one_step_on_four_by_four_by_hand() {
        let img = ramp(4);
        let out = cat_map(&img, 1);
        // (1, 2) -> (0, 3) and (3, 3) -> (1, 2)
        assert_eq!(out.get(0, 3), img.get(1, 2));
        assert_eq!(out.get(1, 2), img.get(3, 3));
        assert_eq!(out.get(0, 0), img.get(0, 0));
    }

    #[test]
    fn smooth_mod_sharpens() {
        assert!((smooth_mod(1.5, 400.0, 2) - 0.5).abs() < 1e-12);
        assert!((smooth_mod(2.25, 400.0, 2) - 0.25).abs() < 1e-12);
        assert!((smooth_mod(0.4, 400.0, 2) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn large_m_tracks_the_exact_targets() {
        let n = 16;
        for x in 0..n {
            for y in 0..n {
                let a1 = (2 * x + y) as f64 / n as f64;
                let a2 = (x + y) as f64 / n as f64;
                let near_int = |a: f64| (a - a.round()).abs() < 0.1;
                if a1 <= 0.0 || a2 <= 0.0 || near_int(a1) || near_int(a2) {
                    continue;
                }
                let (tx, ty) = smooth_cat_target(x, y, n, 50.0).unwrap();
                assert!((tx - ((2 * x + y) % n) as f64).abs() < 1.0, "({x},{y}) -> {tx}");
                assert!((ty - ((x + y) % n) as f64).abs() < 1.0, "({x},{y}) -> {ty}");
            }
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::from_fn(9, |_, _| 0.37);
        let out = smooth_cat_map(&img, 0.95, 2);
        assert!(out.pixels().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn origin_passes_through() {
        let img = ramp(5);
        let out = smooth_cat_map(&img, 0.95, 1);
        assert_eq!(out.get(0, 0), img.get(0, 0));
    }
}
