//! Small helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

pub fn fnv1a_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// splitmix64 finalizer; used to derive independent seeds from a base seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a stream label.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    mix64(base ^ mix64(fnv1a(label.as_bytes()) ^ mix64(index)))
}

/// The RNG used everywhere reproducibility matters. ChaCha8 output is
/// specified independently of platform and `rand` release.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the maximum value; the first index wins ties.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Parse `start:end:step` into an inclusive grid. Values are computed per
/// point rather than accumulated; when the step divides the range they are
/// `start + (end - start) * k / m`, so `0:1:0.05` yields exactly 0.95.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:end:step, got `{text}`"));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|e| format!("bad number in `{text}`: {e}"))?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || end < start {
        return Err(format!("grid `{text}` needs step > 0 and end >= start"));
    }
    let ratio = (end - start) / step;
    let m = ratio.round();
    if (ratio - m).abs() < 1e-9 && m >= 1.0 {
        let m = m as usize;
        return Ok((0..=m).map(|k| start + (end - start) * k as f64 / m as f64).collect());
    }
    let count = (ratio + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|k| (start + k as f64 * step).min(end))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax_first(&[]), None);
        assert_eq!(argmax_first(&[-2.0, -2.0]), Some(0));
    }

    #[test]
    fn default_lambda_grid_has_21_points() {
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[19], 0.95);
        assert_eq!(g[20], 1.0);
        assert_eq!(parse_grid("0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.8999999999999999]);
        assert_eq!(parse_grid("0.5:0.5:0.1").unwrap(), vec![0.5]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }
}
