//! Stratified public/private splitting.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{domains, stream};

/// Split `d` into a public part holding `public_fraction` of each class and
/// the complementary private pool.
///
/// Per class: shuffle that class's indices with the seeded stream, take
/// `round_half_up(fraction * count)` for the public side. Both outputs keep
/// the source's original sample order (indices re-sorted ascending), so the
/// split is a pure selection. Errors if a class would end up empty on either
/// side.
pub fn split_public_private(
    d: &Dataset,
    public_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(public_fraction > 0.0 && public_fraction < 1.0) {
        return Err(Error::Data(format!(
            "public fraction must be in (0, 1), got {public_fraction}"
        )));
    }
    let mut rng = stream(seed, domains::SPLIT, 0);
    let mut public_idx = Vec::new();
    let mut private_idx = Vec::new();

    for class in [0u8, 1] {
        let mut idx: Vec<usize> = d
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("class {class} has no samples to split")));
        }
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let take = ((idx.len() as f64 * public_fraction) + 0.5).floor() as usize;
        if take == 0 || take == idx.len() {
            return Err(Error::Data(format!(
                "class {class} stratum would empty: {} samples at fraction {public_fraction}",
                idx.len()
            )));
        }
        public_idx.extend_from_slice(&idx[..take]);
        private_idx.extend_from_slice(&idx[take..]);
    }

    public_idx.sort_unstable();
    private_idx.sort_unstable();
    let public = d.subset(format!("{}-public", d.name), &public_idx)?;
    let private = d.subset(format!("{}-private", d.name), &private_idx)?;
    Ok((public, private))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate::generate_synthetic;
    use crate::data::Sample;

    #[test]
    fn half_split_of_100_is_50_50_with_matching_mix() {
        let d = generate_synthetic(100, 0.3, 1).unwrap();
        let (public, private) = split_public_private(&d, 0.5, 2).unwrap();
        assert_eq!(public.len(), 50);
        assert_eq!(private.len(), 50);
        assert_eq!(public.hotspot_count(), 15);
        assert_eq!(private.hotspot_count(), 15);
        assert!((public.hotspot_rate() - d.hotspot_rate()).abs() < 0.01);
    }

    #[test]
    fn two_samples_split_one_and_one() {
        let d = generate_synthetic(2, 0.5, 3).unwrap();
        let (public, private) = split_public_private(&d, 0.5, 4).unwrap();
        assert_eq!((public.len(), private.len()), (1, 1));
        assert_eq!(public.hotspot_count() + private.hotspot_count(), 1);
    }

    #[test]
    fn union_of_outputs_equals_input_as_multisets() {
        let d = generate_synthetic(137, 0.22, 8).unwrap();
        let (public, private) = split_public_private(&d, 0.4, 9).unwrap();
        assert_eq!(public.len() + private.len(), d.len());

        let key = |s: &Sample| {
            let mut bits: Vec<u8> = s.grid.iter().map(|&v| v as u8).collect();
            bits.push(s.label);
            bits
        };
        let mut all: Vec<_> = public.samples.iter().chain(&private.samples).map(key).collect();
        let mut orig: Vec<_> = d.samples.iter().map(key).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn empty_stratum_is_an_error() {
        // 3 samples of one class: fraction so small the public side rounds
        // to zero for that class
        let d = generate_synthetic(100, 0.02, 2).unwrap(); // 2 hotspots
        assert!(split_public_private(&d, 0.2, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let d = generate_synthetic(80, 0.25, 5).unwrap();
        let a = split_public_private(&d, 0.5, 6).unwrap();
        let b = split_public_private(&d, 0.5, 6).unwrap();
        assert_eq!(a, b);
    }
}
