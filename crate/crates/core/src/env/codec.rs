use crate::{Error, Result};

/// Number of compositions of `total` into `parts` positive integers.
fn compositions(total: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    if total < parts {
        return 0;
    }
    binomial((total - 1) as u128, (parts - 1) as u128)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Bijection between action indices and positive compositions of `units`
/// allocation units over `slices` slices, enumerated in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionCodec {
    units: usize,
    slices: usize,
    count: usize,
}

impl ActionCodec {
    pub fn new(units: usize, slices: usize) -> Result<Self> {
        if slices == 0 || units < slices {
            return Err(Error::Validation(format!(
                "need units >= slices >= 1, got units={units} slices={slices}"
            )));
        }
        let count = usize::try_from(compositions(units, slices))
            .map_err(|_| Error::Validation("action space too large".into()))?;
        Ok(Self {
            units,
            slices,
            count,
        })
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Size of the action set, `C(units - 1, slices - 1)`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn decode(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.count {
            return Err(Error::Range {
                index,
                count: self.count,
            });
        }
        let mut rest = index as u128;
        let mut remaining = self.units;
        let mut out = Vec::with_capacity(self.slices);
        for pos in 0..self.slices - 1 {
            let parts_after = self.slices - pos - 1;
            let mut v = 1;
            loop {
                let block = compositions(remaining - v, parts_after);
                if rest < block {
                    break;
                }
                rest -= block;
                v += 1;
            }
            out.push(v);
            remaining -= v;
        }
        out.push(remaining);
        Ok(out)
    }

    pub fn encode(&self, alloc: &[usize]) -> Result<usize> {
        if alloc.len() != self.slices {
            return Err(Error::Validation(format!(
                "allocation has {} parts, expected {}",
                alloc.len(),
                self.slices
            )));
        }
        if alloc.contains(&0) {
            return Err(Error::Validation(
                "every slice needs at least one unit".into(),
            ));
        }
        let sum: usize = alloc.iter().sum();
        if sum != self.units {
            return Err(Error::Validation(format!(
                "allocation sums to {sum}, expected {}",
                self.units
            )));
        }
        let mut index = 0u128;
        let mut remaining = self.units;
        for (pos, &v) in alloc[..self.slices - 1].iter().enumerate() {
            let parts_after = self.slices - pos - 1;
            for smaller in 1..v {
                index += compositions(remaining - smaller, parts_after);
            }
            remaining -= v;
        }
        Ok(index as usize)
    }

    /// Per-slice share of the band, `units_n / units`.
    pub fn fractions(&self, index: usize) -> Result<Vec<f64>> {
        Ok(self
            .decode(index)?
            .into_iter()
            .map(|v| v as f64 / self.units as f64)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force lexicographic enumeration used as the oracle.
    fn enumerate(units: usize, slices: usize) -> Vec<Vec<usize>> {
        fn rec(rem: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if parts == 1 {
                prefix.push(rem);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for v in 1..=rem.saturating_sub(parts - 1) {
                prefix.push(v);
                rec(rem - v, parts - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(units, slices, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn first_action_of_small_space() {
        let codec = ActionCodec::new(4, 3).unwrap();
        assert_eq!(codec.count(), 3);
        assert_eq!(codec.decode(0).unwrap(), vec![1, 1, 2]);
        assert_eq!(codec.encode(&[1, 1, 2]).unwrap(), 0);
        assert_eq!(
            enumerate(4, 3),
            vec![vec![1, 1, 2], vec![1, 2, 1], vec![2, 1, 1]]
        );
    }

    #[test]
    fn single_slice() {
        let codec = ActionCodec::new(5, 1).unwrap();
        assert_eq!(codec.count(), 1);
        assert_eq!(codec.decode(0).unwrap(), vec![5]);
        assert_eq!(codec.encode(&[5]).unwrap(), 0);
        assert!(matches!(codec.decode(1), Err(Error::Range { .. })));
    }

    #[test]
    fn matches_enumeration_oracle() {
        for units in [4, 7, 20] {
            for slices in 1..=4 {
                if units < slices {
                    continue;
                }
                let codec = ActionCodec::new(units, slices).unwrap();
                let all = enumerate(units, slices);
                assert_eq!(all.len(), codec.count());
                for (i, alloc) in all.iter().enumerate() {
                    assert_eq!(&codec.decode(i).unwrap(), alloc);
                    assert_eq!(codec.encode(alloc).unwrap(), i);
                }
            }
        }
    }

    #[test]
    fn full_size_action_space() {
        let codec = ActionCodec::new(100, 3).unwrap();
        assert_eq!(codec.count(), 4851);
        assert_eq!(ActionCodec::new(20, 3).unwrap().count(), 171);
    }

    #[test]
    fn invalid_allocations_rejected() {
        let codec = ActionCodec::new(4, 3).unwrap();
        assert!(matches!(
            codec.encode(&[0, 2, 2]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            codec.encode(&[1, 1, 1]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(codec.encode(&[2, 2]), Err(Error::Validation(_))));
        assert!(ActionCodec::new(2, 3).is_err());
    }

    proptest! {
        #[test]
        fn decode_is_positive_and_conserves(units in 3usize..60, index_seed in any::<u64>()) {
            let codec = ActionCodec::new(units, 3).unwrap();
            let index = (index_seed % codec.count() as u64) as usize;
            let alloc = codec.decode(index).unwrap();
            prop_assert!(alloc.iter().all(|&v| v >= 1));
            prop_assert_eq!(alloc.iter().sum::<usize>(), units);
            prop_assert_eq!(codec.encode(&alloc).unwrap(), index);
        }
    }
}
