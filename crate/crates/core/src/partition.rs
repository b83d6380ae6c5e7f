//! Isohypses: classes of drone positions with the same (binned) expected
//! gain at the eavesdropper. Moving only within one class leaves Eve's
//! observations independent of the chosen position.

use std::collections::BTreeMap;

use crate::channel::GainMap;
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Isohypse {
    /// Bin centre of the Eve expected gain.
    pub m_ell: f64,
    /// Position indices, ascending.
    pub members: Vec<usize>,
}

impl Isohypse {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsohypsePartition {
    /// Classes ordered by ascending `m_ell`.
    pub classes: Vec<Isohypse>,
    pub delta_e: f64,
    positions: usize,
}

impl IsohypsePartition {
    /// Partition from explicit classes. Member indices must be a disjoint
    /// cover of `0..n`; the classes are reordered by ascending `m_ell`.
    pub fn from_classes(mut classes: Vec<Isohypse>, delta_e: f64) -> Result<Self> {
        classes.sort_by(|a, b| a.m_ell.total_cmp(&b.m_ell));
        let positions: usize = classes.iter().map(Isohypse::len).sum();
        let mut seen = vec![false; positions];
        for c in &classes {
            if c.is_empty() {
                return Err(invalid("classes", "empty isohypse"));
            }
            for &p in &c.members {
                if p >= positions || std::mem::replace(&mut seen[p], true) {
                    return Err(invalid("classes", format!("position {p} is duplicated or out of range")));
                }
            }
        }
        Ok(Self {
            classes,
            delta_e,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn max_class_size(&self) -> usize {
        self.classes.iter().map(Isohypse::len).max().unwrap_or(0)
    }

    /// Class index of every position.
    pub fn class_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.positions];
        for (l, c) in self.classes.iter().enumerate() {
            for &p in &c.members {
                out[p] = l;
            }
        }
        out
    }
}

/// Bins positions by `floor(m_E / delta_e)`; empty bins are dropped.
pub fn build_partition(eve_map: &GainMap, delta_e: f64) -> Result<IsohypsePartition> {
    if !(delta_e > 0.0 && delta_e.is_finite()) {
        return Err(invalid("delta_e", format!("must be positive, got {delta_e}")));
    }
    if eve_map.is_empty() {
        return Err(invalid("eve_map", "gain map is empty"));
    }
    let mut bins: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &m) in eve_map.m.iter().enumerate() {
        bins.entry((m / delta_e).floor() as i64).or_default().push(i);
    }
    let classes = bins
        .into_iter()
        .map(|(b, members)| Isohypse {
            m_ell: (b as f64 + 0.5) * delta_e,
            members,
        })
        .collect();
    Ok(IsohypsePartition {
        classes,
        delta_e,
        positions: eve_map.len(),
    })
}

/// Default bin width: the Eve expected-gain range split into `bins` parts.
pub fn range_delta_e(eve_map: &GainMap, bins: usize) -> f64 {
    let (lo, hi) = eve_map
        .m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)));
    let w = (hi - lo) / bins.max(1) as f64;
    if w > 0.0 {
        w
    } else {
        // constant map: any positive width keeps a single class
        hi.abs().max(f64::MIN_POSITIVE)
    }
}

/// Indices of the `k` largest classes, ties broken by smaller class index.
/// Asking for more classes than exist returns all of them.
pub fn largest_classes(partition: &IsohypsePartition, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..partition.len()).collect();
    idx.sort_by(|&a, &b| {
        partition.classes[b]
            .len()
            .cmp(&partition.classes[a].len())
            .then(a.cmp(&b))
    });
    idx.truncate(k.max(1));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ReceiverConfig, Role};
    use proptest::prelude::*;

    pub(crate) fn eve_map(m: Vec<f64>) -> GainMap {
        let n = m.len();
        GainMap {
            receiver: ReceiverConfig::new(Role::Eve, [0.0; 3], 0.0, 1.0).unwrap(),
            positions: vec![[0.0; 3]; n],
            a_pl_db: vec![0.0; n],
            a_sh_db: vec![0.0; n],
            g: m.clone(),
            m,
        }
    }

    fn brute_force_check(map: &GainMap, p: &IsohypsePartition) {
        let mut seen = vec![0usize; map.len()];
        for (l, c) in p.classes.iter().enumerate() {
            assert!(!c.is_empty());
            if l > 0 {
                assert!(p.classes[l - 1].m_ell < c.m_ell);
            }
            for &i in &c.members {
                seen[i] += 1;
                assert!((map.m[i] - c.m_ell).abs() <= p.delta_e / 2.0 * (1.0 + 1e-12));
            }
            let lo = c.members.iter().map(|&i| map.m[i]).fold(f64::INFINITY, f64::min);
            let hi = c.members.iter().map(|&i| map.m[i]).fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo <= p.delta_e);
        }
        assert!(seen.iter().all(|&s| s == 1));
        // every position outside a class is further than delta/2 from its centre
        for (l, c) in p.classes.iter().enumerate() {
            for i in 0..map.len() {
                let inside = (map.m[i] / p.delta_e).floor() == (c.m_ell / p.delta_e).floor();
                assert_eq!(inside, c.members.contains(&i), "class {l} position {i}");
            }
        }
    }

    #[test]
    fn constant_map_single_class() {
        let map = eve_map(vec![0.25; 9]);
        let p = build_partition(&map, range_delta_e(&map, 256)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.classes[0].len(), 9);
    }

    #[test]
    fn two_level_map() {
        let m = vec![1.0, 3.0, 1.0, 3.0, 3.0];
        let map = eve_map(m);
        let p = build_partition(&map, 0.5).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.classes[0].members, vec![0, 2]);
        assert_eq!(p.classes[1].members, vec![1, 3, 4]);
        brute_force_check(&map, &p);
    }

    #[test]
    fn largest_classes_tie_break() {
        let p = IsohypsePartition {
            classes: [5usize, 3, 3, 1]
                .iter()
                .enumerate()
                .map(|(l, &n)| Isohypse {
                    m_ell: l as f64,
                    members: (0..n).collect(),
                })
                .collect(),
            delta_e: 1.0,
            positions: 12,
        };
        assert_eq!(largest_classes(&p, 2), vec![0, 1]);
        assert_eq!(largest_classes(&p, 4), vec![0, 1, 2, 3]);
        assert_eq!(largest_classes(&p, 10), vec![0, 1, 2, 3]);
        let single = IsohypsePartition {
            classes: vec![Isohypse {
                m_ell: 0.5,
                members: vec![0],
            }],
            delta_e: 1.0,
            positions: 1,
        };
        assert_eq!(largest_classes(&single, 3), vec![0]);
    }

    #[test]
    fn rejects_non_positive_width() {
        let map = eve_map(vec![1.0]);
        assert!(build_partition(&map, 0.0).is_err());
        assert!(build_partition(&map, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn partition_contract(m in prop::collection::vec(1e-6f64..1.0, 1..200), bins in 1usize..300) {
            let map = eve_map(m);
            let delta = range_delta_e(&map, bins);
            let p = build_partition(&map, delta).unwrap();
            brute_force_check(&map, &p);
        }

        #[test]
        fn halving_refines(m in prop::collection::vec(1e-6f64..1.0, 1..200), delta in 1e-4f64..0.5) {
            let map = eve_map(m);
            let coarse = build_partition(&map, delta).unwrap();
            let fine = build_partition(&map, delta / 2.0).unwrap();
            prop_assert!(fine.len() >= coarse.len());
            let owner = coarse.class_of();
            for c in &fine.classes {
                let l = owner[c.members[0]];
                prop_assert!(c.members.iter().all(|&i| owner[i] == l));
            }
        }
    }
}
