//! Integer partitions by Zoghbi and Stojmenović's ZS1 (reverse
//! lexicographic order).

use serde::Serialize;

/// A partition in distinct-part form: `Σ distinct_parts[i] * multiplicities[i] = k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    /// Strictly decreasing.
    pub distinct_parts: Vec<usize>,
    pub multiplicities: Vec<usize>,
}

impl Partition {
    /// Collapse a non-increasing list of parts.
    pub fn from_parts(parts: &[usize]) -> Self {
        let mut distinct_parts: Vec<usize> = Vec::new();
        let mut multiplicities: Vec<usize> = Vec::new();
        for &p in parts {
            match distinct_parts.last() {
                Some(&last) if last == p => *multiplicities.last_mut().unwrap() += 1,
                _ => {
                    distinct_parts.push(p);
                    multiplicities.push(1);
                }
            }
        }
        Self {
            distinct_parts,
            multiplicities,
        }
    }

    pub fn order(&self) -> usize {
        self.distinct_parts
            .iter()
            .zip(&self.multiplicities)
            .map(|(l, p)| l * p)
            .sum()
    }

    /// Expanded non-increasing parts.
    pub fn parts(&self) -> Vec<usize> {
        self.distinct_parts
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&l, &p)| std::iter::repeat_n(l, p))
            .collect()
    }
}

/// Call `f` with each partition of `k` as non-increasing parts. `k = 0`
/// yields the empty partition once.
pub fn for_each_partition<F: FnMut(&[usize])>(k: usize, mut f: F) {
    if k == 0 {
        f(&[]);
        return;
    }
    // 1-based working array as in the published pseudo-code.
    let mut x = vec![1usize; k + 1];
    x[1] = k;
    let mut m = 1;
    let mut h = 1;
    f(&x[1..=m]);
    while x[1] != 1 {
        if x[h] == 2 {
            m += 1;
            x[h] = 1;
            h -= 1;
        } else {
            let r = x[h] - 1;
            let mut t = m - h + 1;
            x[h] = r;
            while t >= r {
                h += 1;
                x[h] = r;
                t -= r;
            }
            if t == 0 {
                m = h;
            } else {
                m = h + 1;
                if t > 1 {
                    h += 1;
                    x[h] = t;
                }
            }
        }
        f(&x[1..=m]);
    }
}

/// All partitions of `k` in reverse lexicographic order.
pub fn partitions(k: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    for_each_partition(k, |p| out.push(Partition::from_parts(p)));
    out
}
