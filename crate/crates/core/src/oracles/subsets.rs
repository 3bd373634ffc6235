//! Iteration over fixed-size subsets of a small ground set.

/// All `s`-subsets of `{0, …, n−1}` as bit masks, in increasing order
/// (Gosper's hack). `n` is limited to 63.
#[derive(Debug, Clone)]
pub struct SizedSubsets {
    n: u32,
    next: Option<u64>,
}

impl SizedSubsets {
    pub fn new(n: usize, s: usize) -> Self {
        assert!(n < 64, "ground set too large for a u64 mask");
        let next = if s > n {
            None
        } else if s == 0 {
            Some(0)
        } else {
            Some((1u64 << s) - 1)
        };
        Self { n: n as u32, next }
    }
}

impl Iterator for SizedSubsets {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let nxt = (((r ^ cur) >> 2) / c) | r;
            (nxt >> self.n == 0).then_some(nxt)
        };
        Some(cur)
    }
}

pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        for n in 0..=12 {
            for s in 0..=n {
                let all: Vec<u64> = SizedSubsets::new(n, s).collect();
                assert_eq!(all.len() as u128, binomial_u128(n, s), "n={n} s={s}");
                assert!(all.iter().all(|m| m.count_ones() as usize == s && m >> n == 0));
                assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn oversized_request_is_empty() {
        assert_eq!(SizedSubsets::new(3, 4).count(), 0);
    }
}
