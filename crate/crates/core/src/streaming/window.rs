use rand::Rng;

/// The set of blocks a node holds, as a growable bitset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockBuffer {
    words: Vec<u64>,
    count: usize,
}

impl BlockBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, block: u64) -> bool {
        let (w, b) = ((block / 64) as usize, block % 64);
        self.words.get(w).is_some_and(|x| x >> b & 1 == 1)
    }

    /// Returns whether the block was new.
    pub fn insert(&mut self, block: u64) -> bool {
        let (w, b) = ((block / 64) as usize, block % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] >> b & 1 == 0;
        self.words[w] |= 1 << b;
        self.count += fresh as usize;
        fresh
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// First block `>= from` not held.
    pub fn first_missing_from(&self, from: u64) -> u64 {
        let mut b = from;
        while self.contains(b) {
            b += 1;
        }
        b
    }

    /// Whether every block in `from..from + len` is held.
    pub fn holds_run(&self, from: u64, len: u64) -> bool {
        (from..from + len).all(|b| self.contains(b))
    }
}

/// The download window of a node: `wanted[k]` says whether block
/// `start + k` may be requested now. The first half is the in-order set,
/// the second half the rare set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockWindow {
    pub start: u64,
    pub wanted: Vec<bool>,
}

impl BlockWindow {
    pub fn in_order_len(&self) -> usize {
        self.wanted.len() / 2
    }

    fn earliest(&self, range: std::ops::Range<usize>) -> Option<u64> {
        range
            .into_iter()
            .find(|&k| self.wanted[k])
            .map(|k| self.start + k as u64)
    }

    fn uniform<R: Rng + ?Sized>(&self, range: std::ops::Range<usize>, rng: &mut R) -> Option<u64> {
        let choices: Vec<usize> = range.filter(|&k| self.wanted[k]).collect();
        if choices.is_empty() {
            None
        } else {
            Some(self.start + choices[rng.random_range(0..choices.len())] as u64)
        }
    }
}

/// Picks the next block to request: with probability `in_order_probability`
/// the earliest wanted in-order block, otherwise a uniformly random wanted
/// rare block. An empty choice falls back to the other set.
pub fn select_block<R: Rng + ?Sized>(
    window: &BlockWindow,
    in_order_probability: f64,
    rng: &mut R,
) -> Option<u64> {
    let u: f64 = rng.random();
    select_block_with_draw(window, in_order_probability, u, rng)
}

/// [`select_block`] with the set-choosing uniform `u` supplied.
pub fn select_block_with_draw<R: Rng + ?Sized>(
    window: &BlockWindow,
    in_order_probability: f64,
    u: f64,
    rng: &mut R,
) -> Option<u64> {
    let half = window.in_order_len();
    let in_order = 0..half;
    let rare = half..window.wanted.len();
    if u < in_order_probability {
        window
            .earliest(in_order)
            .or_else(|| window.uniform(rare, rng))
    } else {
        window
            .uniform(rare, rng)
            .or_else(|| window.earliest(in_order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn buffer_basics() {
        let mut b = BlockBuffer::new();
        assert!(b.insert(3));
        assert!(!b.insert(3));
        assert!(b.insert(200));
        assert_eq!(b.len(), 2);
        assert!(b.contains(200) && !b.contains(199) && !b.contains(5000));
        for k in 0..3 {
            b.insert(k);
        }
        assert_eq!(b.first_missing_from(0), 4);
        assert!(b.holds_run(0, 4));
        assert!(!b.holds_run(0, 5));
    }

    #[test]
    fn all_missing_mid_draw_takes_earliest() {
        let w = BlockWindow {
            start: 100,
            wanted: vec![true; 32],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_block_with_draw(&w, 0.9, 0.5, &mut rng), Some(100));
    }

    #[test]
    fn complete_in_order_set_falls_back_to_rare() {
        let mut wanted = vec![false; 32];
        wanted[20] = true;
        wanted[27] = true;
        let w = BlockWindow { start: 0, wanted };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = select_block_with_draw(&w, 0.9, 0.5, &mut rng).unwrap();
        assert!(b == 20 || b == 27);
        let none = BlockWindow {
            start: 0,
            wanted: vec![false; 32],
        };
        assert_eq!(select_block(&none, 0.9, &mut rng), None);
    }

    #[test]
    fn rare_draw_with_empty_rare_set_takes_in_order() {
        let mut wanted = vec![false; 32];
        wanted[3] = true;
        wanted[9] = true;
        let w = BlockWindow { start: 10, wanted };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_block_with_draw(&w, 0.9, 0.95, &mut rng), Some(13));
    }

    #[test]
    fn in_order_frequency() {
        let w = BlockWindow {
            start: 0,
            wanted: vec![true; 32],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let in_order = (0..n)
            .filter(|_| select_block(&w, 0.9, &mut rng).unwrap() < 16)
            .count();
        let freq = in_order as f64 / n as f64;
        // sd = sqrt(0.09 / 1e5) ≈ 0.00095
        assert!((freq - 0.9).abs() < 0.004, "in-order frequency {freq}");
    }

    #[test]
    fn rare_choice_is_uniform() {
        let mut wanted = vec![false; 32];
        for k in [16, 20, 31] {
            wanted[k] = true;
        }
        let w = BlockWindow { start: 0, wanted };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 32];
        for _ in 0..30_000 {
            counts[select_block_with_draw(&w, 0.9, 0.99, &mut rng).unwrap() as usize] += 1;
        }
        for k in [16, 20, 31] {
            assert!((counts[k] as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }
}
