//! Fixed-capacity experience replay with uniform sampling.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    /// `(n_d, q_d)` before the action.
    pub state: (usize, usize),
    pub action: usize,
    pub reward: f64,
    pub next_state: (usize, usize),
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `exp`, overwriting the oldest entry once full.
    pub fn push(&mut self, exp: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(exp);
        } else {
            self.items[self.next] = exp;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `k` distinct entries chosen uniformly (fewer if the buffer is smaller).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<&Experience> {
        let k = k.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(i: usize) -> Experience {
        Experience {
            state: (i, 0),
            action: 0,
            reward: 0.0,
            next_state: (i, 0),
            done: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(exp(i));
            assert!(buf.len() <= 3);
        }
        let mut ids: Vec<usize> = buf.iter().map(|e| e.state.0).collect();
        ids.sort();
        assert_eq!(ids, vec![2, 3, 4]);
    }

    #[test]
    fn samples_without_replacement() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..30 {
            buf.push(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut ids: Vec<usize> = buf.sample(&mut rng, 25).iter().map(|e| e.state.0).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 25);
        }
        assert_eq!(buf.sample(&mut rng, 100).len(), 30);
    }
}
