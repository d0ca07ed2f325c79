use std::collections::VecDeque;

/// The most recent states of a layer, newest first.
///
/// `read(d)` yields the state pushed `d` pushes ago; reads past the stored
/// history yield zeros, matching a zero initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    history: VecDeque<Vec<f64>>,
    capacity: usize,
    dim: usize,
}

impl DelayBuffer {
    /// A buffer able to serve delays `0..=max_delay`.
    pub fn new(dim: usize, max_delay: usize) -> Self {
        let capacity = max_delay + 1;
        Self { history: VecDeque::with_capacity(capacity), capacity, dim }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn push(&mut self, state: Vec<f64>) {
        debug_assert_eq!(state.len(), self.dim);
        if self.history.len() == self.capacity {
            // Reuse the evicted allocation.
            let mut old = self.history.pop_back().unwrap();
            old.copy_from_slice(&state);
            self.history.push_front(old);
        } else {
            self.history.push_front(state);
        }
    }

    pub fn get(&self, delay: usize) -> Option<&[f64]> {
        self.history.get(delay).map(Vec::as_slice)
    }

    /// Copies `range` of the state `delay` steps back into `out`.
    pub fn read_into(&self, delay: usize, range: std::ops::Range<usize>, out: &mut [f64]) {
        match self.get(delay) {
            Some(s) => out.copy_from_slice(&s[range]),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn read(&self, delay: usize) -> Vec<f64> {
        self.get(delay).map_or_else(|| vec![0.0; self.dim], <[f64]>::to_vec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delayed_reads() {
        let mut b = DelayBuffer::new(2, 2);
        assert_eq!(b.read(0), vec![0.0, 0.0]);
        for t in 1..=5 {
            b.push(vec![t as f64, -(t as f64)]);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.read(0), vec![5.0, -5.0]);
        assert_eq!(b.read(2), vec![3.0, -3.0]);
        assert_eq!(b.read(3), vec![0.0, 0.0]);
        let mut out = [9.0];
        b.read_into(1, 1..2, &mut out);
        assert_eq!(out, [-4.0]);
    }
}
