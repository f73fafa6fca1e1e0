//! Indexed max-heap over variable indices, ordered by activity.
//!
//! Ties are broken towards the smaller index so that branching order is a
//! pure function of the clause insertion sequence.

const ABSENT: usize = usize::MAX;

#[derive(Debug, Default, Clone)]
pub(crate) struct VarHeap {
    heap: Vec<usize>,
    position: Vec<usize>,
}

impl VarHeap {
    pub(crate) fn grow(&mut self, num_vars: usize) {
        self.position.resize(num_vars, ABSENT);
    }

    pub(crate) fn contains(&self, v: usize) -> bool {
        self.position[v] != ABSENT
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub(crate) fn insert(&mut self, v: usize, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v] = self.heap.len();
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, activity);
    }

    /// Restores the heap property after `v`'s activity increased.
    pub(crate) fn increased(&mut self, v: usize, activity: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.position[v], activity);
        }
    }

    pub(crate) fn pop(&mut self, activity: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("nonempty");
        self.position[top] = ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last] = 0;
            self.sift_down(0, activity);
        }
        Some(top)
    }

    #[inline]
    fn before(a: usize, b: usize, activity: &[f64]) -> bool {
        activity[a] > activity[b] || (activity[a] == activity[b] && a < b)
    }

    fn sift_up(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !Self::before(v, p, activity) {
                break;
            }
            self.heap[i] = p;
            self.position[p] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v] = i;
    }

    fn sift_down(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && Self::before(self.heap[right], self.heap[left], activity) {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if !Self::before(c, v, activity) {
                break;
            }
            self.heap[i] = c;
            self.position[c] = i;
            i = child;
        }
        self.heap[i] = v;
        self.position[v] = i;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_by_activity_then_index() {
        let activity = vec![1.0, 3.0, 3.0, 0.5, 2.0];
        let mut heap = VarHeap::default();
        heap.grow(activity.len());
        for v in [4, 3, 2, 1, 0] {
            heap.insert(v, &activity);
        }
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop(&activity)).collect();
        assert_eq!(order, vec![1, 2, 4, 0, 3]);
    }

    #[test]
    fn increase_moves_to_front() {
        let mut activity = vec![1.0, 2.0, 3.0];
        let mut heap = VarHeap::default();
        heap.grow(3);
        for v in 0..3 {
            heap.insert(v, &activity);
        }
        activity[0] = 10.0;
        heap.increased(0, &activity);
        assert_eq!(heap.pop(&activity), Some(0));
    }
}
