//! Row-major 2-D grids and the clipped square windows both simulators work on.

use serde::{Deserialize, Serialize};

/// Dense row-major grid of `height` rows by `width` columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.into_iter().flatten().collect();
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.width.max(1))
    }
}

impl<T> std::ops::Index<usize> for Grid<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Grid<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

/// Half-width of the context window. Both simulators look at pixels whose
/// Chebyshev distance to the selected pixel is below 12.
pub const WINDOW_RADIUS: usize = 11;

/// Inclusive pixel bounds of a square window clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Window {
    pub fn around(x: usize, y: usize, radius: usize, width: usize, height: usize) -> Self {
        Window {
            x0: x.saturating_sub(radius),
            x1: (x + radius).min(width - 1),
            y0: y.saturating_sub(radius),
            y1: (y + radius).min(height - 1),
        }
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    /// Row-major flat indices of every pixel in the window.
    pub fn indices(self, width: usize) -> impl Iterator<Item = usize> {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| y * width + x))
    }
}

/// Set of pixel indices supporting O(1) insert-free removal and uniform
/// random selection. Used to draw "a random pixel whose unassigned bit is 1".
#[derive(Debug, Clone)]
pub(crate) struct PixelPool {
    members: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl PixelPool {
    pub fn full(n: usize) -> Self {
        PixelPool {
            members: (0..n as u32).collect(),
            slot: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[cfg(test)]
    pub fn contains(&self, idx: usize) -> bool {
        self.slot[idx] != ABSENT
    }

    pub fn nth(&self, k: usize) -> usize {
        self.members[k] as usize
    }

    pub fn remove(&mut self, idx: usize) -> bool {
        let s = self.slot[idx];
        if s == ABSENT {
            return false;
        }
        let last = self.members.pop().expect("pool non-empty");
        if last as usize != idx {
            self.members[s as usize] = last;
            self.slot[last as usize] = s;
        }
        self.slot[idx] = ABSENT;
        true
    }
}
