//! Ground-plane points and the rectangular surveillance field.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Self) -> S {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }

    pub fn norm(&self) -> S {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, other: &Self) -> S {
        self.x * other.x + self.y * other.y
    }

    /// 2-D cross product (z component).
    pub fn cross(&self, other: &Self) -> S {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, `None` for a (near) zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > S::epsilon() {
            Some(Self::new(self.x / n, self.y / n))
        } else {
            None
        }
    }
}

/// Axis-aligned rectangle `[min_x, max_x] × [min_y, max_y]` in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<S> {
    pub min_x: S,
    pub min_y: S,
    pub max_x: S,
    pub max_y: S,
}

impl<S: Scalar> Rect<S> {
    pub fn new(min_x: S, min_y: S, max_x: S, max_y: S) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    /// Field anchored at the origin, `width × height`.
    pub fn field(width: S, height: S) -> Self {
        Self::new(S::zero(), S::zero(), width, height)
    }

    pub fn contains(&self, p: &Point2<S>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn center(&self) -> Point2<S> {
        let two = S::lit(2.0);
        Point2::new((self.min_x + self.max_x) / two, (self.min_y + self.max_y) / two)
    }

    pub fn width(&self) -> S {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> S {
        self.max_y - self.min_y
    }
}
