use crate::error::{Error, Result};

/// Per-item activation shape in height-width-channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape3 {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Shape3 { h, w, c }
    }

    pub const fn flat(n: usize) -> Self {
        Shape3 { h: 1, w: 1, c: n }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

/// A batch of activations laid out as (batch, height, width, channels).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub batch: usize,
    pub item: Shape3,
    pub values: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(batch: usize, item: Shape3) -> Self {
        Tensor4 {
            batch,
            item,
            values: vec![0.0; batch * item.len()],
        }
    }

    pub fn from_values(batch: usize, item: Shape3, values: Vec<f64>) -> Result<Self> {
        if values.len() != batch * item.len() {
            return Err(Error::shape(
                "tensor",
                format!("{} values cannot fill {batch} items of {item}", values.len()),
            ));
        }
        Ok(Tensor4 { batch, item, values })
    }

    /// Stacks equally sized items into one batch.
    pub fn stack<'a>(item: Shape3, items: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut values = Vec::new();
        let mut batch = 0;
        for x in items {
            if x.len() != item.len() {
                return Err(Error::shape(
                    "tensor",
                    format!("item of {} values does not match {item}", x.len()),
                ));
            }
            values.extend_from_slice(x);
            batch += 1;
        }
        Ok(Tensor4 { batch, item, values })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.batch, self.item.h, self.item.w, self.item.c]
    }

    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.item.len();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn items(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.item.len().max(1))
    }
}
