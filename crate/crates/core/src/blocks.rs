//! `r`-adic index blocks over `[1, r^{n+1}]`.
//!
//! At scale `k` the range is tiled by `r^{n−k+1}` blocks
//! `[1 + h r^k, h r^k + r^k]`; each block splits into `r` sub-blocks of width
//! `r^{k−1}` whose right ends are `h r^k + ℓ r^{k−1}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest supported index; every `r^e` used as an index must stay below it.
pub const MAX_INDEX: u64 = 1 << 40;

/// `r^e`, refusing results above [`MAX_INDEX`].
pub fn checked_pow(r: u64, e: u32) -> Result<u64> {
    if r < 2 {
        return domain(format!("block base must be an integer > 1, got {r}"));
    }
    let mut acc: u64 = 1;
    for _ in 0..e {
        acc = acc
            .checked_mul(r)
            .filter(|v| *v <= MAX_INDEX)
            .ok_or_else(|| Error::Overflow(format!("{r}^{e} exceeds the index cap 2^40")))?;
    }
    Ok(acc)
}

/// `r^{n+1}`, the right end of the indexed range.
pub fn horizon(r: u64, n: u32) -> Result<u64> {
    checked_pow(r, n + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndex {
    pub r: u64,
    pub k: u32,
    pub h: u64,
    /// Number of sub-blocks, `1 ≤ ℓ ≤ r − 1`, when addressing a partial block.
    pub ell: Option<u64>,
}

impl BlockIndex {
    fn width(&self) -> u64 {
        self.r.pow(self.k)
    }

    /// First index of the block.
    pub fn start(&self) -> u64 {
        1 + self.h * self.width()
    }

    /// Last index of the full block.
    pub fn end(&self) -> u64 {
        self.h * self.width() + self.width()
    }

    /// Last index covered: the sub-block end `h r^k + ℓ r^{k−1}` when `ℓ` is
    /// set, the block end otherwise.
    pub fn last(&self) -> u64 {
        match self.ell {
            Some(l) => self.h * self.width() + l * self.r.pow(self.k - 1),
            None => self.end(),
        }
    }
}

fn check_scale(r: u64, n: u32, k: u32) -> Result<()> {
    if k < 1 || k > n + 1 {
        return domain(format!("scale k = {k} outside 1..={}", n + 1));
    }
    horizon(r, n).map(|_| ())
}

/// The `r^{n−k+1}` blocks of width `r^k` tiling `[1, r^{n+1}]`.
pub fn block_partition(r: u64, n: u32, k: u32) -> Result<Vec<BlockIndex>> {
    check_scale(r, n, k)?;
    let count = checked_pow(r, n + 1 - k)?;
    Ok((0..count).map(|h| BlockIndex { r, k, h, ell: None }).collect())
}

/// Sub-blocks `[1 + h r^k, h r^k + ℓ r^{k−1}]` for every `h` at fixed `ℓ`.
pub fn sub_block_partition(r: u64, n: u32, k: u32, ell: u64) -> Result<Vec<BlockIndex>> {
    if ell < 1 || ell >= r {
        return domain(format!("sub-block count {ell} outside 1..{r}"));
    }
    Ok(block_partition(r, n, k)?.into_iter().map(|b| BlockIndex { ell: Some(ell), ..b }).collect())
}

/// `r^k ⌊m / r^k⌋`.
pub fn floor_anchor(m: u64, r: u64, k: u32) -> Result<u64> {
    if m < 1 {
        return domain("floor anchor needs m ≥ 1");
    }
    let w = checked_pow(r, k)?;
    Ok(w * (m / w))
}

/// The `ℓ ∈ 0..r` with `r^{k−1}⌊m/r^{k−1}⌋ = r^k⌊m/r^k⌋ + ℓ r^{k−1}`.
pub fn refinement_offset(m: u64, r: u64, k: u32) -> Result<u64> {
    if k < 1 {
        return domain("refinement needs k ≥ 1");
    }
    let fine = floor_anchor(m, r, k - 1)?;
    let coarse = floor_anchor(m, r, k)?;
    let step = checked_pow(r, k - 1)?;
    let diff = fine - coarse;
    debug_assert_eq!(diff % step, 0);
    Ok(diff / step)
}
