//! Exact trellis optimizers used to check the greedy linker.
//!
//! Both routes share nothing with the linker except [`linking_score`], and
//! accumulate path scores front to back in the same order the linker does,
//! so scores of identical paths agree bit for bit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linking::linking_score;
use crate::model::StreamDetections;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPath {
    /// Proposal index per frame, frame 1 first.
    pub path: Vec<usize>,
    pub score: f64,
}

/// `links[k][j][i]`: linking score from proposal `j` of frame `k + 1` to proposal `i` of frame `k + 2`.
fn link_table(video: &StreamDetections) -> Result<Vec<Vec<Vec<f64>>>> {
    for (k, f) in video.frames().iter().enumerate() {
        if f.proposals.is_empty() {
            return Err(Error::EmptyFrame { frame: k as u32 + 1 });
        }
    }
    video
        .frames()
        .windows(2)
        .map(|w| {
            w[0].proposals
                .iter()
                .map(|prev| {
                    w[1].proposals
                        .iter()
                        .map(|next| linking_score(prev, next))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Highest-scoring path through the whole trellis, by max-sum dynamic
/// programming in O(T·N²).
///
/// Among equal scores the lowest index wins, deciding at the last frame
/// first and then backwards through each predecessor choice.
pub fn dp_optimal_path(video: &StreamDetections) -> Result<ScoredPath> {
    let links = link_table(video)?;
    let mut best: Vec<f64> = vec![0.0; video.frame(0).len()];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(links.len());
    for table in &links {
        let width = table[0].len();
        let mut next = vec![f64::NEG_INFINITY; width];
        let mut from = vec![0usize; width];
        for (j, row) in table.iter().enumerate() {
            for (i, &l) in row.iter().enumerate() {
                let candidate = best[j] + l;
                if candidate > next[i] {
                    next[i] = candidate;
                    from[i] = j;
                }
            }
        }
        back.push(from);
        best = next;
    }

    let mut end = 0;
    for (i, &s) in best.iter().enumerate() {
        if s > best[end] {
            end = i;
        }
    }
    let score = best[end];
    let mut path = vec![end];
    for from in back.iter().rev() {
        let prev = from[*path.last().expect("non-empty")];
        path.push(prev);
    }
    path.reverse();
    Ok(ScoredPath { path, score })
}

/// Every path through the trellis with its score, in lexicographic order.
///
/// Fails when the number of paths exceeds `max_paths`.
pub fn enumerate_paths(video: &StreamDetections, max_paths: usize) -> Result<Vec<ScoredPath>> {
    let widths: Vec<usize> = video.frames().iter().map(|f| f.proposals.len()).collect();
    let mut total: u128 = 1;
    for &w in &widths {
        total = total.saturating_mul(w as u128);
        if total > max_paths as u128 {
            return Err(Error::PathBlowup {
                paths: widths.iter().fold(1u128, |a, &w| a.saturating_mul(w as u128)),
                limit: max_paths,
            });
        }
    }
    let links = link_table(video)?;

    let mut out = Vec::with_capacity(total as usize);
    let mut path = vec![0usize; widths.len()];
    loop {
        let mut score = 0.0;
        for (k, table) in links.iter().enumerate() {
            score += table[path[k]][path[k + 1]];
        }
        out.push(ScoredPath {
            path: path.clone(),
            score,
        });
        // odometer, last frame fastest
        let mut k = widths.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            path[k] += 1;
            if path[k] < widths[k] {
                break;
            }
            path[k] = 0;
        }
    }
}
