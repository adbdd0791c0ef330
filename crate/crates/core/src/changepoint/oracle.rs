use crate::changepoint::{ChangePointResult, SeriesMatrix};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Largest number of placements the exhaustive search will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Squared error of rows `a..b` around their column means, computed
/// directly (two passes, no prefix sums).
fn segment_error(f: &SeriesMatrix, a: usize, b: usize) -> f64 {
    let len = (b - a) as f64;
    (0..f.width())
        .map(|j| {
            let mean = (a..b).map(|t| f.get(t, j)).sum::<f64>() / len;
            (a..b).map(|t| (f.get(t, j) - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

fn placement_error(f: &SeriesMatrix, breaks: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &b in breaks.iter().chain(std::iter::once(&f.len())) {
        total += segment_error(f, prev, b);
        prev = b;
    }
    total
}

/// Advance `combo` to the next k-combination of 1..l in lexicographic order.
fn next_combination(combo: &mut [usize], l: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < l - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Global minimiser of segment-mean squared error over every placement of
/// `k` breakpoints, by enumeration. The first breakpoint is the unit of
/// parallel work. Ties resolve to the lexicographically smallest placement.
pub fn exhaustive_oracle(f: &SeriesMatrix, k: usize, exec: Exec) -> Result<ChangePointResult> {
    let l = f.len();
    if k > l - 1 {
        return Err(Error::Contract(format!(
            "{k} breakpoints do not fit in a series of length {l}"
        )));
    }
    let space = binomial(l - 1, k);
    if space > ORACLE_LIMIT {
        return Err(Error::Refused(format!(
            "C({}, {k}) = {space} placements exceeds {ORACLE_LIMIT}",
            l - 1
        )));
    }
    if k == 0 {
        return ChangePointResult::from_breakpoints(f, &[]);
    }

    let per_first = exec.map_range(1..l - k + 1, |first| {
        let mut combo: Vec<usize> = (0..k).map(|i| first + i).collect();
        let mut best = (placement_error(f, &combo), combo.clone());
        while next_combination(&mut combo, l) && combo[0] == first {
            let e = placement_error(f, &combo);
            if e < best.0 {
                best = (e, combo.clone());
            }
        }
        best
    });
    let (_, breaks) = per_first
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("non-empty search");
    ChangePointResult::from_breakpoints(f, &breaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_enumerate_all_placements() {
        let l = 7;
        let mut combo = vec![1, 2, 3];
        let mut n = 1;
        while next_combination(&mut combo, l) {
            assert!(combo.windows(2).all(|w| w[0] < w[1]));
            assert!(*combo.last().unwrap() < l);
            n += 1;
        }
        assert_eq!(n, binomial(6, 3));
        assert_eq!(binomial(29, 2), 406);
    }

    #[test]
    fn refuses_oversized_search() {
        let f = SeriesMatrix::unlabeled(&[vec![0.0; 200]]).unwrap();
        assert!(matches!(
            exhaustive_oracle(&f, 5, Exec::Sequential),
            Err(Error::Refused(_))
        ));
    }
}
