//! Success-rate and size metrics over attempt records.

use crate::source::{count_loc, parse};
use crate::verifier::ErrorClass;

/// 1-based index of the first verified attempt.
pub fn first_success(attempts: &[ErrorClass]) -> Option<usize> {
    attempts
        .iter()
        .position(|c| *c == ErrorClass::Success)
        .map(|i| i + 1)
}

/// Fraction of programs verified within the first `k` attempts; 0 for no
/// programs.
pub fn pass_at_k<A: AsRef<[ErrorClass]>>(records: &[A], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    if records.is_empty() {
        return 0.0;
    }
    let solved = records
        .iter()
        .filter(|r| first_success(r.as_ref()).is_some_and(|i| i <= k))
        .count();
    solved as f64 / records.len() as f64
}

/// Size of `solution` relative to `manual` in percent, counting code and
/// annotation lines. None when the manual solution is empty.
pub fn extra_loc_percent(solution: &str, manual: &str) -> Option<f64> {
    let m = count_loc(&parse(manual)).total();
    let s = count_loc(&parse(solution)).total();
    (m > 0).then(|| 100.0 * (s as f64 - m as f64) / m as f64)
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}
