pub fn clamp(value: i64, lo: i64, hi: i64) -> i64 {
    if lo > hi {
        panic!("empty interval");
    }
    let mut out = value;
    if out < lo {
        out = lo;
    }
    if out > hi {
        out = hi;
    }
    out
}

pub fn overlaps(a: (i64, i64), b: (i64, i64)) -> bool {
    let left = if a.0 > b.0 { a.0 } else { b.0 };
    let right = if a.1 < b.1 { a.1 } else { b.1 };
    left <= right
}
