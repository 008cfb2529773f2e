use phasenoise::Error;

/// `a:b` (inclusive), `a:b:step`, or `m1,m2,...`.
pub fn parse(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Domain(format!("bad lag list '{text}'"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let lags: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (a, b, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, s] => (num(a)?, num(b)?, num(s)?),
            _ => return Err(bad()),
        };
        if step == 0 || b < a {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if lags.is_empty() || lags.contains(&0) {
        return Err(Error::Domain(format!("lags must be positive: '{text}'")));
    }
    Ok(lags)
}
