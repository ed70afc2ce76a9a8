use std::str::FromStr;

/// A non-empty list of seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;

    /// `a..b` and `a..=b` are both inclusive; `a,b,c` lists seeds.
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if b < a {
                return Err(format!("empty seed range {s:?}"));
            }
            (a..=b).collect()
        } else {
            s.split(',').map(num).collect::<Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err("no seeds".into());
        }
        Ok(Seeds(seeds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!("0..19".parse::<Seeds>().unwrap().0.len(), 20);
        assert_eq!("3..=4".parse::<Seeds>().unwrap().0, vec![3, 4]);
        assert_eq!("7".parse::<Seeds>().unwrap().0, vec![7]);
        assert_eq!("1, 5".parse::<Seeds>().unwrap().0, vec![1, 5]);
        assert!("5..2".parse::<Seeds>().is_err());
        assert!("x".parse::<Seeds>().is_err());
    }
}
