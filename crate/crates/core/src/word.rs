//! Letters and words in the free group on `g` generators.
//!
//! The same letter type labels edges of folding graphs.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_int(s: i64) -> Option<Sign> {
        match s {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Generator `index` (1-based) raised to `sign`.
///
/// Ordered by `(index, sign)` with `+` before `-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub index: usize,
    pub sign: Sign,
}

impl Letter {
    pub fn new(index: usize, sign: Sign) -> Self {
        Letter { index, sign }
    }

    pub fn pos(index: usize) -> Self {
        Letter { index, sign: Sign::Plus }
    }

    pub fn neg(index: usize) -> Self {
        Letter { index, sign: Sign::Minus }
    }

    pub fn inverse(self) -> Self {
        Letter { index: self.index, sign: self.sign.flip() }
    }

    /// All `2g` letters in enumeration order.
    pub fn alphabet(rank: usize) -> Vec<Letter> {
        (1..=rank).flat_map(|i| [Letter::pos(i), Letter::neg(i)]).collect()
    }
}

impl fmt::Display for Letter {
    /// Compact form used in traces: `g1+`, `g2-`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "g{}{}", self.index, s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse word token {token:?}")]
pub struct WordParseError {
    pub token: String,
}

/// A sequence of letters; `GroupWord::reduce` gives the free reduction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GroupWord {
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn empty() -> Self {
        GroupWord { letters: Vec::new() }
    }

    /// Wraps letters without reducing.
    pub fn from_letters(letters: Vec<Letter>) -> Self {
        GroupWord { letters }
    }

    /// Freely reduced word from an arbitrary letter sequence.
    pub fn reduce(letters: &[Letter]) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for &l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        GroupWord { letters: out }
    }

    pub fn reduced(&self) -> Self {
        Self::reduce(&self.letters)
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != w[1].inverse())
    }

    /// Strips inverse pairs from the two ends after free reduction.
    pub fn cyclically_reduced(&self) -> Self {
        let mut w = self.reduced().letters;
        while w.len() >= 2 && w[0] == w[w.len() - 1].inverse() {
            w.pop();
            w.remove(0);
        }
        GroupWord { letters: w }
    }

    /// True when the two words are conjugate in the free group.
    pub fn is_conjugate_to(&self, other: &GroupWord) -> bool {
        let a = self.cyclically_reduced().letters;
        let b = other.cyclically_reduced().letters;
        if a.len() != b.len() {
            return false;
        }
        if a.is_empty() {
            return true;
        }
        (0..a.len()).any(|shift| a.iter().cycle().skip(shift).take(a.len()).eq(b.iter()))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn inverse(&self) -> Self {
        GroupWord { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    pub fn concat(&self, other: &GroupWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self::reduce(&letters)
    }

    pub fn pushed(&self, l: Letter) -> Self {
        let mut letters = self.letters.clone();
        letters.push(l);
        GroupWord { letters }
    }

    pub fn max_index(&self) -> usize {
        self.letters.iter().map(|l| l.index).max().unwrap_or(0)
    }
}

impl fmt::Display for GroupWord {
    /// Document syntax: `g1 g2^-1`, or `1` for the empty word.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match l.sign {
                Sign::Plus => write!(f, "g{}", l.index)?,
                Sign::Minus => write!(f, "g{}^-1", l.index)?,
            }
        }
        Ok(())
    }
}

impl FromStr for GroupWord {
    type Err = WordParseError;

    /// Parses whitespace-separated tokens `gK`, `gK^-1`, `gK^1`; `1` or the
    /// empty string is the identity.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut letters = Vec::new();
        for token in s.split_whitespace() {
            if token == "1" {
                continue;
            }
            let err = || WordParseError { token: token.to_string() };
            let body = token.strip_prefix('g').ok_or_else(err)?;
            let (idx, sign) = match body.split_once('^') {
                None => (body, Sign::Plus),
                Some((i, "-1")) => (i, Sign::Minus),
                Some((i, "1")) | Some((i, "+1")) => (i, Sign::Plus),
                Some(_) => return Err(err()),
            };
            let index: usize = idx.parse().map_err(|_| err())?;
            if index == 0 {
                return Err(err());
            }
            letters.push(Letter::new(index, sign));
        }
        Ok(GroupWord { letters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        let (a, ai, b, bi) = (Letter::pos(1), Letter::neg(1), Letter::pos(2), Letter::neg(2));
        assert!(GroupWord::reduce(&[a, ai]).is_empty());
        assert_eq!(GroupWord::reduce(&[a, b, bi, a]).letters(), &[a, a]);
        assert_eq!(GroupWord::reduce(&[bi, a, ai, b, a]).letters(), &[a]);
    }

    #[test]
    fn parse_and_display() {
        let w: GroupWord = "g1 g2^-1".parse().unwrap();
        assert_eq!(w.letters(), &[Letter::pos(1), Letter::neg(2)]);
        assert_eq!(w.to_string(), "g1 g2^-1");
        assert!("1".parse::<GroupWord>().unwrap().is_empty());
        assert!("h1".parse::<GroupWord>().is_err());
        assert!("g0".parse::<GroupWord>().is_err());
        assert!("g1^2".parse::<GroupWord>().is_err());
    }

    #[test]
    fn conjugacy() {
        let w: GroupWord = "g1 g2 g1^-1".parse().unwrap();
        let v: GroupWord = "g2".parse().unwrap();
        assert!(w.is_conjugate_to(&v));
        let u: GroupWord = "g1 g2".parse().unwrap();
        let r: GroupWord = "g2 g1".parse().unwrap();
        assert!(u.is_conjugate_to(&r));
        assert!(!u.is_conjugate_to(&v));
    }
}
