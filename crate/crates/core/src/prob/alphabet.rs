use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

/// A named, ordered set of distinct symbol labels.
///
/// The symbol order fixes the indexing of every table built over the
/// alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<N, I, S>(name: N, symbols: I) -> Result<Self>
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet(name));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::DuplicateSymbol {
                    name,
                    symbol: s.clone(),
                });
            }
        }
        Ok(Self { name, symbols })
    }

    /// `prefix0, prefix1, ...` with `len` symbols.
    pub fn indexed(name: impl Into<String>, prefix: &str, len: usize) -> Result<Self> {
        let mut symbols = Vec::with_capacity(len);
        for i in 0..len {
            let mut s = prefix.to_string();
            s.push_str(&i.to_string());
            symbols.push(s);
        }
        Self::new(name, symbols)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// Always false; alphabets are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    /// Same symbols under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            symbols: self.symbols.clone(),
        }
    }

    pub fn same_symbols(&self, other: &Alphabet) -> bool {
        self.symbols == other.symbols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(matches!(
            Alphabet::new("X", Vec::<String>::new()),
            Err(Error::EmptyAlphabet(_))
        ));
        assert!(matches!(
            Alphabet::new("X", ["0", "1", "0"]),
            Err(Error::DuplicateSymbol { .. })
        ));
    }

    #[test]
    fn indexing_follows_symbol_order() {
        let a = Alphabet::new("Z", ["0", "1", "e"]).unwrap();
        assert_eq!(a.index_of("e"), Some(2));
        assert_eq!(a.symbol(1), "1");
        assert_eq!(Alphabet::indexed("U", "u", 3).unwrap().symbols(), ["u0", "u1", "u2"]);
    }
}
