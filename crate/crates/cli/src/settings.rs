use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use floydnet::model::kv_lines;
use floydnet::{Error, Result};

/// Flag defaults read from a `key = value` file. Keys use the flag names
/// with dashes or underscores; a flag given on the command line wins.
pub struct Settings {
    values: BTreeMap<String, (usize, String)>,
}

impl Settings {
    pub fn empty() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (line, key, value) in kv_lines(&text)? {
            if values
                .insert(key.replace('-', "_"), (line, value.to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { values })
    }

    /// Command-line value if present, else the file value, else `default`.
    pub fn pick<T: FromStr>(&mut self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        let from_file = self.values.remove(key);
        if let Some(v) = flag {
            return Ok(v);
        }
        match from_file {
            Some((line, text)) => text.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid value `{text}` for `{key}`"),
            }),
            None => Ok(default),
        }
    }

    /// Like [`Settings::pick`] for options without a default.
    pub fn pick_opt<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        let from_file = self.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|(line, text)| {
                text.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid value `{text}` for `{key}`"),
                })
            })
            .transpose()
    }

    /// Rejects keys no subcommand option consumed.
    pub fn finish(self) -> Result<()> {
        match self.values.into_iter().next() {
            Some((key, (line, _))) => Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            }),
            None => Ok(()),
        }
    }
}

/// Comma-separated list parsed element-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| format!("invalid list element `{x}`"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let f = file("tol = 1e-3\nseeds = 4\n");
        let mut s = Settings::load(Some(f.path())).unwrap();
        assert_eq!(s.pick(Some(1e-6), "tol", 0.5).unwrap(), 1e-6);
        assert_eq!(s.pick(None, "seeds", 20usize).unwrap(), 4);
        assert_eq!(s.pick(None, "trials", 7usize).unwrap(), 7);
        assert_eq!(s.pick_opt::<usize>(None, "max_n").unwrap(), None);
        s.finish().unwrap();
    }

    #[test]
    fn leftover_keys_are_rejected() {
        let f = file("# comment\ntol = 1e-3\nbogus = 1\n");
        let mut s = Settings::load(Some(f.path())).unwrap();
        s.pick(None, "tol", 0.0).unwrap();
        assert!(matches!(s.finish(), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn bad_values_report_their_line() {
        let f = file("seeds = many\n");
        let mut s = Settings::load(Some(f.path())).unwrap();
        assert!(matches!(
            s.pick(None, "seeds", 1usize),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn lists_parse() {
        assert_eq!(
            "32, 64,128".parse::<List<usize>>().unwrap(),
            List(vec![32, 64, 128])
        );
        assert!("32,x".parse::<List<usize>>().is_err());
    }
}
