use std::fs::File;
use std::io::{BufRead, BufReader, Cursor, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use twinsearch::{
    generate_synthetic, parse_csv, parse_movielens, DataSource, DatasetMeta, RatingMatrix,
};

use crate::error::CliError;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    MovieLens,
    Csv,
    Synthetic,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "movielens" => Ok(Format::MovieLens),
            "csv" => Ok(Format::Csv),
            "synthetic" => Ok(Format::Synthetic),
            other => Err(format!(
                "unknown format {other:?} (movielens|csv|synthetic)"
            )),
        }
    }
}

/// User-based or item-based similarity lists.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    User,
    Item,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(Mode::User),
            "item" => Ok(Mode::Item),
            other => Err(format!("unknown mode {other:?} (user|item)")),
        }
    }
}

/// Shape of a generated matrix when the format is `synthetic`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SyntheticShape {
    pub users: usize,
    pub items: usize,
    pub density: f64,
}

impl Default for SyntheticShape {
    fn default() -> Self {
        SyntheticShape {
            users: 200,
            items: 100,
            density: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
    pub synthetic: SyntheticShape,
    pub seed: u64,
}

fn open(path: Option<&Path>) -> Result<File, CliError> {
    let path =
        path.ok_or_else(|| CliError::Usage("--dataset is required for this format".into()))?;
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Loads the matrix, transposed in item mode.
pub fn load(spec: &DatasetSpec, mode: Mode) -> Result<(RatingMatrix, DatasetMeta), CliError> {
    let (matrix, mut meta) = match spec.format {
        Format::MovieLens => parse_movielens(BufReader::new(open(spec.path.as_deref())?))?,
        Format::Csv => {
            let mut text = String::new();
            open(spec.path.as_deref())?
                .read_to_string(&mut text)
                .map_err(|e| CliError::Io(e.to_string()))?;
            let header = first_field_is_text(&text);
            parse_csv(Cursor::new(text), header)?
        }
        Format::Synthetic => {
            let s = spec.synthetic;
            let m = generate_synthetic(s.users, s.items, s.density, spec.seed)?;
            let meta = DatasetMeta::describe("synthetic", &m, DataSource::Synthetic);
            (m, meta)
        }
    };
    if let Some(p) = &spec.path {
        meta.name = p.display().to_string();
    }
    Ok(match mode {
        Mode::User => (matrix, meta),
        Mode::Item => {
            let t = matrix.transpose();
            let meta = DatasetMeta::describe(meta.name, &t, meta.source);
            (t, meta)
        }
    })
}

fn first_field_is_text(text: &str) -> bool {
    Cursor::new(text)
        .lines()
        .map_while(Result::ok)
        .find(|l| !l.trim().is_empty())
        .and_then(|l| {
            l.split(',')
                .next()
                .map(|f| f.trim().parse::<i64>().is_err())
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        assert!(first_field_is_text("user,item,rating\n1,2,3\n"));
        assert!(!first_field_is_text("\n1,2,3\n"));
        assert!(!first_field_is_text(""));
    }

    #[test]
    fn parse_enums() {
        assert_eq!("item".parse::<Mode>(), Ok(Mode::Item));
        assert_eq!("csv".parse::<Format>(), Ok(Format::Csv));
        assert!("tsv".parse::<Format>().is_err());
    }

    #[test]
    fn synthetic_item_mode_transposes() {
        let spec = DatasetSpec {
            path: None,
            format: Format::Synthetic,
            synthetic: SyntheticShape {
                users: 30,
                items: 12,
                density: 0.5,
            },
            seed: 1,
        };
        let (m, meta) = load(&spec, Mode::Item).unwrap();
        assert_eq!((m.n(), m.m()), (12, 30));
        assert_eq!(meta.rating_count, 30 * 6);
    }

    #[test]
    fn missing_path_is_usage_error() {
        let spec = DatasetSpec {
            path: None,
            format: Format::MovieLens,
            synthetic: SyntheticShape::default(),
            seed: 0,
        };
        assert!(matches!(load(&spec, Mode::User), Err(CliError::Usage(_))));
    }
}
