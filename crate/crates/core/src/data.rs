//! Point clouds, discrete measures over them, and ground metrics.
//!
//! All measures reference one shared [`PointCloud`] by index, so a single
//! tree embedding of the cloud serves every measure.
//!
//! Text formats:
//!
//! - vectors: first line `N d`, then `N` lines of `d` whitespace-separated decimals;
//! - measures: one measure per line, `k idx:mass ...` with 0-based indices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a measure before it is renormalized.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Formats a value with 17 significant digits, enough for an exact round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Dense row-major set of support vectors shared by all measures.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be at least 1".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not form a non-empty set of {dim}-d points",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite coordinate in point {}",
                pos / dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn n_points(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| perr(1, "missing `N d` header".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(perr(hline, "header must be `N d`".into()));
        }
        let n: usize = parse_token(head[0]).map_err(|m| perr(hline, m))?;
        let dim: usize = parse_token(head[1]).map_err(|m| perr(hline, m))?;
        if n == 0 || dim == 0 {
            return Err(perr(hline, "N and d must be at least 1".into()));
        }

        let mut coords = Vec::with_capacity(n * dim);
        let mut rows = 0;
        for (lno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if rows == n {
                return Err(perr(lno, format!("more than {n} rows")));
            }
            let before = coords.len();
            for tok in line.split_whitespace() {
                let v: f64 = parse_token(tok).map_err(|m| perr(lno, m))?;
                if !v.is_finite() {
                    return Err(perr(lno, format!("non-finite value `{tok}`")));
                }
                coords.push(v);
            }
            if coords.len() - before != dim {
                return Err(perr(
                    lno,
                    format!("expected {dim} values, found {}", coords.len() - before),
                ));
            }
            rows += 1;
        }
        if rows != n {
            return Err(perr(
                text.lines().count() + 1,
                format!("expected {n} rows, found {rows}"),
            ));
        }
        Self::new(dim, coords)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read(path)?, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_points(), self.dim);
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|&v| fmt17(v)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write(path.as_ref(), &self.to_text())
    }
}

/// A probability vector over point indices, stored sparsely and sorted by index.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    entries: Vec<(usize, f64)>,
}

impl Measure {
    /// Validates the entries and renormalizes the masses to sum to one.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if let Some(&(i, m)) = entries.iter().find(|(_, m)| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "mass {m} at index {i} is not strictly positive"
            )));
        }
        entries.sort_by_key(|&(i, _)| i);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMeasure(format!("duplicate index {}", w[0].0)));
        }
        let total: f64 = entries.iter().map(|&(_, m)| m).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}, not 1")));
        }
        for e in &mut entries {
            e.1 /= total;
        }
        Ok(Self { entries })
    }

    /// Point mass at `i`.
    pub fn dirac(i: usize) -> Self {
        Self {
            entries: vec![(i, 1.0)],
        }
    }

    /// Builds a measure from arbitrary positive weights by dividing by their sum.
    pub fn from_weights(weights: Vec<(usize, f64)>) -> Result<Self> {
        let total: f64 = weights.iter().map(|&(_, m)| m).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidMeasure(format!("total weight {total}")));
        }
        Self::new(weights.into_iter().map(|(i, m)| (i, m / total)).collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i)
    }

    pub fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if self.max_index() >= cloud.n_points() {
            return Err(Error::InvalidMeasure(format!(
                "index {} out of range for {} points",
                self.max_index(),
                cloud.n_points()
            )));
        }
        Ok(())
    }

    fn to_line(&self) -> String {
        let mut line = self.entries.len().to_string();
        for &(i, m) in &self.entries {
            let _ = write!(line, " {i}:{}", fmt17(m));
        }
        line
    }
}

pub fn parse_measures(text: &str, origin: &Path, cloud: &PointCloud) -> Result<Vec<Measure>> {
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lno,
            msg,
        };
        let mut toks = line.split_whitespace();
        let k: usize = parse_token(toks.next().unwrap_or_default()).map_err(perr)?;
        let mut entries = Vec::with_capacity(k);
        for tok in toks {
            let (i, m) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("expected `idx:mass`, found `{tok}`")))?;
            let i: usize = parse_token(i).map_err(perr)?;
            let m: f64 = parse_token(m).map_err(perr)?;
            if i >= cloud.n_points() {
                return Err(perr(format!(
                    "index {i} out of range for {} points",
                    cloud.n_points()
                )));
            }
            entries.push((i, m));
        }
        if entries.len() != k {
            return Err(perr(format!("declared {k} entries, found {}", entries.len())));
        }
        out.push(Measure::new(entries).map_err(|e| perr(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_measures(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<Vec<Measure>> {
    let path = path.as_ref();
    parse_measures(&read(path)?, path, cloud)
}

pub fn measures_to_text(measures: &[Measure]) -> String {
    let mut out = String::new();
    for m in measures {
        out.push_str(&m.to_line());
        out.push('\n');
    }
    out
}

pub fn save_measures(path: impl AsRef<Path>, measures: &[Measure]) -> Result<()> {
    write(path.as_ref(), &measures_to_text(measures))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GroundMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl GroundMetric {
    pub fn distance(self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Ok(self.distance_unchecked(x, y))
    }

    /// Same as [`distance`](Self::distance) for slices already known to agree in length.
    pub fn distance_unchecked(self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            GroundMetric::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            GroundMetric::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    pub fn between(self, cloud: &PointCloud, i: usize, j: usize) -> f64 {
        self.distance_unchecked(cloud.point(i), cloud.point(j))
    }
}

impl FromStr for GroundMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "manhattan" => Ok(Self::Manhattan),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

fn parse_token<T: FromStr>(tok: &str) -> std::result::Result<T, String> {
    tok.parse()
        .map_err(|_| format!("cannot parse `{tok}` as {}", std::any::type_name::<T>()))
}

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(text: &str) -> Result<PointCloud> {
        PointCloud::parse(text, Path::new("v.txt"))
    }

    #[test]
    fn parses_vectors_file() {
        let c = cloud("2 2\n0 0\n3 4\n").unwrap();
        assert_eq!((c.n_points(), c.dim()), (2, 2));
        assert_eq!(c.point(1), &[3.0, 4.0]);

        let c = cloud("1 1\n5\n").unwrap();
        assert_eq!(c.point(0), &[5.0]);
    }

    #[test]
    fn vectors_parse_errors_name_the_line() {
        match cloud("2 2\n0 0\n3 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(cloud("2\n0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(cloud("2 2\n0 0 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(cloud("1 1\ninf\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(cloud("2 1\n1\n"), Err(Error::Parse { .. })));
        assert!(matches!(cloud(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn measures_load_and_renormalize() {
        let c = cloud("3 1\n0\n1\n2\n").unwrap();
        let ms = parse_measures(
            "1 0:1.0\n2 0:0.5 1:0.5\n2 2:0.3333334 1:0.6666666\n",
            Path::new("m.txt"),
            &c,
        )
        .unwrap();
        assert_eq!(ms[0].entries(), &[(0, 1.0)]);
        assert_eq!(ms[1].entries(), &[(0, 0.5), (1, 0.5)]);
        let total: f64 = ms[2].entries().iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(ms[2].entries()[0].0, 1);
    }

    #[test]
    fn measure_errors() {
        let c = cloud("2 1\n0\n1\n").unwrap();
        let p = Path::new("m.txt");
        assert!(parse_measures("2 0:0.5 1:0.6\n", p, &c).is_err());
        assert!(parse_measures("1 2:1.0\n", p, &c).is_err());
        assert!(parse_measures("2 0:1.0 1:0\n", p, &c).is_err());
        assert!(parse_measures("2 0:0.5 0:0.5\n", p, &c).is_err());
        assert!(parse_measures("2 0:1.0\n", p, &c).is_err());
        assert!(matches!(
            parse_measures("1 0:1\n1 0:x\n", p, &c),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ground_distances() {
        let e = GroundMetric::Euclidean;
        let m = GroundMetric::Manhattan;
        assert_eq!(e.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(m.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 7.0);
        assert_eq!(e.distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(e.distance(&[0.0], &[0.0, 1.0]).is_err());
        assert_eq!("manhattan".parse::<GroundMetric>().unwrap(), m);
        assert!("cosine".parse::<GroundMetric>().is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let c = PointCloud::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-7e-300, 12345.678901234567]]).unwrap();
        let path = dir.path().join("v.txt");
        c.save(&path).unwrap();
        assert_eq!(PointCloud::load(&path).unwrap(), c);

        let ms = vec![
            Measure::from_weights(vec![(0, 1.0), (1, 2.0)]).unwrap(),
            Measure::dirac(1),
        ];
        let mpath = dir.path().join("m.txt");
        save_measures(&mpath, &ms).unwrap();
        assert_eq!(load_measures(&mpath, &c).unwrap(), ms);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 3)
    }

    proptest! {
        #[test]
        fn metric_axioms(x in vec3(), y in vec3(), z in vec3()) {
            for metric in [GroundMetric::Euclidean, GroundMetric::Manhattan] {
                let dxy = metric.distance(&x, &y).unwrap();
                prop_assert_eq!(dxy, metric.distance(&y, &x).unwrap());
                prop_assert!(dxy >= 0.0);
                prop_assert_eq!(metric.distance(&x, &x).unwrap(), 0.0);
                if x != y {
                    prop_assert!(dxy > 0.0);
                }
                let dxz = metric.distance(&x, &z).unwrap();
                let dzy = metric.distance(&z, &y).unwrap();
                prop_assert!(dxy <= dxz + dzy + 1e-12);
            }
        }

        #[test]
        fn cloud_text_round_trip(rows in prop::collection::vec(vec3(), 1..6)) {
            let c = PointCloud::from_rows(&rows).unwrap();
            let back = PointCloud::parse(&c.to_text(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
