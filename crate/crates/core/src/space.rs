//! Finite discrete metric measure spaces with dominating functions.
//!
//! A space is a finite list of atoms with a validated metric and nonnegative
//! point masses. Balls are closed, so every supremum over radii taken in this
//! crate is exact when evaluated on the finitely many breakpoint radii (the
//! distinct pairwise distances plus zero).

use crate::report::ValidationReport;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use thiserror::Error;

/// Default cap on the number of points: triangle validation is O(N^3) and is
/// run once at construction.
pub const DEFAULT_MAX_POINTS: usize = 512;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("space has no points")]
    Empty,
    #[error("space has {0} points, exceeding the cap of {1} (raise the cap explicitly if intended)")]
    TooLarge(usize, usize),
    #[error("duplicate point id {0}")]
    DuplicateId(u64),
    #[error("unknown point id {0}")]
    UnknownId(u64),
    #[error("negative mass {mass} at point {id}")]
    NegativeMass { id: u64, mass: f64 },
    #[error("total mass is zero")]
    ZeroTotalMass,
    #[error("distance {value} for pair ({a},{b}) is not positive")]
    NonPositiveDistance { a: u64, b: u64, value: f64 },
    #[error("asymmetric distances for pair ({a},{b}): {d_ab} vs {d_ba}")]
    Asymmetric { a: u64, b: u64, d_ab: f64, d_ba: f64 },
    #[error("triangle inequality fails for ({a},{b},{c}): d({a},{c})={d_ac} > d({a},{b})+d({b},{c})={sum}")]
    Triangle {
        a: u64,
        b: u64,
        c: u64,
        d_ac: f64,
        sum: f64,
    },
    #[error("missing distance for pair ({0},{1})")]
    MissingDistance(u64, u64),
    #[error("point {0}: coordinate dimension {1} differs from {2}")]
    MixedDimension(u64, usize, usize),
    #[error("space file mixes coords and dist lines; use one metric source")]
    MixedMetricSource,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dominating function must be positive; got {value} at (point {id}, r={r})")]
    NonPositiveLambda { id: u64, r: f64, value: f64 },
}

/// A closed ball `B(x, r) = { y : d(x, y) <= r }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        assert!(radius >= 0.0, "ball radius must be nonnegative");
        Ball { center, radius }
    }

    /// The same ball dilated by `factor`.
    pub fn dilate(&self, factor: f64) -> Ball {
        Ball::new(self.center, self.radius * factor)
    }
}

/// Finite atomic metric measure space.
///
/// Immutable after construction; all accessors are pure.
#[derive(Debug)]
pub struct MetricMeasureSpace {
    ids: Vec<u64>,
    id_to_index: BTreeMap<u64, usize>,
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>, // row-major N x N
    mass: Vec<f64>,
    support: Vec<usize>,
    breakpoints: OnceLock<Vec<f64>>,
}

impl MetricMeasureSpace {
    /// Build from explicit ids, an optional coordinate embedding and masses.
    /// `dist` must hold the full matrix when no coords are given.
    pub fn new(
        ids: Vec<u64>,
        coords: Option<Vec<Vec<f64>>>,
        dist: Option<Vec<f64>>,
        mass: Vec<f64>,
        max_points: usize,
    ) -> Result<Self, SpaceError> {
        let n = ids.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if n > max_points {
            return Err(SpaceError::TooLarge(n, max_points));
        }
        let mut id_to_index = BTreeMap::new();
        for (i, &id) in ids.iter().enumerate() {
            if id_to_index.insert(id, i).is_some() {
                return Err(SpaceError::DuplicateId(id));
            }
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m >= 0.0) {
                return Err(SpaceError::NegativeMass {
                    id: ids[i],
                    mass: m,
                });
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(SpaceError::ZeroTotalMass);
        }

        let dist = match (&coords, dist) {
            (Some(c), None) => {
                let dim = c[0].len();
                for (i, p) in c.iter().enumerate() {
                    if p.len() != dim {
                        return Err(SpaceError::MixedDimension(ids[i], p.len(), dim));
                    }
                }
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = c[i]
                            .iter()
                            .zip(&c[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        d[i * n + j] = v;
                        d[j * n + i] = v;
                    }
                }
                d
            }
            (None, Some(d)) => d,
            _ => return Err(SpaceError::MixedMetricSource),
        };

        let space = MetricMeasureSpace {
            support: (0..n).filter(|&i| mass[i] > 0.0).collect(),
            ids,
            id_to_index,
            coords,
            dist,
            mass,
            breakpoints: OnceLock::new(),
        };
        space.validate_metric()?;
        Ok(space)
    }

    /// Exhaustive metric validation: zero diagonal, positivity, symmetry and
    /// the triangle inequality over all triples.
    fn validate_metric(&self) -> Result<(), SpaceError> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let d = self.dist[i * n + j];
                if i == j {
                    if d != 0.0 {
                        return Err(SpaceError::NonPositiveDistance {
                            a: self.ids[i],
                            b: self.ids[j],
                            value: d,
                        });
                    }
                    continue;
                }
                if !(d > 0.0) {
                    return Err(SpaceError::NonPositiveDistance {
                        a: self.ids[i],
                        b: self.ids[j],
                        value: d,
                    });
                }
                let back = self.dist[j * n + i];
                if d != back {
                    return Err(SpaceError::Asymmetric {
                        a: self.ids[i],
                        b: self.ids[j],
                        d_ab: d,
                        d_ba: back,
                    });
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let d_ac = self.dist[a * n + c];
                    let sum = self.dist[a * n + b] + self.dist[b * n + c];
                    if d_ac > sum {
                        return Err(SpaceError::Triangle {
                            a: self.ids[a],
                            b: self.ids[b],
                            c: self.ids[c],
                            d_ac,
                            sum,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id_of(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn index_of(&self, id: u64) -> Result<usize, SpaceError> {
        self.id_to_index
            .get(&id)
            .copied()
            .ok_or(SpaceError::UnknownId(id))
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.ids.len() + j]
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Indices of atoms with positive mass (the support of the measure).
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut d = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                d = d.max(self.dist(i, j));
            }
        }
        d
    }

    /// Smallest positive pairwise distance (0 for a single point).
    pub fn min_positive_distance(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.dist(i, j));
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Point indices of the closed ball.
    pub fn ball_points(&self, ball: Ball) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.dist(ball.center, j) <= ball.radius)
            .collect()
    }

    /// Measure of an arbitrary set of atoms.
    pub fn measure(&self, points: &[usize]) -> f64 {
        points.iter().map(|&i| self.mass[i]).sum()
    }

    /// Measure of the closed ball.
    pub fn ball_measure(&self, ball: Ball) -> f64 {
        (0..self.len())
            .filter(|&j| self.dist(ball.center, j) <= ball.radius)
            .map(|j| self.mass[j])
            .sum()
    }

    /// Sorted distinct radii at which any ball around `x` (or around any
    /// point, when `x` is `None`) can change, with 0 prepended.
    ///
    /// Any supremum over `r > 0` of a quantity built from closed balls is
    /// attained on this list, possibly together with one value beyond the
    /// largest entry (where all balls are full).
    pub fn breakpoint_radii(&self, x: Option<usize>) -> Vec<f64> {
        match x {
            Some(i) => {
                let mut v: Vec<f64> = (0..self.len()).map(|j| self.dist(i, j)).collect();
                v.push(0.0);
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
            None => self
                .breakpoints
                .get_or_init(|| {
                    let n = self.len();
                    let mut v = Vec::with_capacity(n * (n - 1) / 2 + 1);
                    v.push(0.0);
                    for i in 0..n {
                        for j in (i + 1)..n {
                            v.push(self.dist(i, j));
                        }
                    }
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    v
                })
                .clone(),
        }
    }
}

/// Dominating function `lambda(x, r)` for the upper-doubling hypothesis.
#[derive(Debug, Clone)]
pub enum DominatingForm {
    /// `lambda(x, r) = c * (1 + r)^n`, independent of `x`.
    Power { c: f64, n: f64 },
    /// Explicit values on a radius grid per point, extended flat on both
    /// sides and between grid radii (right-continuous step function).
    Tabulated {
        radii: Vec<f64>,
        /// `values[point][grid index]`
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct DominatingFunction {
    pub form: DominatingForm,
    /// Doubling constant `C_lambda >= 1` the function is claimed to satisfy.
    pub c_lambda: f64,
}

impl DominatingFunction {
    pub fn power(c: f64, n: f64, c_lambda: f64) -> Self {
        assert!(c > 0.0 && n >= 0.0 && c_lambda >= 1.0);
        DominatingFunction {
            form: DominatingForm::Power { c, n },
            c_lambda,
        }
    }

    /// Power form fitted to a space: smallest admissible scale for the given
    /// exponent, doubled as a safety factor, paired with `C_lambda = 2^n`
    /// (exact for the power form) unless a larger constant is requested.
    pub fn fitted_power(space: &MetricMeasureSpace, n: f64) -> Self {
        let mut c_min = 0.0f64;
        for &x in space.support() {
            for r in space.breakpoint_radii(Some(x)) {
                let mu = space.ball_measure(Ball::new(x, r));
                c_min = c_min.max(mu / (1.0 + r).powf(n));
            }
        }
        let c = 2.0 * c_min.max(f64::MIN_POSITIVE);
        DominatingFunction::power(c, n, 2f64.powf(n).max(1.0))
    }

    pub fn eval(&self, _space: &MetricMeasureSpace, x: usize, r: f64) -> f64 {
        match &self.form {
            DominatingForm::Power { c, n } => c * (1.0 + r).powf(*n),
            DominatingForm::Tabulated { radii, values } => {
                let row = &values[x];
                // last grid radius <= r, flat extension below the first
                match radii.partition_point(|&g| g <= r) {
                    0 => row[0],
                    k => row[k - 1],
                }
            }
        }
    }

    /// Reject nonpositive tabulated values up front.
    pub fn validate_positive(&self, space: &MetricMeasureSpace) -> Result<(), SpaceError> {
        if let DominatingForm::Tabulated { radii, values } = &self.form {
            for (x, row) in values.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    if !(v > 0.0) {
                        return Err(SpaceError::NonPositiveLambda {
                            id: space.id_of(x),
                            r: radii[k],
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exhaustive upper-doubling check over the support and all breakpoint radii:
/// monotonicity of `r -> lambda(x,r)`, the sandwich
/// `mu(B(x,r)) <= lambda(x,r) <= C_lambda * lambda(x,r/2)`, and the
/// symmetry property `lambda(x,r) <= C_lambda * lambda(y,r)` for `d(x,y) <= r`.
pub fn check_upper_doubling(
    space: &MetricMeasureSpace,
    lambda: &DominatingFunction,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut radii = space.breakpoint_radii(None);
    // one radius past the largest: all balls are already full there
    let beyond = radii.last().copied().unwrap_or(0.0) * 2.0 + 1.0;
    radii.push(beyond);

    for &x in space.support() {
        let mut prev: Option<(f64, f64)> = None;
        for &r in &radii {
            let lam = lambda.eval(space, x, r);
            report.checks += 1;
            if let Some((r0, lam0)) = prev {
                if lam < lam0 {
                    report.violate(
                        "lambda-monotone",
                        format!(
                            "x={} lambda({r0})={lam0} > lambda({r})={lam}",
                            space.id_of(x)
                        ),
                    );
                }
            }
            prev = Some((r, lam));

            let mu = space.ball_measure(Ball::new(x, r));
            if mu > lam {
                report.violate(
                    "upper-doubling",
                    format!("x={} r={r}: mu(B)={mu} > lambda={lam}", space.id_of(x)),
                );
            }
            let half = lambda.eval(space, x, r / 2.0);
            if lam > lambda.c_lambda * half {
                report.violate(
                    "lambda-doubling",
                    format!(
                        "x={} r={r}: lambda={lam} > C*lambda(r/2)={}",
                        space.id_of(x),
                        lambda.c_lambda * half
                    ),
                );
            }
        }
    }

    // symmetry in the center: lambda(x,r) <= C * lambda(y,r) when d(x,y) <= r
    for &x in space.support() {
        for &y in space.support() {
            if x == y {
                continue;
            }
            let d = space.dist(x, y);
            for &r in &radii {
                if d <= r {
                    report.checks += 1;
                    let lx = lambda.eval(space, x, r);
                    let ly = lambda.eval(space, y, r);
                    if lx > lambda.c_lambda * ly {
                        report.violate(
                            "lambda-symmetry",
                            format!(
                                "x={} y={} r={r}: lambda(x,r)={lx} > C*lambda(y,r)={}",
                                space.id_of(x),
                                space.id_of(y),
                                lambda.c_lambda * ly
                            ),
                        );
                    }
                }
            }
        }
    }
    report
}

/// Geometric doubling check: for every ball of breakpoint radius `R` and
/// every breakpoint `r in (0, R]`, a greedily built maximal `r`-separated
/// subset must have cardinality at most `C * (R/r)^n`.
pub fn check_geometric_doubling(
    space: &MetricMeasureSpace,
    n: f64,
    c: f64,
) -> ValidationReport {
    assert!(n >= 0.0 && c > 0.0);
    let mut report = ValidationReport::new();
    let mut seen_balls: Vec<Vec<usize>> = Vec::new();
    for x in 0..space.len() {
        for big_r in space.breakpoint_radii(Some(x)) {
            if big_r <= 0.0 {
                continue;
            }
            let members = space.ball_points(Ball::new(x, big_r));
            if seen_balls.contains(&members) {
                continue; // same point set was already checked at another (x, R)
            }
            // separation structure only changes at distances within the ball
            let mut seps: Vec<f64> = Vec::new();
            for (ai, &a) in members.iter().enumerate() {
                for &b in &members[ai + 1..] {
                    let d = space.dist(a, b);
                    if d > 0.0 && d <= big_r {
                        seps.push(d);
                    }
                }
            }
            seps.push(big_r);
            seps.sort_by(f64::total_cmp);
            seps.dedup();
            for &r in &seps {
                report.checks += 1;
                let mut kept: Vec<usize> = Vec::new();
                for &p in &members {
                    if kept.iter().all(|&q| space.dist(p, q) >= r) {
                        kept.push(p);
                    }
                }
                let bound = c * (big_r / r).powf(n);
                if kept.len() as f64 > bound {
                    report.violate(
                        "geometric-doubling",
                        format!(
                            "ball B({}, {big_r}): {}-separated set of size {} > C(R/r)^n = {bound}",
                            space.id_of(x),
                            r,
                            kept.len()
                        ),
                    );
                }
            }
            seen_balls.push(members);
        }
    }
    report
}

// ---------------------------------------------------------------------------
// text format: `space v1`
// ---------------------------------------------------------------------------

/// Parse the line-oriented `space v1` format.
///
/// `point <id> mass=<float> [coords=<f1,f2,...>]` declares an atom;
/// `dist <id1> <id2> <float>` gives the metric when no coords are present.
/// Lines starting with `#` are ignored.
pub fn parse_space(text: &str) -> Result<MetricMeasureSpace, SpaceError> {
    parse_space_capped(text, DEFAULT_MAX_POINTS)
}

pub fn parse_space_capped(text: &str, max_points: usize) -> Result<MetricMeasureSpace, SpaceError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some((no, l)) => break (no, l.trim()),
            None => {
                return Err(SpaceError::Parse {
                    line: 0,
                    msg: "empty file".into(),
                })
            }
        }
    };
    if header.1 != "space v1" {
        return Err(SpaceError::Parse {
            line: header.0 + 1,
            msg: format!("expected `space v1` header, got `{}`", header.1),
        });
    }

    let mut ids: Vec<u64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    let mut coords: Vec<Option<Vec<f64>>> = Vec::new();
    let mut dists: Vec<(u64, u64, f64)> = Vec::new();

    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| SpaceError::Parse { line: no + 1, msg };
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("point") => {
                let id: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing point id".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad point id: {e}")))?;
                let mut mass: Option<f64> = None;
                let mut cs: Option<Vec<f64>> = None;
                for field in tok {
                    if let Some(v) = field.strip_prefix("mass=") {
                        mass = Some(v.parse().map_err(|e| err(format!("bad mass: {e}")))?);
                    } else if let Some(v) = field.strip_prefix("coords=") {
                        let parsed: Result<Vec<f64>, _> =
                            v.split(',').map(str::parse::<f64>).collect();
                        cs = Some(parsed.map_err(|e| err(format!("bad coords: {e}")))?);
                    } else {
                        return Err(err(format!("unknown field `{field}`")));
                    }
                }
                ids.push(id);
                masses.push(mass.ok_or_else(|| err("point line missing mass=".into()))?);
                coords.push(cs);
            }
            Some("dist") => {
                let a: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing id".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad id: {e}")))?;
                let b: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing id".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad id: {e}")))?;
                let d: f64 = tok
                    .next()
                    .ok_or_else(|| err("missing distance".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad distance: {e}")))?;
                dists.push((a, b, d));
            }
            Some(other) => return Err(err(format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }

    if ids.is_empty() {
        return Err(SpaceError::Empty);
    }
    let have_coords = coords.iter().filter(|c| c.is_some()).count();
    if have_coords > 0 && have_coords < ids.len() {
        return Err(SpaceError::MixedMetricSource);
    }
    if have_coords == ids.len() && !dists.is_empty() {
        return Err(SpaceError::MixedMetricSource);
    }

    if have_coords == ids.len() {
        let cs: Vec<Vec<f64>> = coords.into_iter().map(Option::unwrap).collect();
        MetricMeasureSpace::new(ids, Some(cs), None, masses, max_points)
    } else {
        let n = ids.len();
        let mut index = BTreeMap::new();
        for (i, &id) in ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(SpaceError::DuplicateId(id));
            }
        }
        let mut matrix = vec![f64::NAN; n * n];
        for i in 0..n {
            matrix[i * n + i] = 0.0;
        }
        for (a, b, d) in dists {
            let i = *index.get(&a).ok_or(SpaceError::UnknownId(a))?;
            let j = *index.get(&b).ok_or(SpaceError::UnknownId(b))?;
            let prev = matrix[i * n + j];
            if !prev.is_nan() && prev != d {
                return Err(SpaceError::Asymmetric {
                    a,
                    b,
                    d_ab: prev,
                    d_ba: d,
                });
            }
            matrix[i * n + j] = d;
            matrix[j * n + i] = d;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[i * n + j].is_nan() {
                    return Err(SpaceError::MissingDistance(ids[i], ids[j]));
                }
            }
        }
        MetricMeasureSpace::new(ids, None, Some(matrix), masses, max_points)
    }
}

/// Serialize to the `space v1` format. Extra comment lines (hash chain etc.)
/// may be appended by the caller; parsers ignore them.
pub fn format_space(space: &MetricMeasureSpace) -> String {
    let mut out = String::from("space v1\n");
    match space.coords() {
        Some(cs) => {
            for (i, &id) in space.ids().iter().enumerate() {
                let joined = cs[i]
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                out.push_str(&format!(
                    "point {id} mass={} coords={joined}\n",
                    space.mass(i)
                ));
            }
        }
        None => {
            for (i, &id) in space.ids().iter().enumerate() {
                out.push_str(&format!("point {id} mass={}\n", space.mass(i)));
            }
            let n = space.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    out.push_str(&format!(
                        "dist {} {} {}\n",
                        space.id_of(i),
                        space.id_of(j),
                        space.dist(i, j)
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn ball_points_on_the_line() {
        let space = gen::uniform_line(10);
        let five = space.index_of(5).unwrap();
        let pts = space.ball_points(Ball::new(five, 2.5));
        let ids: Vec<u64> = pts.iter().map(|&i| space.id_of(i)).collect();
        assert_eq!(ids, vec![3, 4, 5, 6, 7]);
        assert_eq!(space.ball_points(Ball::new(five, 0.0)), vec![five]);
        assert_eq!(space.ball_points(Ball::new(0, 100.0)).len(), 10);
    }

    #[test]
    fn measure_sums_atoms() {
        let space = gen::uniform_line(10);
        assert_eq!(space.measure(&[3, 4, 5, 6, 7]), 5.0);
        assert_eq!(space.measure(&[]), 0.0);

        let three = MetricMeasureSpace::new(
            vec![0, 1, 2],
            Some(vec![vec![0.0], vec![1.0], vec![2.0]]),
            None,
            vec![1.0, 2.0, 4.0],
            16,
        )
        .unwrap();
        assert_eq!(three.measure(&[0, 1, 2]), 7.0);
    }

    #[test]
    fn breakpoints_on_the_line() {
        let space = gen::uniform_line(10);
        let five = space.index_of(5).unwrap();
        assert_eq!(
            space.breakpoint_radii(Some(five)),
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        );
        let single = gen::uniform_line(1);
        assert_eq!(single.breakpoint_radii(None), vec![0.0]);
        let n = space.len();
        assert!(space.breakpoint_radii(None).len() <= n * (n - 1) / 2 + 1);
    }

    #[test]
    fn upper_doubling_pass_and_fail() {
        let space = gen::uniform_line(10);
        let good = DominatingFunction::power(3.0, 1.0, 2.0);
        assert!(check_upper_doubling(&space, &good).pass());

        // lambda(x,r) = r fails already at small radii; encode it as a
        // tabulated function with value ~r on the breakpoint grid.
        let radii = space.breakpoint_radii(None);
        let row: Vec<f64> = radii.iter().map(|&r| r.max(1e-12)).collect();
        let bad = DominatingFunction {
            form: DominatingForm::Tabulated {
                radii: radii.clone(),
                values: vec![row; space.len()],
            },
            c_lambda: 2.0,
        };
        let report = check_upper_doubling(&space, &bad);
        assert!(!report.pass());
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "upper-doubling"));
    }

    #[test]
    fn upper_doubling_on_geometric_masses() {
        // masses 2^{-i} on the line; the fitted power form must pass the
        // exhaustive enumeration, and injecting one oversized atom must not.
        let space = gen::geometric_mass_line(8);
        let lambda = DominatingFunction::fitted_power(&space, 1.0);
        assert!(check_upper_doubling(&space, &lambda).pass());

        let mut masses: Vec<f64> = space.masses().to_vec();
        masses[0] *= 1e6;
        let spiked = MetricMeasureSpace::new(
            space.ids().to_vec(),
            space.coords().map(|c| c.to_vec()),
            None,
            masses,
            DEFAULT_MAX_POINTS,
        )
        .unwrap();
        assert!(!check_upper_doubling(&spiked, &lambda).pass());
    }

    #[test]
    fn geometric_doubling_line_and_grid() {
        let single = gen::uniform_line(1);
        assert!(check_geometric_doubling(&single, 1.0, 1.0).pass());

        let line = gen::uniform_line(10);
        assert!(check_geometric_doubling(&line, 1.0, 3.0).pass());

        let grid = gen::planar_grid(3, 3);
        let report = check_geometric_doubling(&grid, 0.5, 1.0);
        assert!(!report.pass());
    }

    #[test]
    fn metric_validation_rejects_bad_data() {
        // triangle violation: d(0,2) = 10 > 1 + 1
        let res = MetricMeasureSpace::new(
            vec![0, 1, 2],
            None,
            Some(vec![0.0, 1.0, 10.0, 1.0, 0.0, 1.0, 10.0, 1.0, 0.0]),
            vec![1.0; 3],
            16,
        );
        match res {
            Err(SpaceError::Triangle { d_ac, .. }) => assert_eq!(d_ac, 10.0),
            other => panic!("expected triangle violation, got {other:?}"),
        }
    }

    #[test]
    fn space_format_round_trips() {
        let space = gen::random_cloud(12, 7);
        let text = format_space(&space);
        let back = parse_space(&text).unwrap();
        assert_eq!(back.ids(), space.ids());
        for i in 0..space.len() {
            assert_eq!(back.mass(i), space.mass(i));
            for j in 0..space.len() {
                assert_eq!(back.dist(i, j), space.dist(i, j));
            }
        }

        // dist-line variant
        let tri = MetricMeasureSpace::new(
            vec![0, 1, 2],
            None,
            Some(vec![0.0, 1.0, 1.5, 1.0, 0.0, 1.0, 1.5, 1.0, 0.0]),
            vec![1.0, 0.5, 2.0],
            16,
        )
        .unwrap();
        let text = format_space(&tri);
        let back = parse_space(&text).unwrap();
        assert_eq!(back.dist(0, 2), 1.5);
        assert_eq!(back.mass(1), 0.5);
    }

    #[test]
    fn parse_rejects_asymmetric_pair() {
        let text = "space v1\npoint 0 mass=1\npoint 1 mass=1\ndist 0 1 1.0\ndist 1 0 2.0\n";
        assert!(matches!(
            parse_space(text),
            Err(SpaceError::Asymmetric { .. })
        ));
    }
}
