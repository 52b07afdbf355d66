//! The propagated solution as an evaluable object.
//!
//! A point on an interior boundary belongs to the element on its right,
//! where every basis term vanishes and `y` is the stored chain value.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::propagator::{Element, Variant};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFunction {
    a: f64,
    y_a: f64,
    m: usize,
    elements: Vec<Element>,
    x_end: f64,
    tail: Option<f64>,
}

impl SolutionFunction {
    /// Assembles a solution from contiguous elements. `x_end` defaults to the
    /// right edge of the last element.
    pub fn from_parts(
        m: usize,
        elements: Vec<Element>,
        x_end: Option<f64>,
        tail: Option<f64>,
    ) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::Format("solution has no elements".into()))?;
        let last = elements.last().expect("non-empty");
        let sol = Self {
            a: first.x_left,
            y_a: first.y_left,
            m,
            x_end: x_end.unwrap_or_else(|| last.x_right()),
            tail,
            elements,
        };
        sol.validate()?;
        Ok(sol)
    }

    /// Solution over the empty range `[a, a]`.
    pub fn point(a: f64, y_a: f64, m: usize) -> Self {
        Self {
            a,
            y_a,
            m,
            elements: Vec::new(),
            x_end: a,
            tail: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(msg));
        if !(self.a.is_finite() && self.y_a.is_finite() && self.x_end.is_finite()) {
            return bad("non-finite domain data".into());
        }
        if let Some(t) = self.tail {
            if !t.is_finite() {
                return bad("non-finite tail".into());
            }
        }
        for (i, e) in self.elements.iter().enumerate() {
            if e.coeffs.len() != self.m {
                return bad(format!(
                    "element {i} has {} coefficients, expected {}",
                    e.coeffs.len(),
                    self.m
                ));
            }
            if !(e.q > 0.0) || !e.q.is_finite() {
                return bad(format!("element {i} has half-width {}", e.q));
            }
            let finite = e.x_left.is_finite()
                && e.f_left.is_finite()
                && e.y_left.is_finite()
                && e.coeffs.iter().all(|c| c.is_finite());
            if !finite {
                return bad(format!("element {i} holds non-finite values"));
            }
            let edge = i == 0 || i + 1 == self.elements.len();
            if !edge && e.variant == Variant::SingularStart {
                return bad(format!("interior element {i} uses the s-only expansion"));
            }
            if let Some(next) = self.elements.get(i + 1) {
                let right = e.x_right();
                let slack = 4.0 * f64::EPSILON * right.abs().max(next.x_left.abs()).max(e.q);
                if !(next.x_left > e.x_left) || (right - next.x_left).abs() > slack {
                    return bad(format!("elements {i} and {} are not contiguous", i + 1));
                }
            }
        }
        if let Some(last) = self.elements.last() {
            let right = last.x_right();
            let slack = 4.0 * f64::EPSILON * right.abs().max(last.q);
            if (right - self.x_end).abs() > slack {
                return bad("x_end does not match the last element".into());
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn y_a(&self) -> f64 {
        self.y_a
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Converged value carried past `x_end` for open ranges.
    pub fn tail(&self) -> Option<f64> {
        self.tail
    }

    pub fn end_value(&self) -> f64 {
        self.elements.last().map_or(self.y_a, Element::end_value)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x.is_nan() {
            return Err(Error::InvalidInput("abscissa is NaN".into()));
        }
        let above = x > self.x_end && self.tail.is_none();
        if x < self.a || above {
            return Err(Error::Domain {
                x,
                lo: self.a,
                hi: if self.tail.is_some() {
                    f64::INFINITY
                } else {
                    self.x_end
                },
            });
        }
        Ok(())
    }

    /// Index of the element containing `x`. Points beyond `x_end` (tail
    /// region) map to the last element.
    pub fn locate(&self, x: f64) -> Result<usize> {
        self.check_domain(x)?;
        if self.elements.is_empty() {
            return Err(Error::Domain {
                x,
                lo: self.a,
                hi: self.x_end,
            });
        }
        let idx = self.elements.partition_point(|e| e.x_left <= x);
        Ok(idx.saturating_sub(1))
    }

    fn value_in(&self, idx: usize, x: f64) -> f64 {
        if x > self.x_end {
            return self.tail.expect("domain checked");
        }
        let e = &self.elements[idx];
        if x == self.x_end && idx + 1 == self.elements.len() {
            return e.end_value();
        }
        e.value_at_tau(e.tau_of(x))
    }

    fn slope_in(&self, idx: usize, x: f64) -> f64 {
        if x > self.x_end {
            return 0.0;
        }
        let e = &self.elements[idx];
        if x == e.x_left && e.variant == Variant::Standard {
            return e.f_left;
        }
        e.slope_at_tau(e.tau_of(x))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if self.elements.is_empty() {
            self.check_domain(x)?;
            return Ok(self.y_a);
        }
        let idx = self.locate(x)?;
        Ok(self.value_in(idx, x))
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        let idx = self.locate(x)?;
        Ok(self.slope_in(idx, x))
    }

    /// A reader with its own locality cache for runs of nearby queries.
    pub fn reader(&self) -> Reader<'_> {
        Reader {
            solution: self,
            cursor: 0,
            probes: 0,
            queries: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DocumentOut {
            version: FORMAT_VERSION,
            a: Num(self.a),
            y_a: Num(self.y_a),
            m: self.m,
            x_end: Num(self.x_end),
            singular_start: self
                .elements
                .first()
                .is_some_and(|e| e.variant == Variant::SingularStart),
            singular_end: self.elements.len() > 1
                && self
                    .elements
                    .last()
                    .is_some_and(|e| e.variant == Variant::SingularStart),
            tail: self.tail.map(Num),
            elements: self
                .elements
                .iter()
                .map(|e| ElementOut {
                    x_left: Num(e.x_left),
                    q: Num(e.q),
                    f_left: Num(e.f_left),
                    y_left: Num(e.y_left),
                    b: e.coeffs.iter().copied().map(Num).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if probe.version != FORMAT_VERSION {
            return Err(Error::Version {
                found: probe.version,
                expected: FORMAT_VERSION,
            });
        }
        let doc: DocumentIn =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let n = doc.elements.len();
        let elements: Vec<Element> = doc
            .elements
            .into_iter()
            .enumerate()
            .map(|(i, e)| Element {
                x_left: e.x_left,
                q: e.q,
                coeffs: e.b,
                f_left: e.f_left,
                y_left: e.y_left,
                variant: if (i == 0 && doc.singular_start)
                    || (i + 1 == n && i > 0 && doc.singular_end)
                {
                    Variant::SingularStart
                } else {
                    Variant::Standard
                },
            })
            .collect();
        let sol = Self::from_parts(doc.m, elements, Some(doc.x_end), doc.tail)?;
        if sol.a != doc.a || sol.y_a != doc.y_a {
            return Err(Error::Format(
                "a/y_a disagree with the first element".into(),
            ));
        }
        Ok(sol)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Evaluation handle with a warm locate cursor.
///
/// Queries near the previous one are found by hunting outward from the
/// cached index in doubling strides, then bisecting the bracket.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    solution: &'a SolutionFunction,
    cursor: usize,
    probes: u64,
    queries: u64,
}

impl Reader<'_> {
    pub fn locate(&mut self, x: f64) -> Result<usize> {
        let sol = self.solution;
        sol.check_domain(x)?;
        let els = &sol.elements;
        let n = els.len();
        if n == 0 {
            return Err(Error::Domain {
                x,
                lo: sol.a,
                hi: sol.x_end,
            });
        }
        self.queries += 1;
        // index i is right for x iff els[i].x_left <= x < els[i+1].x_left
        let ok_low = |i: usize| els[i].x_left <= x;
        let ok_high = |i: usize| i + 1 == n || x < els[i + 1].x_left;
        let mut i = self.cursor.min(n - 1);
        self.probes += 1;
        if ok_low(i) && ok_high(i) {
            return Ok(i);
        }
        let (mut lo, mut hi);
        if ok_low(i) {
            // x lies to the right of element i
            lo = i;
            let mut stride = 1;
            loop {
                self.probes += 1;
                let next = (lo + stride).min(n - 1);
                if next == n - 1 || x < els[next].x_left {
                    hi = next;
                    if next == n - 1 && ok_low(next) {
                        lo = next;
                        hi = next;
                    }
                    break;
                }
                lo = next;
                stride *= 2;
            }
        } else {
            hi = i;
            let mut stride = 1;
            loop {
                self.probes += 1;
                let next = hi.saturating_sub(stride);
                if next == 0 || els[next].x_left <= x {
                    lo = next;
                    break;
                }
                hi = next;
                stride *= 2;
            }
        }
        // invariant: els[lo].x_left <= x, and x < els[hi].x_left unless lo == hi
        while hi - lo > 1 {
            self.probes += 1;
            let mid = lo + (hi - lo) / 2;
            if els[mid].x_left <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        i = if lo != hi && els[hi].x_left <= x {
            hi
        } else {
            lo
        };
        self.cursor = i;
        Ok(i)
    }

    pub fn eval(&mut self, x: f64) -> Result<f64> {
        if self.solution.elements.is_empty() {
            return self.solution.eval(x);
        }
        let idx = self.locate(x)?;
        Ok(self.solution.value_in(idx, x))
    }

    pub fn eval_derivative(&mut self, x: f64) -> Result<f64> {
        let idx = self.locate(x)?;
        Ok(self.solution.slope_in(idx, x))
    }

    /// Element comparisons made by `locate` so far.
    pub fn probes(&self) -> u64 {
        self.probes
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }
}

/// `f64` written with 17 significant digits.
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text = format!("{:.16e}", self.0);
        let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct ElementOut {
    x_left: Num,
    q: Num,
    f_left: Num,
    y_left: Num,
    #[serde(rename = "B")]
    b: Vec<Num>,
}

#[derive(Serialize)]
struct DocumentOut {
    version: u32,
    a: Num,
    y_a: Num,
    #[serde(rename = "M")]
    m: usize,
    x_end: Num,
    singular_start: bool,
    singular_end: bool,
    tail: Option<Num>,
    elements: Vec<ElementOut>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementIn {
    x_left: f64,
    q: f64,
    f_left: f64,
    y_left: f64,
    #[serde(rename = "B")]
    b: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentIn {
    #[allow(dead_code)]
    version: u32,
    a: f64,
    y_a: f64,
    #[serde(rename = "M")]
    m: usize,
    x_end: f64,
    singular_start: bool,
    singular_end: bool,
    tail: Option<f64>,
    elements: Vec<ElementIn>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{propagate, ToleranceConfig, Upper};

    fn circle() -> SolutionFunction {
        let f = |x: f64| (1.0 - x * x).max(0.0).sqrt();
        propagate(f, 0.0, 0.0, Upper::Finite(1.0), &ToleranceConfig::default())
            .unwrap()
            .solution
    }

    #[test]
    fn endpoints() {
        let sol = circle();
        assert_eq!(sol.eval(0.0).unwrap(), 0.0);
        assert_eq!(sol.locate(0.0).unwrap(), 0);
        assert_eq!(sol.locate(sol.x_end()).unwrap(), sol.len() - 1);
        assert_eq!(sol.eval(sol.x_end()).unwrap(), sol.end_value());
        assert!(matches!(sol.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(sol.eval(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn boundary_belongs_to_right_element() {
        let sol = circle();
        let e1 = &sol.elements()[1];
        assert_eq!(sol.locate(e1.x_left).unwrap(), 1);
        assert_eq!(sol.eval(e1.x_left).unwrap(), e1.y_left);
        assert_eq!(sol.eval_derivative(e1.x_left).unwrap(), e1.f_left);
        assert_eq!(sol.elements()[0].end_value(), e1.y_left);
    }

    #[test]
    fn reader_agrees_with_cold_locate() {
        let sol = circle();
        let mut r = sol.reader();
        for k in 0..=2000 {
            let x = (k as f64 / 2000.0).powi(3);
            assert_eq!(r.locate(x).unwrap(), sol.locate(x).unwrap(), "x = {x}");
        }
        for k in (0..=500).rev() {
            let x = 1.0 - (k as f64 / 500.0).powi(5);
            assert_eq!(r.locate(x).unwrap(), sol.locate(x).unwrap(), "x = {x}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sol = circle();
        let text = sol.to_json().unwrap();
        let back = SolutionFunction::from_json(&text).unwrap();
        assert_eq!(back, sol);
    }

    #[test]
    fn rejects_bad_documents() {
        let sol = circle();
        let text = sol.to_json().unwrap();
        let wrong = text.replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            SolutionFunction::from_json(&wrong),
            Err(Error::Version {
                found: 7,
                expected: 1
            })
        ));
        assert!(matches!(
            SolutionFunction::from_json("{"),
            Err(Error::Format(_))
        ));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["elements"] = serde_json::Value::Array(vec![]);
        assert!(matches!(
            SolutionFunction::from_json(&v.to_string()),
            Err(Error::Format(_))
        ));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["elements"][1]["x_left"] = serde_json::json!(0.123456);
        assert!(SolutionFunction::from_json(&v.to_string()).is_err());
    }
}
