//! Random matching instances with an independent brute-force oracle.

use std::collections::BTreeMap;

use aql_core::app_model::{CandidateKind, StatementRef};
use aql_core::aql::{Answer, AppIdentifier, Flow, Reference};
use aql_core::bench::SourceSinkSelection;
use aql_core::Strictness;
use rand::Rng;

const SOURCES: [&str; 3] = ["getDeviceId", "getSimSerialNumber", "getLatitude"];
const SINKS: [&str; 3] = ["sendTextMessage", "i", "write"];
const APPS: usize = 2;
const VARIANTS: usize = 2;

/// A statement in the universe: (kind, app, callee index, variant).
pub type Point = (CandidateKind, usize, usize, usize);

pub fn reference(p: Point) -> Reference {
    let (kind, app, name, variant) = p;
    let text = match kind {
        CandidateKind::Source => {
            format!("$r{variant} = virtualinvoke $r0.<android.Api: java.lang.String {}()>()", SOURCES[name])
        }
        CandidateKind::Sink => format!("virtualinvoke $r9.<android.Out: void {}(java.lang.String)>($r{variant})", SINKS[name]),
    };
    Reference::statement_in(&text, "void m()", "C", AppIdentifier::file(format!("app{app}.apk")))
}

fn stmt_ref(p: Point) -> StatementRef {
    let (kind, app, name, variant) = p;
    let kind_offset = if kind == CandidateKind::Source { 0 } else { 100 };
    StatementRef { app: format!("app{app}"), class: "C".into(), method: "void m()".into(), index: kind_offset + name * 10 + variant }
}

pub struct Instance {
    pub expected: Vec<(Point, Point)>,
    pub actual: Vec<(Point, Point)>,
    /// Group label of every selected point.
    pub labels: BTreeMap<Point, usize>,
}

fn point<R: Rng>(rng: &mut R, kind: CandidateKind) -> Point {
    (kind, rng.gen_range(0..APPS), rng.gen_range(0..3), rng.gen_range(0..VARIANTS))
}

fn all_points() -> Vec<Point> {
    let mut out = Vec::new();
    for kind in [CandidateKind::Source, CandidateKind::Sink] {
        for app in 0..APPS {
            for name in 0..3 {
                for variant in 0..VARIANTS {
                    out.push((kind, app, name, variant));
                }
            }
        }
    }
    out
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let flow = |rng: &mut R| (point(rng, CandidateKind::Source), point(rng, CandidateKind::Sink));
        let expected = (0..rng.gen_range(1..=3)).map(|_| flow(rng)).collect();
        let actual = (0..rng.gen_range(0..=5)).map(|_| flow(rng)).collect();
        let mut labels = BTreeMap::new();
        for p in all_points() {
            if rng.gen_bool(0.8) {
                labels.insert(p, rng.gen_range(0..4));
            }
        }
        Instance { expected, actual, labels }
    }

    pub fn answer(flows: &[(Point, Point)]) -> Answer {
        flows.iter().map(|&(s, t)| Flow::new(reference(s), reference(t)).unwrap()).collect()
    }

    pub fn selection(&self) -> SourceSinkSelection {
        let mut sel = SourceSinkSelection::new();
        for &p in self.labels.keys() {
            sel.select(stmt_ref(p), p.0, reference(p)).unwrap();
        }
        let mut by_label: BTreeMap<(CandidateKind, usize), Vec<StatementRef>> = BTreeMap::new();
        for (&p, &label) in &self.labels {
            by_label.entry((p.0, label)).or_default().push(stmt_ref(p));
        }
        for members in by_label.values() {
            sel.group(members).unwrap();
        }
        sel
    }

    /// Merges two labels into one, giving a coarser partition.
    pub fn coarsened(&self, keep: usize, merge: usize) -> Instance {
        let labels = self.labels.iter().map(|(&p, &l)| (p, if l == merge { keep } else { l })).collect();
        Instance { expected: self.expected.clone(), actual: self.actual.clone(), labels }
    }

    fn endpoint(&self, e: Point, a: Point, strictness: Strictness) -> bool {
        if e == a {
            return true;
        }
        if let (Some(le), Some(la)) = (self.labels.get(&e), self.labels.get(&a)) {
            if le == la && e.0 == a.0 {
                return true;
            }
        }
        strictness == Strictness::NameOnly && e.0 == a.0 && e.1 == a.1 && e.2 == a.2
    }

    /// The first matching actual flow in canonical order, by brute force.
    pub fn oracle(&self, strictness: Strictness) -> Option<Flow> {
        let mut hits: Vec<Flow> = Vec::new();
        for &(es, et) in &self.expected {
            for &(as_, at) in &self.actual {
                if self.endpoint(es, as_, strictness) && self.endpoint(et, at, strictness) {
                    hits.push(Flow::new(reference(as_), reference(at)).unwrap());
                }
            }
        }
        hits.into_iter().min()
    }
}
