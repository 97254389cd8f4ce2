//! Netlist representation for the nodal oracle: a flat element list over
//! named nodes with ground fixed as node "0", plus a text grammar.
//!
//! Grammar, one element per line, "*" comments and blank lines ignored:
//!
//! ```text
//! R<name> <n+> <n-> <value>
//! L<name> <n+> <n-> <value>
//! C<name> <n+> <n-> <value>
//! V<name> <n+> <n-> AC <amplitude> [<phase_deg>]
//! K<name> <Lname> <Lname> <k>
//! ```
//!
//! Values accept the magnitude suffixes p, n, u, m, k, meg (case-insensitive).

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::link::{LinkDesign, Topology};

/// Ground node name.
pub const GROUND: &str = "0";

/// Element names used by [`netlist_from_design`].
pub const SOURCE_NAME: &str = "VS";
pub const LOAD_NAME: &str = "RLOAD";
/// Node carrying the load voltage in generated netlists.
pub const LOAD_NODE: &str = "SLOAD";

/// Zero-valued resistances are emitted with this floor so element stamping
/// stays uniform; it sits far below every tolerance in use.
pub const RESISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor {
        name: String,
        nodes: (String, String),
        ohms: f64,
    },
    Inductor {
        name: String,
        nodes: (String, String),
        henries: f64,
    },
    Capacitor {
        name: String,
        nodes: (String, String),
        farads: f64,
    },
    VoltageSource {
        name: String,
        nodes: (String, String),
        amplitude: f64,
        phase_deg: f64,
    },
    /// Mutual coupling between two named inductors, M = k·√(La·Lb).
    Coupling {
        name: String,
        inductors: (String, String),
        k: f64,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Resistor { name, .. }
            | Element::Inductor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::VoltageSource { name, .. }
            | Element::Coupling { name, .. } => name,
        }
    }

    /// Terminal pair; couplings have none.
    pub fn nodes(&self) -> Option<(&str, &str)> {
        match self {
            Element::Resistor { nodes, .. }
            | Element::Inductor { nodes, .. }
            | Element::Capacitor { nodes, .. }
            | Element::VoltageSource { nodes, .. } => Some((&nodes.0, &nodes.1)),
            Element::Coupling { .. } => None,
        }
    }

    fn kind_letter(&self) -> char {
        match self {
            Element::Resistor { .. } => 'R',
            Element::Inductor { .. } => 'L',
            Element::Capacitor { .. } => 'C',
            Element::VoltageSource { .. } => 'V',
            Element::Coupling { .. } => 'K',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    elements: Vec<Element>,
}

impl Netlist {
    /// Validate and wrap an element list: unique names matching their kind
    /// letter, positive R/L/C values, at least one source, couplings naming
    /// two distinct existing inductors, and every node reachable from ground.
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::NetlistInvalid {
                message: "empty element list".into(),
            });
        }
        let mut names = BTreeSet::new();
        let mut inductors = BTreeSet::new();
        let mut has_source = false;
        for e in &elements {
            let name = e.name();
            if name.is_empty() || !name.starts_with(e.kind_letter()) {
                return Err(Error::NetlistInvalid {
                    message: format!(
                        "element name '{name}' must start with its kind letter '{}'",
                        e.kind_letter()
                    ),
                });
            }
            if !names.insert(name.to_string()) {
                return Err(Error::NetlistInvalid {
                    message: format!("duplicate element name '{name}'"),
                });
            }
            match e {
                Element::Resistor { ohms: v, .. }
                | Element::Inductor { henries: v, .. }
                | Element::Capacitor { farads: v, .. } => {
                    if !v.is_finite() || *v <= 0.0 {
                        return Err(Error::NetlistInvalid {
                            message: format!("element '{name}' needs a positive value, got {v}"),
                        });
                    }
                }
                Element::VoltageSource { amplitude, .. } => {
                    if !amplitude.is_finite() || *amplitude < 0.0 {
                        return Err(Error::NetlistInvalid {
                            message: format!(
                                "source '{name}' needs a non-negative amplitude, got {amplitude}"
                            ),
                        });
                    }
                    has_source = true;
                }
                Element::Coupling { k, .. } => {
                    if !k.is_finite() || !(0.0..=1.0).contains(k) {
                        return Err(Error::NetlistInvalid {
                            message: format!("coupling '{name}' needs k in [0, 1], got {k}"),
                        });
                    }
                }
            }
            if let Element::Inductor { name, .. } = e {
                inductors.insert(name.clone());
            }
        }
        if !has_source {
            return Err(Error::NetlistInvalid {
                message: "netlist has no source".into(),
            });
        }
        for e in &elements {
            if let Element::Coupling { name, inductors: (la, lb), .. } = e {
                if la == lb {
                    return Err(Error::NetlistInvalid {
                        message: format!("coupling '{name}' must reference two distinct inductors"),
                    });
                }
                for l in [la, lb] {
                    if !inductors.contains(l) {
                        return Err(Error::NetlistInvalid {
                            message: format!("coupling '{name}' references missing inductor '{l}'"),
                        });
                    }
                }
            }
        }

        // connectivity: every node must reach ground through element terminals
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
            let p = parent.entry(x.to_string()).or_insert_with(|| x.to_string()).clone();
            if p == x {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(x.to_string(), root.clone());
            root
        }
        for e in &elements {
            if let Some((a, b)) = e.nodes() {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent.insert(ra, rb);
                }
            }
        }
        if !parent.contains_key(GROUND) {
            return Err(Error::NetlistInvalid {
                message: "no element is connected to the ground node '0'".into(),
            });
        }
        let ground_root = find(&mut parent, GROUND);
        let nodes: Vec<String> = parent.keys().cloned().collect();
        for node in nodes {
            if find(&mut parent, &node) != ground_root {
                return Err(Error::NetlistInvalid {
                    message: format!("node '{node}' is not reachable from ground"),
                });
            }
        }

        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Non-ground node names in sorted order.
    pub fn node_names(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for e in &self.elements {
            if let Some((a, b)) = e.nodes() {
                for n in [a, b] {
                    if n != GROUND {
                        set.insert(n.to_string());
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn find(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name() == name)
    }
}

/// Expand a value token with an optional magnitude suffix.
fn parse_value(token: &str) -> std::result::Result<f64, String> {
    let lower = token.to_ascii_lowercase();
    let (number, factor) = if let Some(stripped) = lower.strip_suffix("meg") {
        (stripped, 1e6)
    } else if let Some(stripped) = lower.strip_suffix('p') {
        (stripped, 1e-12)
    } else if let Some(stripped) = lower.strip_suffix('n') {
        (stripped, 1e-9)
    } else if let Some(stripped) = lower.strip_suffix('u') {
        (stripped, 1e-6)
    } else if let Some(stripped) = lower.strip_suffix('m') {
        (stripped, 1e-3)
    } else if let Some(stripped) = lower.strip_suffix('k') {
        (stripped, 1e3)
    } else {
        (lower.as_str(), 1.0)
    };
    number
        .parse::<f64>()
        .map(|v| v * factor)
        .map_err(|_| format!("cannot parse value '{token}'"))
}

/// Parse netlist source text. Element keys are case-insensitive; names and
/// node labels are normalized to upper case.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut elements = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut inductor_lines: Vec<(usize, String)> = Vec::new();
    let mut coupling_lines: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let name = tokens[0].to_ascii_uppercase();
        let kind = name.chars().next().unwrap();
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };

        if let Some(first) = seen.insert(name.clone(), line_no) {
            return Err(err(format!(
                "duplicate element name '{name}' (first declared on line {first})"
            )));
        }

        let element = match kind {
            'R' | 'L' | 'C' => {
                if tokens.len() != 4 {
                    return Err(err(format!(
                        "expected '{kind}<name> <n+> <n-> <value>', got {} tokens",
                        tokens.len()
                    )));
                }
                let nodes = (tokens[1].to_ascii_uppercase(), tokens[2].to_ascii_uppercase());
                if nodes.0 == nodes.1 {
                    return Err(err(format!("element '{name}' shorts node '{}' to itself", nodes.0)));
                }
                let value = parse_value(tokens[3]).map_err(&err)?;
                if !value.is_finite() || value <= 0.0 {
                    return Err(err(format!("element '{name}' needs a positive value, got {value}")));
                }
                match kind {
                    'R' => Element::Resistor { name, nodes, ohms: value },
                    'L' => {
                        inductor_lines.push((line_no, name.clone()));
                        Element::Inductor { name, nodes, henries: value }
                    }
                    _ => Element::Capacitor { name, nodes, farads: value },
                }
            }
            'V' => {
                if tokens.len() != 5 && tokens.len() != 6 {
                    return Err(err(format!(
                        "expected 'V<name> <n+> <n-> AC <amplitude> [<phase_deg>]', got {} tokens",
                        tokens.len()
                    )));
                }
                if !tokens[3].eq_ignore_ascii_case("AC") {
                    return Err(err(format!("expected 'AC' after the source nodes, got '{}'", tokens[3])));
                }
                let nodes = (tokens[1].to_ascii_uppercase(), tokens[2].to_ascii_uppercase());
                let amplitude = parse_value(tokens[4]).map_err(&err)?;
                let phase_deg = match tokens.get(5) {
                    Some(t) => parse_value(t).map_err(&err)?,
                    None => 0.0,
                };
                Element::VoltageSource { name, nodes, amplitude, phase_deg }
            }
            'K' => {
                if tokens.len() != 4 {
                    return Err(err(format!(
                        "expected 'K<name> <Lname> <Lname> <k>', got {} tokens",
                        tokens.len()
                    )));
                }
                let la = tokens[1].to_ascii_uppercase();
                let lb = tokens[2].to_ascii_uppercase();
                let k = parse_value(tokens[3]).map_err(&err)?;
                coupling_lines.push((line_no, la.clone(), lb.clone()));
                Element::Coupling { name, inductors: (la, lb), k }
            }
            other => {
                return Err(err(format!(
                    "unknown element kind '{other}' (expected R, L, C, V, or K)"
                )));
            }
        };
        elements.push(element);
    }

    // line-numbered check for couplings naming missing inductors
    let inductor_names: BTreeSet<&String> = inductor_lines.iter().map(|(_, n)| n).collect();
    for (line, la, lb) in &coupling_lines {
        for l in [la, lb] {
            if !inductor_names.contains(l) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("coupling references missing inductor '{l}'"),
                });
            }
        }
    }

    Netlist::new(elements)
}

/// Canonical text form; `parse_netlist(serialize(n))` reproduces `n`.
pub fn serialize(netlist: &Netlist) -> String {
    let mut out = String::new();
    for e in netlist.elements() {
        match e {
            Element::Resistor { name, nodes, ohms } => {
                out.push_str(&format!("{name} {} {} {ohms}\n", nodes.0, nodes.1));
            }
            Element::Inductor { name, nodes, henries } => {
                out.push_str(&format!("{name} {} {} {henries}\n", nodes.0, nodes.1));
            }
            Element::Capacitor { name, nodes, farads } => {
                out.push_str(&format!("{name} {} {} {farads}\n", nodes.0, nodes.1));
            }
            Element::VoltageSource { name, nodes, amplitude, phase_deg } => {
                out.push_str(&format!(
                    "{name} {} {} AC {amplitude} {phase_deg}\n",
                    nodes.0, nodes.1
                ));
            }
            Element::Coupling { name, inductors, k } => {
                out.push_str(&format!("{name} {} {} {k}\n", inductors.0, inductors.1));
            }
        }
    }
    out
}

/// Emit the canonical netlist for a link design.
///
/// Primary chain: VS → RS → C1S → L1 → RL1 → ground. Secondary loop:
/// L2 between S1 and ground, RL2 to SLOAD, RLOAD (and C2P when present)
/// from SLOAD to ground. The L2 orientation makes the solved V(SLOAD)/Vs
/// match the closed-form complex gain, including phase. A coupling element
/// carries the design k even when it is zero.
pub fn netlist_from_design(design: &LinkDesign) -> Netlist {
    let n = |s: &str| s.to_string();
    let mut elements = vec![
        Element::VoltageSource {
            name: n(SOURCE_NAME),
            nodes: (n("VIN"), n(GROUND)),
            amplitude: design.source().vs(),
            phase_deg: 0.0,
        },
        Element::Resistor {
            name: n("RS"),
            nodes: (n("VIN"), n("N1")),
            ohms: design.source().rs().max(RESISTANCE_FLOOR),
        },
        Element::Capacitor {
            name: n("C1S"),
            nodes: (n("N1"), n("N2")),
            farads: design.tuning().c1s(),
        },
        Element::Inductor {
            name: n("L1"),
            nodes: (n("N2"), n("N3")),
            henries: design.coils().l1(),
        },
        Element::Resistor {
            name: n("RL1"),
            nodes: (n("N3"), n(GROUND)),
            ohms: design.coils().r_l1().max(RESISTANCE_FLOOR),
        },
        Element::Inductor {
            name: n("L2"),
            nodes: (n("S1"), n(GROUND)),
            henries: design.coils().l2(),
        },
        Element::Resistor {
            name: n("RL2"),
            nodes: (n("S1"), n(LOAD_NODE)),
            ohms: design.coils().r_l2().max(RESISTANCE_FLOOR),
        },
        Element::Resistor {
            name: n(LOAD_NAME),
            nodes: (n(LOAD_NODE), n(GROUND)),
            ohms: design.load().r_load(),
        },
    ];
    if design.topology() == Topology::SeriesParallel {
        let c2p = design.tuning().c2p().expect("sp design carries c2p");
        if c2p > 0.0 {
            elements.push(Element::Capacitor {
                name: n("C2P"),
                nodes: (n(LOAD_NODE), n(GROUND)),
                farads: c2p,
            });
        }
    }
    elements.push(Element::Coupling {
        name: n("K1"),
        inductors: (n("L1"), n("L2")),
        k: design.coils().k(),
    });
    Netlist::new(elements).expect("generated netlist is structurally valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{table1, CoilPair, LoadSpec, SourceSpec, TuningSpec};
    use crate::tuner::{parallel_tank_cap, series_resonance_cap};

    pub(super) const DIVIDER: &str = "\
* canonical resistive divider
V1 1 0 AC 1 0
R1 1 2 100
R2 2 0 100
";

    #[test]
    fn parses_the_divider() {
        let netlist = parse_netlist(DIVIDER).unwrap();
        assert_eq!(netlist.elements().len(), 3);
        assert_eq!(netlist.node_names(), vec!["1".to_string(), "2".to_string()]);
    }

    #[test]
    fn suffixes_expand() {
        for (token, expected) in [
            ("25.141p", 2.5141e-11),
            ("100n", 1e-7),
            ("4.7u", 4.7e-6),
            ("3m", 3e-3),
            ("10k", 1e4),
            ("1meg", 1e6),
            ("2MEG", 2e6),
            ("1e3", 1e3),
            ("-5", -5.0),
        ] {
            let v = parse_value(token).unwrap();
            assert!(
                (v - expected).abs() <= 1e-12 * expected.abs().max(1e-300),
                "{token} → {v}, expected {expected}"
            );
        }
        let netlist = parse_netlist("V1 1 0 AC 1\nC1 1 0 25.141p").unwrap();
        match netlist.find("C1").unwrap() {
            Element::Capacitor { farads, .. } => {
                assert!((farads - 2.5141e-11).abs() < 1e-22);
            }
            other => panic!("expected capacitor, got {other:?}"),
        }
    }

    #[test]
    fn coupling_line_parses_with_declared_inductors() {
        let text = "\
V1 1 0 AC 1 0
L1 1 0 5.48u
L2 2 0 1u
R1 2 0 320
K1 L1 L2 0.4
";
        let netlist = parse_netlist(text).unwrap();
        match netlist.find("K1").unwrap() {
            Element::Coupling { inductors, k, .. } => {
                assert_eq!(inductors, &("L1".to_string(), "L2".to_string()));
                assert_eq!(*k, 0.4);
            }
            other => panic!("expected coupling, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_netlist("V1 1 0 AC 1 0\nR1 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = parse_netlist("V1 1 0 AC 1 0\nX9 1 0 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("unknown element kind"));

        let err = parse_netlist("V1 1 0 AC 1 0\nR1 1 0 10\nR1 0 1 20\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(err.to_string().contains("duplicate"));

        let err = parse_netlist("V1 1 0 AC 1 0\nL1 1 0 1u\nK1 L1 L9 0.3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(err.to_string().contains("missing inductor"));

        let err = parse_netlist("V1 1 0 AC 1 0\nR1 1 0 bogus\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn structural_validation() {
        // floating node: R2 hangs between 3 and 4, unreachable from ground
        let err = parse_netlist("V1 1 0 AC 1 0\nR1 1 0 10\nR2 3 4 10\n").unwrap_err();
        assert!(err.to_string().contains("not reachable"));

        let err = parse_netlist("R1 1 0 10\n").unwrap_err();
        assert!(err.to_string().contains("no source"));
    }

    fn sp_design() -> LinkDesign {
        let c1s = series_resonance_cap(table1::FREQ_HZ, table1::L1).unwrap();
        let c2p = parallel_tank_cap(table1::FREQ_HZ, table1::L2, table1::R_LOAD).unwrap();
        LinkDesign::new(
            Topology::SeriesParallel,
            CoilPair::new(table1::L1, table1::L2, table1::R_L1, table1::R_L2, 0.4).unwrap(),
            SourceSpec::default(),
            LoadSpec::new(table1::R_LOAD).unwrap(),
            TuningSpec::series_parallel(c1s, c2p).unwrap(),
            table1::FREQ_HZ,
        )
        .unwrap()
    }

    fn series_design(k: f64) -> LinkDesign {
        let c1s = series_resonance_cap(table1::FREQ_HZ, table1::L1).unwrap();
        LinkDesign::new(
            Topology::SeriesPrimary,
            CoilPair::new(table1::L1, table1::L2, table1::R_L1, table1::R_L2, k).unwrap(),
            SourceSpec::default(),
            LoadSpec::new(table1::R_LOAD).unwrap(),
            TuningSpec::series(c1s).unwrap(),
            table1::FREQ_HZ,
        )
        .unwrap()
    }

    #[test]
    fn design_netlists_have_the_expected_shape() {
        let series = netlist_from_design(&series_design(0.4));
        // source, rs, c1s, both coils with their parasitics, load, coupling
        assert_eq!(series.elements().len(), 9);
        let sp = netlist_from_design(&sp_design());
        assert_eq!(sp.elements().len(), series.elements().len() + 1);
        assert!(sp.find("C2P").is_some());
        assert!(series.find("C2P").is_none());
        // rs = 0 still emitted, floored
        match series.find("RS").unwrap() {
            Element::Resistor { ohms, .. } => assert_eq!(*ohms, RESISTANCE_FLOOR),
            other => panic!("expected resistor, got {other:?}"),
        }
        // zero coupling retained explicitly
        let k0 = netlist_from_design(&series_design(0.0));
        match k0.find("K1").unwrap() {
            Element::Coupling { k, .. } => assert_eq!(*k, 0.0),
            other => panic!("expected coupling, got {other:?}"),
        }
    }

    #[test]
    fn serialize_round_trips() {
        for text in [
            DIVIDER.to_string(),
            serialize(&netlist_from_design(&sp_design())),
        ] {
            let once = serialize(&parse_netlist(&text).unwrap());
            let twice = serialize(&parse_netlist(&once).unwrap());
            assert_eq!(once, twice);
        }
    }
}
