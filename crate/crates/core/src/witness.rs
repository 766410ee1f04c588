//! A ramp-activation recurrent network, fixed entirely by the input length
//! `n`, that maps each `x` in `{0,1}^n` to its weight in the 3-CNF language:
//! `(1/3)^{n+1}` for `enc(f) . a` with `a` satisfying a 3-CNF `f`, else 0.
//!
//! Hidden layer:
//! - one-hot scanner units, one per state of a finite parser for the 3-CNF
//!   encodings that fit in `n` bits (states are enumerated from `n`);
//! - transient pair units `u[s,b] = r(h[s] + x[b] - 1)` that fire when the
//!   scanner is in `s` and reads `b`;
//! - one clause unit per clause in the [`ClauseUniverse`], switched on when
//!   the parser completes that clause and off by any satisfying literal read
//!   in the assignment phase;
//! - one mention unit per variable, recording that `A_v` occurred.
//!
//! The output is `(1/3)^{n+1} * r(accept - sum clause - sum missing)` where
//! `missing[v] = r(accept_{j >= v} - mention[v])`. With `r(z) = min(max(z, 0), 1)`.

use std::collections::{HashMap, HashSet};

use num::rational::Ratio;
use num::{BigRational, One, Zero};
use thiserror::Error;

use crate::bits::{gamma_encode, BitReader, BitString, Read};
use crate::formula::{Clause, Literal};
use crate::language::recip_pow;

/// Largest input length accepted by [`WitnessRnn::build`].
pub const DEFAULT_WITNESS_CAP: usize = 100;
/// Largest variable count the clause universe is built for.
pub const MAX_WITNESS_VARS: usize = 12;

type Q = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("input length {n} exceeds the witness cap {cap}")]
    Capacity { n: usize, cap: usize },
    #[error("input has {got} bits but the network reads exactly {expected}")]
    Length { expected: usize, got: usize },
    #[error("malformed parameter string")]
    Params,
}

/// All 3-literal clauses over distinct variables of `A1..Aj`: variable
/// triples `a < b < c` in lexicographic order, and within a triple the sign
/// pattern as a 3-bit number (bit 2 negates `a`, bit 0 negates `c`).
#[derive(Clone, Debug)]
pub struct ClauseUniverse {
    j: usize,
    clauses: Vec<Clause>,
    index: HashMap<[(u32, bool); 3], usize>,
}

impl ClauseUniverse {
    pub fn new(j: usize) -> Self {
        let mut clauses = Vec::new();
        let mut index = HashMap::new();
        for a in 1..=j as u32 {
            for b in a + 1..=j as u32 {
                for c in b + 1..=j as u32 {
                    for signs in 0..8u8 {
                        let key = [(a, signs & 4 != 0), (b, signs & 2 != 0), (c, signs & 1 != 0)];
                        index.insert(key, clauses.len());
                        clauses.push(Clause::new(key.iter().map(|&(var, negated)| Literal { var, negated }).collect()));
                    }
                }
            }
        }
        Self { j, clauses, index }
    }

    pub fn var_count(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clause(&self, i: usize) -> &Clause {
        &self.clauses[i]
    }

    /// Position of a strict clause, in any literal order.
    pub fn index_of(&self, c: &Clause) -> Option<usize> {
        let mut key: Vec<(u32, bool)> = c.literals().iter().map(|l| (l.var, l.negated)).collect();
        key.sort();
        let key: [(u32, bool); 3] = key.try_into().ok()?;
        self.index.get(&key).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Mode {
    HeaderJ,
    HeaderNodes,
    RootOp,
    AndArity,
    ClauseOp,
    ClauseArity,
    LitOp,
    NotVarOp,
    LitIndex,
    Padding,
    Assign,
    Done,
}

/// Progress inside the current token: opcode bits or a gamma code word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Tok {
    Start,
    Op(bool),
    Zeros(u8),
    Digits { value: u16, left: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Scan {
    mode: Mode,
    tok: Tok,
    j: u16,
    /// Tree nodes still to be read.
    nodes_left: u16,
    clauses_left: u16,
    lits: [(u16, bool); 2],
    lit_count: u8,
    neg: bool,
    pos: u16,
    t: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Mention(u16),
    SetClause([(u16, bool); 3]),
    Assign { var: u16, value: bool },
}

enum TokStep {
    More(Tok),
    Op(bool, bool),
    Value(u16),
}

fn token_step(mode: Mode, tok: Tok, b: bool) -> Option<TokStep> {
    let opcode = matches!(mode, Mode::RootOp | Mode::ClauseOp | Mode::LitOp | Mode::NotVarOp);
    if opcode {
        return Some(match tok {
            Tok::Start => TokStep::More(Tok::Op(b)),
            Tok::Op(first) => TokStep::Op(first, b),
            _ => unreachable!("opcode modes only use opcode tokens"),
        });
    }
    Some(match (tok, b) {
        (Tok::Start, true) => TokStep::Value(1),
        (Tok::Start, false) => TokStep::More(Tok::Zeros(1)),
        (Tok::Zeros(z), false) if z < 15 => TokStep::More(Tok::Zeros(z + 1)),
        (Tok::Zeros(_), false) => return None,
        (Tok::Zeros(z), true) => TokStep::More(Tok::Digits { value: 1, left: z }),
        (Tok::Digits { value, left }, b) => {
            let value = value * 2 + b as u16;
            if left == 1 {
                TokStep::Value(value)
            } else {
                TokStep::More(Tok::Digits { value, left: left - 1 })
            }
        }
        (Tok::Op(_), _) => unreachable!("gamma modes never hold opcode tokens"),
    })
}

impl Tok {
    /// Smallest value the gamma code word in progress can still take, and
    /// the fewest bits needed to finish it.
    fn floor(self) -> (usize, usize) {
        match self {
            Tok::Start | Tok::Op(_) => (1, 1),
            Tok::Zeros(z) => (1 << z, z as usize + 1),
            Tok::Digits { value, left } => ((value as usize) << left, left as usize),
        }
    }
}

impl Scan {
    fn initial() -> Self {
        Scan {
            mode: Mode::HeaderJ,
            tok: Tok::Start,
            j: 0,
            nodes_left: 0,
            clauses_left: 0,
            lits: [(0, false); 2],
            lit_count: 0,
            neg: false,
            pos: 0,
            t: 0,
        }
    }

    fn node(&mut self) -> Option<()> {
        self.nodes_left = self.nodes_left.checked_sub(1)?;
        Some(())
    }

    fn goto(&mut self, mode: Mode) {
        self.mode = mode;
        self.tok = Tok::Start;
    }

    /// The tree is complete: check the node count, then pad or start the
    /// assignment.
    fn end_body(&mut self) -> Option<()> {
        if self.nodes_left != 0 {
            return None;
        }
        self.lits = [(0, false); 2];
        self.lit_count = 0;
        self.neg = false;
        if self.pos < self.j {
            self.goto(Mode::Padding);
        } else {
            self.pos = 0;
            self.goto(if self.j == 0 { Mode::Done } else { Mode::Assign });
        }
        Some(())
    }

    /// A lower bound on the bits still needed to reach an accepting state.
    fn min_remaining(&self) -> usize {
        let j = self.j as usize;
        match self.mode {
            Mode::Done => 0,
            Mode::Assign => j - self.t as usize,
            Mode::Padding => 2 * j - self.pos as usize,
            Mode::HeaderJ => {
                let (v, bits) = self.tok.floor();
                let j = v - 1;
                bits + j.saturating_sub(self.pos as usize + bits).max(3) + j
            }
            Mode::HeaderNodes => {
                let (v, bits) = self.tok.floor();
                bits + (2 * v - 2).max(j.saturating_sub(self.pos as usize)) + j
            }
            Mode::AndArity => {
                let (v, bits) = self.tok.floor();
                bits + (16 * (v - 1)).max(j.saturating_sub(self.pos as usize)) + j
            }
            _ => {
                let partial = matches!(self.tok, Tok::Op(_)) as usize;
                // Nodes take at least 2 bits; whole clauses after the
                // current one at least 16.
                let nodes = (2 * self.nodes_left as usize).saturating_sub(partial);
                let clauses = 16 * (self.clauses_left as usize).saturating_sub(1);
                nodes.max(clauses).max(j.saturating_sub(self.pos as usize)) + j
            }
        }
    }

    fn step(&self, b: bool, events: &mut Vec<Event>) -> Option<Scan> {
        let mut s = *self;
        match s.mode {
            Mode::Done => return None,
            Mode::Assign => {
                events.push(Event::Assign { var: s.t + 1, value: b });
                s.t += 1;
                if s.t == s.j {
                    s.goto(Mode::Done);
                }
                return Some(s);
            }
            Mode::Padding => {
                if !b {
                    return None;
                }
                s.pos += 1;
                if s.pos == s.j {
                    s.pos = 0;
                    s.goto(Mode::Assign);
                }
                return Some(s);
            }
            _ => {}
        }
        // Only `pos < j` matters (for padding), so saturate once j is known.
        s.pos += 1;
        if s.mode != Mode::HeaderJ {
            s.pos = s.pos.min(s.j);
        }
        match token_step(s.mode, s.tok, b)? {
            TokStep::More(tok) => {
                let (v, _) = tok.floor();
                let dead = match s.mode {
                    Mode::LitIndex => v > s.j as usize,
                    Mode::ClauseArity => v > 4,
                    _ => false,
                };
                if dead {
                    return None;
                }
                s.tok = tok;
            }
            TokStep::Op(b0, b1) => match (s.mode, b0, b1) {
                (Mode::RootOp, false, false) => {
                    s.node()?;
                    s.goto(Mode::AndArity);
                }
                (Mode::RootOp, false, true) => {
                    // Every variable must occur, and a clause has three.
                    if s.j > 3 {
                        return None;
                    }
                    s.node()?;
                    s.clauses_left = 1;
                    s.goto(Mode::ClauseArity);
                }
                (Mode::ClauseOp, false, true) => {
                    s.node()?;
                    s.goto(Mode::ClauseArity);
                }
                (Mode::LitOp, true, true) | (Mode::NotVarOp, true, true) => {
                    s.neg = s.mode == Mode::NotVarOp;
                    s.node()?;
                    s.goto(Mode::LitIndex);
                }
                (Mode::LitOp, true, false) => {
                    s.node()?;
                    s.goto(Mode::NotVarOp);
                }
                _ => return None,
            },
            TokStep::Value(v) => match s.mode {
                Mode::HeaderJ => {
                    s.j = v - 1;
                    s.pos = s.pos.min(s.j);
                    s.goto(Mode::HeaderNodes);
                }
                Mode::HeaderNodes => {
                    s.nodes_left = v;
                    s.goto(Mode::RootOp);
                }
                Mode::AndArity => {
                    s.clauses_left = v - 1;
                    // Each clause needs four nodes and covers three variables.
                    if s.j > 3 * s.clauses_left || s.nodes_left < 4 * s.clauses_left {
                        return None;
                    }
                    if s.clauses_left == 0 {
                        s.end_body()?;
                    } else {
                        s.goto(Mode::ClauseOp);
                    }
                }
                Mode::ClauseArity => {
                    if v != 4 {
                        return None;
                    }
                    s.lit_count = 0;
                    s.goto(Mode::LitOp);
                }
                Mode::LitIndex => {
                    if v > s.j || s.lits[..s.lit_count as usize].iter().any(|&(u, _)| u == v) {
                        return None;
                    }
                    events.push(Event::Mention(v));
                    if s.lit_count < 2 {
                        s.lits[s.lit_count as usize] = (v, s.neg);
                        s.lit_count += 1;
                        s.neg = false;
                        s.goto(Mode::LitOp);
                    } else {
                        let mut key = [s.lits[0], s.lits[1], (v, s.neg)];
                        key.sort();
                        events.push(Event::SetClause(key));
                        s.lits = [(0, false); 2];
                        s.lit_count = 0;
                        s.neg = false;
                        s.clauses_left -= 1;
                        if s.clauses_left == 0 {
                            s.end_body()?;
                        } else {
                            s.goto(Mode::ClauseOp);
                        }
                    }
                }
                _ => unreachable!("opcode modes never yield values"),
            },
        }
        Some(s)
    }
}

/// Sparse signed input lists for one unit: `(pair unit, coefficient)`.
type Inputs = Vec<(usize, i64)>;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    /// Pair-unit id; pair units are numbered `2 * state + bit`.
    pair: usize,
}

/// The network for inputs of length `n`.
#[derive(Clone, Debug)]
pub struct WitnessRnn {
    n: usize,
    universe: ClauseUniverse,
    /// `edges[s][b]` is the transition of scanner state `s` on bit `b`.
    edges: Vec<[Option<Edge>; 2]>,
    initial: Option<usize>,
    /// For each accepting state, the variable count it accepts with.
    accept: HashMap<usize, usize>,
    clause_inputs: Vec<Inputs>,
    mention_inputs: Vec<Inputs>,
}

/// Hidden activations at one step, with the digitality invariant exposed.
#[derive(Clone, Debug, Default)]
pub struct HiddenState {
    pub scanner: HashMap<usize, Q>,
    pub clauses: HashMap<usize, Q>,
    pub mentions: HashMap<usize, Q>,
}

impl HiddenState {
    pub fn is_digital(&self) -> bool {
        let ok = |m: &HashMap<usize, Q>| m.values().all(|v| v.is_zero() || v.is_one());
        ok(&self.scanner) && ok(&self.clauses) && ok(&self.mentions)
    }
}

fn ramp(z: Q) -> Q {
    z.max(Q::zero()).min(Q::one())
}

impl WitnessRnn {
    pub fn build(n: usize) -> Result<Self, WitnessError> {
        if n > DEFAULT_WITNESS_CAP {
            return Err(WitnessError::Capacity { n, cap: DEFAULT_WITNESS_CAP });
        }
        // Forward layers of reachable scanner states, then keep only those
        // from which an accepting state is reached in exactly n steps.
        let mut layers: Vec<HashSet<Scan>> = vec![HashSet::from([Scan::initial()])];
        let mut scratch = Vec::new();
        for _ in 0..n {
            let mut next = HashSet::new();
            for s in layers.last().unwrap() {
                for b in [false, true] {
                    next.extend(s.step(b, &mut scratch).filter(|x| x.min_remaining() <= n - layers.len()));
                }
            }
            layers.push(next);
        }
        let mut live: Vec<HashSet<Scan>> = vec![HashSet::new(); n + 1];
        live[n] = layers[n].iter().filter(|s| s.mode == Mode::Done).copied().collect();
        for t in (0..n).rev() {
            live[t] = layers[t]
                .iter()
                .filter(|s| [false, true].iter().any(|&b| s.step(b, &mut scratch).is_some_and(|x| live[t + 1].contains(&x))))
                .copied()
                .collect();
        }

        let mut ids: HashMap<Scan, usize> = HashMap::new();
        let mut order: Vec<Scan> = Vec::new();
        for layer in &live {
            let mut sorted: Vec<Scan> = layer.iter().copied().filter(|s| !ids.contains_key(s)).collect();
            sorted.sort_by_key(|s| format!("{s:?}"));
            for s in sorted {
                ids.insert(s, order.len());
                order.push(s);
            }
        }
        let j_max = order.iter().map(|s| s.j as usize).max().unwrap_or(0);
        if j_max > MAX_WITNESS_VARS {
            return Err(WitnessError::Capacity { n, cap: DEFAULT_WITNESS_CAP });
        }
        let universe = ClauseUniverse::new(j_max);

        let mut edges = Vec::with_capacity(order.len());
        let mut clause_inputs: Vec<Inputs> = vec![Vec::new(); universe.len()];
        let mut mention_inputs: Vec<Inputs> = vec![Vec::new(); j_max + 1];
        let mut events = Vec::new();
        for (id, s) in order.iter().enumerate() {
            let mut out: [Option<Edge>; 2] = [None, None];
            for b in [false, true] {
                events.clear();
                let Some(to) = s.step(b, &mut events).and_then(|x| ids.get(&x).copied()) else { continue };
                let pair = 2 * id + b as usize;
                for e in &events {
                    match *e {
                        Event::Mention(v) => mention_inputs[v as usize].push((pair, 1)),
                        Event::SetClause(key) => {
                            let key = key.map(|(v, neg)| (v as u32, neg));
                            clause_inputs[universe.index[&key]].push((pair, 1));
                        }
                        Event::Assign { var, value } => {
                            for (ci, c) in universe.clauses.iter().enumerate() {
                                if c.literals().iter().any(|l| l.var == var as u32 && l.negated != value) {
                                    clause_inputs[ci].push((pair, -1));
                                }
                            }
                        }
                    }
                }
                out[b as usize] = Some(Edge { to, pair });
            }
            edges.push(out);
        }
        let accept = order.iter().enumerate().filter(|(_, s)| s.mode == Mode::Done).map(|(i, s)| (i, s.j as usize)).collect();
        let initial = ids.get(&Scan::initial()).copied();
        Ok(WitnessRnn { n, universe, edges, initial, accept, clause_inputs, mention_inputs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn universe(&self) -> &ClauseUniverse {
        &self.universe
    }

    pub fn scanner_units(&self) -> usize {
        self.edges.len()
    }

    /// Every parameter is derived from `n`, so the description is `gamma(n + 1)`.
    pub fn param_bits(&self) -> BitString {
        let mut out = BitString::new();
        gamma_encode(&mut out, self.n as u64 + 1);
        out
    }

    pub fn from_param_bits(bits: &BitString) -> Result<Self, WitnessError> {
        let mut r = BitReader::new(bits.bits());
        match r.read_gamma() {
            Read::Done(v) if r.position() == bits.len() => Self::build(v as usize - 1),
            _ => Err(WitnessError::Params),
        }
    }

    pub fn eval(&self, x: &BitString) -> Result<BigRational, WitnessError> {
        self.eval_trace(x, |_| {})
    }

    /// Evaluates the network, handing each hidden state to `inspect`.
    /// Units whose inputs are all zero are left out of the sparse maps: with
    /// nonpositive biases their ramp output is exactly zero.
    pub fn eval_trace(&self, x: &BitString, mut inspect: impl FnMut(&HiddenState)) -> Result<BigRational, WitnessError> {
        if x.len() != self.n {
            return Err(WitnessError::Length { expected: self.n, got: x.len() });
        }
        let mut h = HiddenState::default();
        if let Some(s0) = self.initial {
            h.scanner.insert(s0, Q::one());
        }
        inspect(&h);
        for &bit in x.bits() {
            let input = [Q::from_integer(!bit as i64), Q::from_integer(bit as i64)];
            // Pair units.
            let mut pairs: HashMap<usize, Q> = HashMap::new();
            for (&s, hs) in &h.scanner {
                for b in 0..2 {
                    if let Some(edge) = &self.edges[s][b] {
                        let u = ramp(hs + input[b] - Q::one());
                        if !u.is_zero() {
                            pairs.insert(edge.pair, u);
                        }
                    }
                }
            }
            let mut next = HiddenState::default();
            for (&pair, u) in &pairs {
                let (s, b) = (pair / 2, pair % 2);
                let to = self.edges[s][b].as_ref().expect("pair units exist only for edges").to;
                *next.scanner.entry(to).or_insert_with(Q::zero) += u;
            }
            next.scanner = next.scanner.into_iter().map(|(k, v)| (k, ramp(v))).filter(|(_, v)| !v.is_zero()).collect();
            next.clauses = self.update(&h.clauses, &self.clause_inputs, &pairs);
            next.mentions = self.update(&h.mentions, &self.mention_inputs, &pairs);
            h = next;
            inspect(&h);
        }
        // Readout.
        let mut z = Q::zero();
        let mut accept_from = vec![Q::zero(); self.universe.var_count() + 2];
        for (s, hs) in &h.scanner {
            if let Some(&j) = self.accept.get(s) {
                z += hs;
                for slot in accept_from.iter_mut().take(j + 1).skip(1) {
                    *slot += hs;
                }
            }
        }
        for c in h.clauses.values() {
            z -= c;
        }
        for (v, slot) in accept_from.iter().enumerate().skip(1) {
            let m = h.mentions.get(&v).copied().unwrap_or_else(Q::zero);
            z -= ramp(slot - m);
        }
        let out = ramp(z);
        Ok(BigRational::from_integer((*out.numer()).into()) / BigRational::from_integer((*out.denom()).into())
            * recip_pow(3, self.n + 1))
    }

    fn update(&self, prev: &HashMap<usize, Q>, inputs: &[Inputs], pairs: &HashMap<usize, Q>) -> HashMap<usize, Q> {
        // Units touched this step: those already on, plus any fed by an
        // active pair unit.
        let mut touched: HashSet<usize> = prev.keys().copied().collect();
        for (unit, ins) in inputs.iter().enumerate() {
            if ins.iter().any(|(p, _)| pairs.contains_key(p)) {
                touched.insert(unit);
            }
        }
        touched
            .into_iter()
            .filter_map(|unit| {
                let mut z = prev.get(&unit).copied().unwrap_or_else(Q::zero);
                for (p, w) in &inputs[unit] {
                    if let Some(u) = pairs.get(p) {
                        z += u * Q::from_integer(*w);
                    }
                }
                let v = ramp(z);
                (!v.is_zero()).then_some((unit, v))
            })
            .collect()
    }
}
